#pragma once

#include <cstddef>
#include <vector>

namespace dcereg {

struct SymmetricEigen {
    std::vector<double> values;   ///< descending
    std::vector<double> vectors;  ///< n x n, column j pairs with values[j] (row-major storage)
};

/// Eigen-decomposition of a symmetric n x n row-major matrix.
SymmetricEigen symmetric_eigen(const std::vector<double> &matrix, std::size_t n);

}  // namespace dcereg
