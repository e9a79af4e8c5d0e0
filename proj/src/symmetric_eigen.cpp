#include "dcereg/symmetric_eigen.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace dcereg {

SymmetricEigen symmetric_eigen(const std::vector<double> &matrix, std::size_t n) {
    if (matrix.size() != n * n) {
        throw std::invalid_argument("symmetric_eigen: matrix size mismatch");
    }
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMatrix> a(matrix.data(), Eigen::Index(n), Eigen::Index(n));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("symmetric_eigen: decomposition did not converge");
    }
    // Eigen sorts ascending; callers want descending.
    SymmetricEigen out;
    out.values.resize(n);
    out.vectors.resize(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        const Eigen::Index src = Eigen::Index(n - 1 - j);
        out.values[j] = solver.eigenvalues()(src);
        for (std::size_t r = 0; r < n; ++r) out.vectors[r * n + j] = solver.eigenvectors()(Eigen::Index(r), src);
    }
    return out;
}

}  // namespace dcereg
