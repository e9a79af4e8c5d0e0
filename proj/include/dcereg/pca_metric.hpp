#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "dcereg/bspline_transform.hpp"
#include "dcereg/interpolation.hpp"

namespace dcereg {

/// Raised when too few samples survive the support check for a metric to be defined.
class MetricUndefined : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// N x V intensity matrix (row-major) sampled at common-space points.
struct SampleMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;      ///< rows x cols
    std::vector<Vec3> points;        ///< common-space point of each kept row
    std::vector<Vec3> gradients;     ///< rows x cols spatial gradients (per mm), empty if not requested
    std::size_t drawn = 0;           ///< rows before the support filter

    double operator()(std::size_t i, std::size_t v) const { return values[i * cols + v]; }
};

/// Samples volume v at stack.map_to_volume(v, p) for every point. Rows where
/// any volume falls outside its support are dropped. Throws MetricUndefined
/// when fewer than V rows remain.
SampleMatrix build_sample_matrix(std::span<const BsplineCoefficientVolume> volumes, const TransformStack &stack,
                                 std::span<const Vec3> points, bool with_gradients);

struct CorrelationDecomposition {
    std::size_t size = 0;              ///< V
    std::vector<double> matrix;        ///< V x V correlation C
    std::vector<double> means;         ///< column means
    std::vector<double> deviations;    ///< column standard deviations (N-1), after the epsilon floor
    std::vector<double> eigenvalues;   ///< descending
    std::vector<double> eigenvectors;  ///< V x V, column j pairs with eigenvalues[j]
    bool regularized = false;          ///< some column hit the zero-variance floor
    bool degenerate = false;           ///< adjacent eigenvalues within 1e-9

    double at(std::size_t r, std::size_t c) const { return matrix[r * size + c]; }
};

/// C = S^-1 (M - Mbar)^T (M - Mbar) S^-1 / (N-1), with its eigen-decomposition.
CorrelationDecomposition correlation_matrix(const SampleMatrix &m);

/// Eigen-decomposition of an already formed V x V correlation matrix.
CorrelationDecomposition decompose_correlation(std::vector<double> matrix, std::size_t size);

/// Weighted eigenvalue sum: sum_j j * lambda_j with lambda sorted descending, j = 1..V.
double d_pca(const CorrelationDecomposition &c);

/// Gradient buffers laid out like each transform's parameter vector.
using StackGradient = std::vector<std::vector<double>>;

/// Exact derivative of d_pca with respect to every coefficient in the stack.
/// `m` must carry gradients and `c` must come from correlation_matrix(m).
StackGradient d_pca_gradient(const SampleMatrix &m, const CorrelationDecomposition &c,
                             const TransformStack &stack);

struct MetricValue {
    double value = 0.0;
    StackGradient gradient;
    std::size_t valid_samples = 0;
    std::vector<double> spectrum;  ///< eigenvalues (groupwise only)
    bool flagged = false;          ///< regularized or degenerate
};

/// One full groupwise evaluation: sample, correlate, weigh eigenvalues, differentiate.
MetricValue evaluate_groupwise(std::span<const BsplineCoefficientVolume> volumes, const TransformStack &stack,
                               std::span<const Vec3> points, bool with_gradient = true);

}  // namespace dcereg
