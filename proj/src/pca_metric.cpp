#include "dcereg/pca_metric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcereg/symmetric_eigen.hpp"

namespace dcereg {

SampleMatrix build_sample_matrix(std::span<const BsplineCoefficientVolume> volumes, const TransformStack &stack,
                                 std::span<const Vec3> points, bool with_gradients) {
    const std::size_t V = volumes.size();
    if (stack.volume_count() != V) {
        throw std::invalid_argument("transform stack does not match the number of volumes");
    }
    SampleMatrix m;
    m.cols = V;
    m.drawn = points.size();
    m.values.reserve(points.size() * V);
    if (with_gradients) m.gradients.reserve(points.size() * V);

    std::vector<double> row(V);
    std::vector<Vec3> grow(V);
    for (const Vec3 &p : points) {
        bool ok = true;
        for (std::size_t v = 0; v < V && ok; ++v) {
            const Vec3 q = stack.map_to_volume(v, p);
            const Vec3 u = volumes[v].geometry().world_to_voxel(q);
            if (with_gradients) {
                const InterpolatedSample s = interpolate(volumes[v], u);
                ok = s.valid;
                row[v] = s.value;
                grow[v] = s.gradient;
            } else {
                bool valid = false;
                row[v] = interpolate_value(volumes[v], u, &valid);
                ok = valid;
            }
        }
        if (!ok) continue;
        m.values.insert(m.values.end(), row.begin(), row.end());
        if (with_gradients) m.gradients.insert(m.gradients.end(), grow.begin(), grow.end());
        m.points.push_back(p);
        ++m.rows;
    }
    if (m.rows < V) {
        throw MetricUndefined("only " + std::to_string(m.rows) + " of " + std::to_string(points.size()) +
                              " samples are inside every volume; need at least " + std::to_string(V));
    }
    return m;
}

namespace {

void fill_eigen(CorrelationDecomposition &c) {
    const SymmetricEigen e = symmetric_eigen(c.matrix, c.size);
    c.eigenvalues = e.values;
    c.eigenvectors = e.vectors;
    c.degenerate = false;
    for (std::size_t j = 1; j < c.size; ++j) {
        if (std::abs(c.eigenvalues[j - 1] - c.eigenvalues[j]) < 1e-9) c.degenerate = true;
    }
}

}  // namespace

CorrelationDecomposition correlation_matrix(const SampleMatrix &m) {
    const std::size_t N = m.rows;
    const std::size_t V = m.cols;
    if (N < 2) {
        throw MetricUndefined("correlation needs at least two samples");
    }
    CorrelationDecomposition c;
    c.size = V;
    c.means.assign(V, 0.0);
    c.deviations.assign(V, 0.0);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t v = 0; v < V; ++v) {
            c.means[v] += m(i, v);
            max_abs = std::max(max_abs, std::abs(m(i, v)));
        }
    }
    for (double &mean : c.means) mean /= static_cast<double>(N);

    // Covariance of the centered columns.
    std::vector<double> cov(V * V, 0.0);
    std::vector<double> centered(V);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t v = 0; v < V; ++v) centered[v] = m(i, v) - c.means[v];
        for (std::size_t a = 0; a < V; ++a) {
            for (std::size_t b = a; b < V; ++b) cov[a * V + b] += centered[a] * centered[b];
        }
    }
    const double inv = 1.0 / static_cast<double>(N - 1);
    const double floor = 1e-8 * (max_abs + 1.0);
    for (std::size_t v = 0; v < V; ++v) {
        double sd = std::sqrt(cov[v * V + v] * inv);
        if (sd < floor) {
            sd = floor;
            c.regularized = true;
        }
        c.deviations[v] = sd;
    }
    c.matrix.assign(V * V, 0.0);
    for (std::size_t a = 0; a < V; ++a) {
        for (std::size_t b = a; b < V; ++b) {
            const double r = cov[a * V + b] * inv / (c.deviations[a] * c.deviations[b]);
            c.matrix[a * V + b] = r;
            c.matrix[b * V + a] = r;
        }
    }
    fill_eigen(c);
    return c;
}

CorrelationDecomposition decompose_correlation(std::vector<double> matrix, std::size_t size) {
    if (matrix.size() != size * size) {
        throw std::invalid_argument("correlation matrix size mismatch");
    }
    CorrelationDecomposition c;
    c.size = size;
    c.matrix = std::move(matrix);
    fill_eigen(c);
    return c;
}

double d_pca(const CorrelationDecomposition &c) {
    double d = 0.0;
    for (std::size_t j = 0; j < c.eigenvalues.size(); ++j) {
        d += static_cast<double>(j + 1) * c.eigenvalues[j];
    }
    return d;
}

StackGradient d_pca_gradient(const SampleMatrix &m, const CorrelationDecomposition &c,
                             const TransformStack &stack) {
    const std::size_t N = m.rows;
    const std::size_t V = m.cols;
    if (m.gradients.size() != N * V) {
        throw std::invalid_argument("d_pca_gradient needs a sample matrix built with gradients");
    }
    if (c.size != V || c.means.size() != V) {
        throw std::invalid_argument("decomposition does not belong to this sample matrix");
    }

    // Weight matrix W = sum_j j e_j e_j^T; dD = tr(W dC) for the weighted eigenvalue sum.
    std::vector<double> W(V * V, 0.0);
    for (std::size_t j = 0; j < V; ++j) {
        const double w = static_cast<double>(j + 1);
        for (std::size_t a = 0; a < V; ++a) {
            for (std::size_t b = 0; b < V; ++b) {
                W[a * V + b] += w * c.eigenvectors[a * V + j] * c.eigenvectors[b * V + j];
            }
        }
    }
    // (W C)_vv terms from the dependence of the column deviations on the samples.
    std::vector<double> wc_diag(V, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t l = 0; l < V; ++l) wc_diag[v] += W[v * V + l] * c.matrix[l * V + v];
    }

    StackGradient grad(stack.transforms.size());
    for (std::size_t t = 0; t < stack.transforms.size(); ++t) {
        grad[t].assign(stack.transforms[t].parameter_count(), 0.0);
    }

    const double scale = 2.0 / static_cast<double>(N - 1);
    std::vector<double> z(V);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t v = 0; v < V; ++v) z[v] = (m(i, v) - c.means[v]) / c.deviations[v];
        const Vec3 &p = m.points[i];
        for (std::size_t v = 0; v < V; ++v) {
            const BsplineTransform *tf = stack.for_volume(v);
            if (!tf) continue;
            double zw = 0.0;
            for (std::size_t l = 0; l < V; ++l) zw += z[l] * W[l * V + v];
            const double dm = scale / c.deviations[v] * (zw - z[v] * wc_diag[v]);
            const Vec3 g = m.gradients[i * V + v] * dm;
            auto &out = grad[stack.mode == RegistrationMode::groupwise ? v : v - 1];
            tf->for_each_support(p, [&](std::size_t cp, double w) {
                out[3 * cp] += w * g.x;
                out[3 * cp + 1] += w * g.y;
                out[3 * cp + 2] += w * g.z;
            });
        }
    }
    return grad;
}

MetricValue evaluate_groupwise(std::span<const BsplineCoefficientVolume> volumes, const TransformStack &stack,
                               std::span<const Vec3> points, bool with_gradient) {
    const SampleMatrix m = build_sample_matrix(volumes, stack, points, with_gradient);
    const CorrelationDecomposition c = correlation_matrix(m);
    MetricValue out;
    out.value = d_pca(c);
    out.valid_samples = m.rows;
    out.spectrum = c.eigenvalues;
    out.flagged = c.regularized || c.degenerate;
    if (with_gradient) out.gradient = d_pca_gradient(m, c, stack);
    return out;
}

}  // namespace dcereg
