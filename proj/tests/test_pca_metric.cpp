#include <doctest.h>

#include <random>

#include "dcereg/pca_metric.hpp"
#include "dcereg/symmetric_eigen.hpp"
#include "gradient_check.hpp"
#include "test_support.hpp"

using namespace dcereg;
using namespace dcereg::testing;

namespace {

SampleMatrix matrix_from(std::size_t rows, std::size_t cols, std::vector<double> values) {
    SampleMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.values = std::move(values);
    m.drawn = rows;
    return m;
}

SampleMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(rows * cols);
    // Mix a shared factor in so the columns correlate.
    for (std::size_t i = 0; i < rows; ++i) {
        const double common = n(rng);
        for (std::size_t c = 0; c < cols; ++c) v[i * cols + c] = (c + 1) * common + n(rng) + 10.0 * c;
    }
    return matrix_from(rows, cols, std::move(v));
}

double pearson(const SampleMatrix &m, std::size_t a, std::size_t b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        ma += m(i, a);
        mb += m(i, b);
    }
    ma /= m.rows;
    mb /= m.rows;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        sab += (m(i, a) - ma) * (m(i, b) - mb);
        saa += (m(i, a) - ma) * (m(i, a) - ma);
        sbb += (m(i, b) - mb) * (m(i, b) - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> constant_matrix(std::size_t n, double off) {
    std::vector<double> c(n * n, off);
    for (std::size_t i = 0; i < n; ++i) c[i * n + i] = 1.0;
    return c;
}

}  // namespace

TEST_CASE("d_pca extremes and closed forms") {
    CHECK(d_pca(decompose_correlation(constant_matrix(16, 1.0), 16)) == doctest::Approx(16.0).epsilon(1e-10));
    CHECK(d_pca(decompose_correlation(constant_matrix(16, 0.0), 16)) == doctest::Approx(136.0).epsilon(1e-12));
    for (double r : {0.5, -0.5, 0.9, 0.0, -0.25}) {
        const auto c = decompose_correlation({1.0, r, r, 1.0}, 2);
        CHECK(c.eigenvalues[0] == doctest::Approx(1.0 + std::abs(r)).epsilon(1e-12));
        CHECK(c.eigenvalues[1] == doctest::Approx(1.0 - std::abs(r)).epsilon(1e-12));
        CHECK(d_pca(c) == doctest::Approx(3.0 - std::abs(r)).epsilon(1e-12));
    }
    CHECK(d_pca(decompose_correlation({1.0, 0.5, 0.5, 1.0}, 2)) == doctest::Approx(2.5));
}

TEST_CASE("symmetric eigen decomposition") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    const std::size_t n = 9;
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) a[i * n + j] = a[j * n + i] = u(rng);
    const SymmetricEigen e = symmetric_eigen(a, n);
    for (std::size_t j = 1; j < n; ++j) CHECK(e.values[j - 1] >= e.values[j]);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t r = 0; r < n; ++r) {
            double av = 0.0;
            for (std::size_t c = 0; c < n; ++c) av += a[r * n + c] * e.vectors[c * n + j];
            CHECK(std::abs(av - e.values[j] * e.vectors[r * n + j]) < 1e-10);
        }
    }
}

TEST_CASE("correlation matrix") {
    SUBCASE("perfect correlation and anticorrelation") {
        const auto c1 = correlation_matrix(matrix_from(4, 2, {1, 1, 2, 2, 5, 5, -1, -1}));
        CHECK(c1.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(c1.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
        const auto c2 = correlation_matrix(matrix_from(4, 2, {1, -1, 2, -2, 5, -5, -1, 1}));
        CHECK(c2.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(c2.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("matches brute-force Pearson on a random 200x4 matrix") {
        const SampleMatrix m = random_matrix(200, 4, 1);
        const auto c = correlation_matrix(m);
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b) CHECK(std::abs(c.at(a, b) - pearson(m, a, b)) < 1e-12);
    }
    SUBCASE("trace, symmetry, spectrum and bounds on 1000 random matrices") {
        std::mt19937_64 rng(2);
        for (int n = 0; n < 1000; ++n) {
            const std::size_t V = 2 + rng() % 15;
            const SampleMatrix m = random_matrix(40 + rng() % 200, V, rng());
            const auto c = correlation_matrix(m);
            double trace = 0.0, eig = 0.0;
            for (std::size_t v = 0; v < V; ++v) {
                trace += c.at(v, v);
                eig += c.eigenvalues[v];
                CHECK(c.eigenvalues[v] >= -1e-10);
                for (std::size_t w = 0; w < V; ++w) CHECK(std::abs(c.at(v, w) - c.at(w, v)) < 1e-10);
            }
            CHECK(std::abs(trace - double(V)) < 1e-8);
            CHECK(std::abs(eig - double(V)) < 1e-8);
            const double d = d_pca(c);
            CHECK(d >= V - 1e-9);
            CHECK(d <= V * (V + 1) / 2.0 + 1e-9);
        }
    }
    SUBCASE("invariant under positive affine rescaling of columns") {
        SampleMatrix m = random_matrix(300, 5, 3);
        const double before = d_pca(correlation_matrix(m));
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> gain(0.1, 10.0), offset(-100, 100);
        for (std::size_t v = 0; v < 5; ++v) {
            const double a = gain(rng), b = offset(rng);
            for (std::size_t i = 0; i < m.rows; ++i) m.values[i * 5 + v] = a * m.values[i * 5 + v] + b;
        }
        CHECK(std::abs(d_pca(correlation_matrix(m)) - before) < 1e-8);
    }
    SUBCASE("zero-variance columns are regularized and flagged") {
        const auto c = correlation_matrix(matrix_from(4, 2, {1, 3, 2, 3, 5, 3, -1, 3}));
        CHECK(c.regularized);
        for (double x : c.matrix) CHECK(std::isfinite(x));
    }
}

TEST_CASE("build_sample_matrix") {
    const Geometry g{{12, 12, 12}, {2, 2, 2}, {}};
    const Volume3D a = random_volume(g, 1);
    const Volume3D b = random_volume(g, 2);
    std::vector<BsplineCoefficientVolume> co{BsplineCoefficientVolume(a), BsplineCoefficientVolume(b)};
    SUBCASE("identity at voxel centres reads the voxels") {
        const auto stack = TransformStack::identity(RegistrationMode::groupwise, g, 2, {8, 8, 8});
        std::vector<Vec3> pts;
        for (int i = 0; i < 12; ++i) pts.push_back(g.voxel_center(i, (i * 5) % 12, (i * 7) % 12));
        const SampleMatrix m = build_sample_matrix(co, stack, pts, false);
        REQUIRE(m.rows == pts.size());
        for (std::size_t r = 0; r < m.rows; ++r) {
            const Index3 l{int(r), int((r * 5) % 12), int((r * 7) % 12)};
            CHECK(std::abs(m(r, 0) - a.at(l.x, l.y, l.z)) < 1e-8);
            CHECK(std::abs(m(r, 1) - b.at(l.x, l.y, l.z)) < 1e-8);
        }
    }
    SUBCASE("identical volumes give identical columns") {
        std::vector<BsplineCoefficientVolume> same{co[0], co[0], co[0]};
        const auto stack = TransformStack::identity(RegistrationMode::groupwise, g, 3, {8, 8, 8});
        const auto pts = draw_samples(SamplingDomain::eroded(g, 1), 300, 3);
        const SampleMatrix m = build_sample_matrix(same, stack, pts, false);
        for (std::size_t r = 0; r < m.rows; ++r) {
            CHECK(m(r, 0) == m(r, 1));
            CHECK(m(r, 0) == m(r, 2));
        }
    }
    SUBCASE("translated transforms match per-point interpolation") {
        TransformStack stack;
        stack.transforms = {translation(g, 8, {0.7, -1.1, 0.3}), translation(g, 8, {-0.4, 0.2, 1.9})};
        const auto pts = draw_samples(SamplingDomain::eroded(g, 2), 300, 4);
        const SampleMatrix m = build_sample_matrix(co, stack, pts, true);
        for (std::size_t r = 0; r < m.rows; ++r)
            for (std::size_t v = 0; v < 2; ++v) {
                const auto s = interpolate_world(co[v], stack.transforms[v].apply(m.points[r]));
                CHECK(std::abs(m(r, v) - s.value) < 1e-12);
            }
    }
    SUBCASE("rows leaving the support are dropped; too few rows is an error") {
        TransformStack stack;
        stack.transforms = {translation(g, 8, {0, 0, 0}), translation(g, 8, {100, 0, 0})};
        const auto pts = draw_samples(SamplingDomain::eroded(g, 1), 100, 5);
        CHECK_THROWS_AS(build_sample_matrix(co, stack, pts, false), MetricUndefined);
    }
}

TEST_CASE("d_pca gradient") {
    SUBCASE("stationary for aligned identical volumes") {
        const Phantom ph = generate_phantom(small_phantom_spec());
        std::vector<BsplineCoefficientVolume> co(4, BsplineCoefficientVolume(ph.series[2]));
        const Geometry &g = ph.series.geometry();
        const auto stack = TransformStack::identity(RegistrationMode::groupwise, g, 4, {32, 32, 32});
        const auto pts = draw_samples(SamplingDomain::eroded(g, 1), 2048, 1);
        const MetricValue mv = evaluate_groupwise(co, stack, pts);
        CHECK(mv.value == doctest::Approx(4.0).epsilon(1e-9));
        double sq = 0.0;
        for (const auto &gv : mv.gradient)
            for (double x : gv) sq += x * x;
        CHECK(std::sqrt(sq) < 1e-6);
    }
    SUBCASE("matches central differences") {
        const GradientCheck r = check_pca_gradient(50);
        CHECK(r.checked == 50);
        CHECK(r.worst_relative_error < 1e-3);
    }
    SUBCASE("control points away from every sample get exact zeros") {
        const Phantom ph = generate_phantom(small_phantom_spec());
        std::vector<BsplineCoefficientVolume> co;
        for (const auto &v : ph.series) co.emplace_back(v);
        const Geometry &g = ph.series.geometry();
        auto stack = TransformStack::identity(RegistrationMode::groupwise, g, 4, {16, 16, 16});
        SamplingDomain corner = SamplingDomain::eroded(g, 1);
        corner.upper = corner.lower + Vec3{30, 30, 30};
        const auto pts = draw_samples(corner, 500, 2);
        const MetricValue mv = evaluate_groupwise(co, stack, pts);
        const BsplineTransform &t = stack.transforms[0];
        std::size_t zeros = 0;
        for (int k = 0; k < t.grid_dims().z; ++k)
            for (int j = 0; j < t.grid_dims().y; ++j)
                for (int i = 0; i < t.grid_dims().x; ++i) {
                    const Vec3 cp = t.control_point_position(i, j, k);
                    if (cp.x > corner.upper.x + 2 * 16 || cp.y > corner.upper.y + 2 * 16) {
                        const std::size_t n = t.control_point_index(i, j, k);
                        for (std::size_t v = 0; v < 4; ++v)
                            for (int a = 0; a < 3; ++a) CHECK(mv.gradient[v][3 * n + a] == 0.0);
                        ++zeros;
                    }
                }
        CHECK(zeros > 0);
    }
}

TEST_CASE("two-volume translation sweep increases d_pca") {
    const Geometry g{{32, 32, 32}, {1, 1, 1}, {}};
    Volume3D v = gaussian_smooth(random_volume(g, 8), {2, 2, 2});
    std::vector<BsplineCoefficientVolume> co{BsplineCoefficientVolume(v), BsplineCoefficientVolume(v)};
    SamplingDomain d = SamplingDomain::eroded(g, 6);
    const auto pts = draw_samples(d, 5000, 9);
    double last = 0.0;
    for (double shift : {0.0, 1.0, 2.0, 4.0}) {
        TransformStack s;
        s.transforms = {translation(g, 8, {0, 0, 0}), translation(g, 8, {shift, 0, 0})};
        const double dv = evaluate_groupwise(co, s, pts, false).value;
        CHECK(dv > last);
        last = dv;
    }
}
