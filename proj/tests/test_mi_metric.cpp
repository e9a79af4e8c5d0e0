#include <doctest.h>

#include <random>

#include "dcereg/bspline_kernel.hpp"
#include "dcereg/mi_metric.hpp"
#include "gradient_check.hpp"
#include "test_support.hpp"

using namespace dcereg;
using namespace dcereg::testing;

namespace {

std::vector<double> uniform_values(std::size_t n, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double &x : v) x = u(rng);
    return v;
}

double entropy(const std::vector<double> &p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0) h -= x * std::log(x);
    return h;
}

JointHistogram manual(std::size_t bins, std::vector<double> joint) {
    JointHistogram h;
    h.bins = bins;
    h.joint = std::move(joint);
    h.fixed_marginal.assign(bins, 0.0);
    h.moving_marginal.assign(bins, 0.0);
    for (std::size_t f = 0; f < bins; ++f)
        for (std::size_t m = 0; m < bins; ++m) {
            h.fixed_marginal[f] += h.at(f, m);
            h.moving_marginal[m] += h.at(f, m);
        }
    return h;
}

}  // namespace

TEST_CASE("joint histogram") {
    const IntensityWindow w{0.0, 100.0};
    SUBCASE("constant pairs deposit one kernel footprint") {
        const std::vector<double> f(64, 40.0), m(64, 70.0);
        const JointHistogram h = joint_histogram(f, m, 32, w, w);
        const auto fb = static_cast<std::size_t>(std::lround(fixed_bin_coordinate(40.0, w, 32)));
        const CubicTaps taps = cubic_taps(moving_bin_coordinate(70.0, w, 32));
        double mass = 0.0;
        for (std::size_t a = 0; a < 32; ++a)
            for (std::size_t b = 0; b < 32; ++b) {
                const bool in_footprint = a == fb && int(b) >= taps.first && int(b) < taps.first + 4;
                if (!in_footprint) CHECK(h.at(a, b) == 0.0);
                mass += h.at(a, b);
            }
        for (int k = 0; k < 4; ++k) CHECK(h.at(fb, taps.first + k) == doctest::Approx(taps.w[k]).epsilon(1e-12));
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("unit mass, non-negative, marginals are row and column sums") {
        const auto f = uniform_values(5000, 1, -10, 110);
        const auto m = uniform_values(5000, 2, -10, 110);
        const JointHistogram h = joint_histogram(f, m, 32, w, w);
        double mass = 0.0;
        for (double p : h.joint) {
            CHECK(p >= 0.0);
            mass += p;
        }
        CHECK(std::abs(mass - 1.0) < 1e-10);
        for (std::size_t a = 0; a < 32; ++a) {
            double row = 0.0, col = 0.0;
            for (std::size_t b = 0; b < 32; ++b) {
                row += h.at(a, b);
                col += h.at(b, a);
            }
            CHECK(std::abs(row - h.fixed_marginal[a]) < 1e-12);
            CHECK(std::abs(col - h.moving_marginal[a]) < 1e-12);
        }
    }
    SUBCASE("moving marginal equals a direct 1-D Parzen histogram") {
        const auto f = uniform_values(3000, 3, 0, 100);
        const auto m = uniform_values(3000, 4, 0, 100);
        const JointHistogram h = joint_histogram(f, m, 24, w, w);
        std::vector<double> direct(24, 0.0);
        for (double x : m) {
            const double u = moving_bin_coordinate(x, w, 24);
            for (int b = 0; b < 24; ++b) direct[b] += bspline3(u - b) / 3000.0;
        }
        for (int b = 0; b < 24; ++b) CHECK(std::abs(direct[b] - h.moving_marginal[b]) < 1e-12);
    }
    SUBCASE("bin coordinates stay inside the kernel-safe range") {
        CHECK(moving_bin_coordinate(-1e6, w, 32) == 2.0);
        CHECK(moving_bin_coordinate(1e6, w, 32) == 29.0);
        CHECK(fixed_bin_coordinate(1e6, w, 32) == 31.0);
        CHECK(fixed_bin_coordinate(-1e6, w, 32) == 0.0);
    }
    SUBCASE("errors") {
        const std::vector<double> few(10, 1.0);
        CHECK_THROWS_AS(joint_histogram(few, few, 32, w, w), MetricUndefined);
        const std::vector<double> many(100, 1.0);
        CHECK_THROWS_AS(joint_histogram(many, many, 4, w, w), std::invalid_argument);
    }
}

TEST_CASE("mutual information") {
    SUBCASE("independent joint gives zero") {
        std::vector<double> pf{0.1, 0.2, 0.3, 0.4, 0, 0, 0, 0}, pm{0.25, 0.25, 0.05, 0.05, 0.1, 0.1, 0.1, 0.1};
        std::vector<double> j(64);
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b) j[a * 8 + b] = pf[a] * pm[b];
        CHECK(std::abs(mutual_information(manual(8, j))) < 1e-10);
    }
    SUBCASE("two-valued identical images give ln 2") {
        std::vector<double> j(64, 0.0);
        j[1 * 8 + 1] = 0.5;
        j[6 * 8 + 6] = 0.5;
        CHECK(mutual_information(manual(8, j)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("random joint equals H(f) + H(m) - H(f,m)") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0, 1);
        std::vector<double> j(16 * 16);
        double s = 0.0;
        for (double &x : j) {
            x = u(rng) < 0.3 ? 0.0 : u(rng);
            s += x;
        }
        for (double &x : j) x /= s;
        const JointHistogram h = manual(16, j);
        const double oracle = entropy(h.fixed_marginal) + entropy(h.moving_marginal) - entropy(h.joint);
        CHECK(std::abs(mutual_information(h) - oracle) < 1e-12);
    }
    SUBCASE("non-negative on sampled histograms") {
        const IntensityWindow w{0, 100};
        for (std::uint64_t s = 0; s < 50; ++s) {
            const auto f = uniform_values(500, 10 + s, 0, 100);
            auto m = uniform_values(500, 100 + s, 0, 100);
            for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.3 * m[i] + 0.7 * f[i] * (s % 2);
            CHECK(mutual_information(joint_histogram(f, m, 32, w, w)) >= -1e-10);
        }
    }
    SUBCASE("self-information is bounded by the marginal entropy") {
        const IntensityWindow w{0, 100};
        const auto f = uniform_values(4000, 7, 0, 100);
        const JointHistogram h = joint_histogram(f, f, 32, w, w);
        const double mi = mutual_information(h);
        CHECK(mi <= entropy(h.fixed_marginal) + 1e-12);
        CHECK(std::abs(mi - (entropy(h.fixed_marginal) + entropy(h.moving_marginal) - entropy(h.joint))) < 1e-10);
    }
    SUBCASE("invariant under affine rescaling of the moving image with its window") {
        const auto f = uniform_values(3000, 8, 0, 100);
        auto m = uniform_values(3000, 9, 0, 100);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * m[i] + 0.5 * f[i];
        const IntensityWindow w{0, 100};
        const double before = mutual_information(joint_histogram(f, m, 32, w, w));
        const double a = 3.7, b = -12.0;
        std::vector<double> scaled(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) scaled[i] = a * m[i] + b;
        const double after = mutual_information(joint_histogram(f, scaled, 32, w, {a * w.min + b, a * w.max + b}));
        CHECK(std::abs(before - after) < 1e-8);
    }
}

TEST_CASE("percentile window") {
    const Geometry g{{10, 10, 10}, {1, 1, 1}, {}};
    Volume3D v(g);
    for (std::size_t n = 0; n < v.size(); ++n) v[n] = double(n);
    const IntensityWindow w = percentile_window(v);
    CHECK(w.min == doctest::Approx(0.005 * 999));
    CHECK(w.max == doctest::Approx(0.995 * 999));
    const IntensityWindow flat = percentile_window(Volume3D(g, 3.0));
    CHECK(flat.max > flat.min);
}

TEST_CASE("mi gradient") {
    SUBCASE("matches central differences") {
        const GradientCheck r = check_mi_gradient(50);
        CHECK(r.checked == 50);
        CHECK(r.worst_relative_error < 1e-3);
    }
    SUBCASE("self-alignment beats one-voxel shifts") {
        const Phantom ph = generate_phantom(small_phantom_spec());
        const BsplineCoefficientVolume c(ph.series[1]);
        const Geometry &g = ph.series.geometry();
        const PairwiseMetricSettings s{32, percentile_window(ph.series[1]), percentile_window(ph.series[1])};
        const auto pts = draw_samples(SamplingDomain::eroded(g, 3), 20000, 3);
        const double at_identity = evaluate_pairwise(c, c, BsplineTransform::for_domain(g, {32, 32, 32}), pts, s, false).value;
        for (int a = 0; a < 3; ++a)
            for (double sgn : {-1.0, 1.0}) {
                Vec3 d;
                d[std::size_t(a)] = sgn * g.spacing[std::size_t(a)];
                CHECK(at_identity < evaluate_pairwise(c, c, translation(g, 32, d), pts, s, false).value);
            }
    }
    SUBCASE("control points without samples get exact zeros") {
        const Phantom ph = generate_phantom(small_phantom_spec());
        const BsplineCoefficientVolume f(ph.series[0]), m(ph.series[3]);
        const Geometry &g = ph.series.geometry();
        const PairwiseMetricSettings s{32, percentile_window(ph.series[0]), percentile_window(ph.series[3])};
        SamplingDomain corner = SamplingDomain::eroded(g, 1);
        corner.upper = corner.lower + Vec3{40, 40, 40};
        const auto pts = draw_samples(corner, 1000, 4);
        const auto t = BsplineTransform::for_domain(g, {16, 16, 16});
        const auto grad = evaluate_pairwise(f, m, t, pts, s).gradient[0];
        std::size_t zeros = 0;
        for (int k = 0; k < t.grid_dims().z; ++k)
            for (int j = 0; j < t.grid_dims().y; ++j)
                for (int i = 0; i < t.grid_dims().x; ++i) {
                    const Vec3 cp = t.control_point_position(i, j, k);
                    if (cp.x > corner.upper.x + 32 || cp.z > corner.upper.z + 32) {
                        const std::size_t n = t.control_point_index(i, j, k);
                        for (int a = 0; a < 3; ++a) CHECK(grad[3 * n + a] == 0.0);
                        ++zeros;
                    }
                }
        CHECK(zeros > 0);
    }
}
