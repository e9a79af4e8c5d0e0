#include <doctest.h>

#include <cmath>

#include "dcereg/evaluation.hpp"
#include "dcereg/phantom.hpp"
#include "test_support.hpp"

using namespace dcereg;
using namespace dcereg::testing;

TEST_CASE("enhancement curve") {
    const EnhancementParams p{100, 80, 1, 4, 2};
    CHECK(enhancement_curve(p, 0) == 100.0);
    CHECK(enhancement_curve(p, 1) == 100.0);
    CHECK(enhancement_curve(p, 5) == doctest::Approx(180.0).epsilon(1e-14));
    for (double t = 0; t < 16; t += 0.25) {
        const double s = std::max(0.0, (t - 1) / 4);
        const double oracle = t <= 1 ? 100.0 : 100 + 80 * s * s * std::exp(2 * (1 - s));
        CHECK(std::abs(enhancement_curve(p, t) - oracle) < 1e-12);
        CHECK(enhancement_curve(p, t) <= 180.0 + 1e-12);
    }
}

TEST_CASE("phantom generation") {
    SUBCASE("deterministic and seed dependent") {
        const Phantom a = generate_phantom(small_phantom_spec(3));
        const Phantom b = generate_phantom(small_phantom_spec(3));
        const Phantom c = generate_phantom(small_phantom_spec(4));
        bool same = true, differs = false;
        for (std::size_t v = 0; v < 4; ++v)
            for (std::size_t n = 0; n < a.series[v].size(); ++n) {
                same = same && a.series[v][n] == b.series[v][n];
                differs = differs || a.series[v][n] != c.series[v][n];
            }
        CHECK(same);
        CHECK(differs);
    }
    SUBCASE("volume 0 carries no motion") {
        const Phantom ph = generate_phantom(small_phantom_spec());
        CHECK(ph.truth.motion[0].is_identity());
        CHECK(ph.truth.group_of_volume == std::vector<int>{0, 1, 1, 2});
        CHECK(ph.truth.group_shifts_mm[0] == Vec3{});
    }
    SUBCASE("explicit shift without perturbation is a pure translation") {
        PhantomSpec s = small_phantom_spec();
        s.group_shifts_mm = {{0, 0, 0}, {4, 0, 0}, {0, 0, -4}};
        s.perturbation_mm = 0;
        s.volume_jitter_mm = 0;
        const Phantom ph = generate_phantom(s);
        const Vec3 q{70, 80, 60};
        CHECK(norm(ph.truth.motion[1].displacement(q) - Vec3{4, 0, 0}) < 1e-12);
        CHECK(norm(ph.truth.anatomy_point(3, q) - Vec3{70, 80, 64}) < 1e-12);
    }
    SUBCASE("motion-free series has aligned lesions") {
        PhantomSpec s = small_phantom_spec();
        s.group_shifts_mm = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        s.perturbation_mm = 0;
        s.volume_jitter_mm = 0;
        const Phantom ph = generate_phantom(s);
        for (std::size_t v = 1; v < 4; ++v) CHECK(dice(ph.truth.lesion_masks[v], ph.truth.lesion_masks[0]) == 1.0);
    }
    SUBCASE("lesion brightens after onset") {
        PhantomSpec s = small_phantom_spec();
        s.noise_sd = 0;
        const Phantom ph = generate_phantom(s);
        std::vector<double> curve;
        for (std::size_t v = 0; v < 4; ++v) curve.push_back(mean_intensity_in_mask(ph.truth.clean[v], ph.truth.lesion_masks[v]));
        // volume 1 sits at the onset
        CHECK(curve[1] == doctest::Approx(curve[0]));
        CHECK(curve[2] > curve[1]);
        CHECK(curve[3] > curve[2]);
    }
    SUBCASE("invalid specs") {
        PhantomSpec s = small_phantom_spec();
        s.breath_hold_groups = {1, 2};
        CHECK_THROWS_AS(generate_phantom(s), std::invalid_argument);
        s = small_phantom_spec();
        s.breath_hold_groups = {2, 1, 1};
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
        s = small_phantom_spec();
        s.lesion_center = {0, 0, 0};
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
        s = small_phantom_spec();
        s.group_shifts_mm = {{1, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
        s = small_phantom_spec();
        s.lesion_tissue.onset = 0;
        CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    }
}

TEST_CASE("lesion volume under motion") {
    SUBCASE("analytic lesion volume varies by less than 2%") {
        // 0.5 mm lattice around the lesion, counting points whose anatomy falls inside the sphere.
        // The offset keeps the lattice off the sphere centre, where many points sit exactly on the surface.
        auto spread = [](const Phantom &ph, const PhantomSpec &spec) {
            const double reach = spec.lesion_radius_mm + spec.max_shift_mm + 4.0;
            double lo = 1e300, hi = 0;
            for (std::size_t v = 0; v < ph.series.count(); ++v) {
                std::size_t inside = 0;
                for (double z = -reach; z <= reach; z += 0.5)
                    for (double y = -reach; y <= reach; y += 0.5)
                        for (double x = -reach; x <= reach; x += 0.5) {
                            const Vec3 q = spec.lesion_center + Vec3{x + 0.37, y + 0.21, z + 0.13};
                            if (norm(ph.truth.anatomy_point(v, q) - spec.lesion_center) < spec.lesion_radius_mm)
                                ++inside;
                        }
                lo = std::min(lo, double(inside));
                hi = std::max(hi, double(inside));
            }
            return (hi - lo) / lo;
        };
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            PhantomSpec spec;
            spec.seed = seed;
            CHECK(spread(generate_phantom(spec), spec) < 0.02);
        }
    }
    SUBCASE("digitised masks stay within one voxel layer") {
        // on 3x3x4 mm voxels one surface layer is a large share of the lesion volume
        const Phantom ph = generate_phantom(PhantomSpec{});
        double lo = 1e300, hi = 0;
        for (const auto &m : ph.truth.lesion_masks) {
            lo = std::min(lo, double(m.count()));
            hi = std::max(hi, double(m.count()));
        }
        CHECK((hi - lo) / lo < 0.15);
    }
}

TEST_CASE("default phantom misalignment") {
    const Phantom ph = generate_phantom(PhantomSpec{});
    CHECK(ph.series.count() == 16);
    double sum = 0;
    for (std::size_t v = 1; v < 16; ++v) sum += dice(ph.truth.lesion_masks[v], ph.truth.lesion_masks[0]);
    const double mean = sum / 15;
    CHECK(mean >= 0.4);
    CHECK(mean <= 0.8);
}

TEST_CASE("residual alignment error") {
    PhantomSpec s = small_phantom_spec();
    s.group_shifts_mm = {{0, 0, 0}, {6, 0, 0}, {0, 6, 0}};
    s.perturbation_mm = 0;
    s.volume_jitter_mm = 0;
    const Phantom ph = generate_phantom(s);
    const Geometry &g = ph.series.geometry();
    TransformStack truth = TransformStack::identity(RegistrationMode::pairwise, g, 4, {32, 32, 32});
    truth.transforms[0] = translation(g, 32, {6, 0, 0});
    truth.transforms[1] = translation(g, 32, {6, 0, 0});
    truth.transforms[2] = translation(g, 32, {0, 6, 0});
    CHECK(residual_alignment_error(ph.truth, truth, ph.truth.lesion_masks[0]) < 1e-9);
    const auto id = TransformStack::identity(RegistrationMode::pairwise, g, 4, {32, 32, 32});
    // 6 mm on 6 mm voxels for every volume
    CHECK(residual_alignment_error(ph.truth, id, ph.truth.lesion_masks[0]) == doctest::Approx(1.0).epsilon(1e-9));
}
