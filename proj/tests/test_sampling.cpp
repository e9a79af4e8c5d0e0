#include <doctest.h>

#include "dcereg/sampling.hpp"
#include "test_support.hpp"

using namespace dcereg;

TEST_CASE("draw_samples") {
    const Geometry g{{64, 64, 64}, {1, 1, 1}, {}};
    const SamplingDomain d = SamplingDomain::eroded(g, 1.0);
    SUBCASE("count and containment") {
        const auto pts = draw_samples(d, 2048, 17);
        CHECK(pts.size() == 2048);
        for (const auto &p : pts) {
            CHECK(d.contains(p));
            CHECK(g.contains_voxel_coord(g.world_to_voxel(p)));
        }
    }
    SUBCASE("deterministic under seed") {
        const auto a = draw_samples(d, 500, 99);
        const auto b = draw_samples(d, 500, 99);
        const auto c = draw_samples(d, 500, 100);
        CHECK(a == b);
        CHECK(a != c);
    }
    SUBCASE("octant chi-square uniformity") {
        const auto pts = draw_samples(d, 100000, 5);
        std::array<double, 8> counts{};
        const Vec3 mid = (d.lower + d.upper) * 0.5;
        for (const auto &p : pts) {
            const int o = (p.x > mid.x) + 2 * (p.y > mid.y) + 4 * (p.z > mid.z);
            counts[o] += 1.0;
        }
        const double expected = 100000.0 / 8.0;
        double chi2 = 0.0;
        for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
        // chi-square with 7 degrees of freedom: p = 0.001 at 24.32.
        CHECK(chi2 < 24.32);
    }
    SUBCASE("body mask restricts the points") {
        SamplingDomain md = d;
        md.mask = dcereg::testing::box_mask(g, {10, 10, 10}, {30, 40, 50});
        for (const auto &p : draw_samples(md, 1000, 3)) {
            const Vec3 c = g.world_to_voxel(p);
            CHECK(c.x > 9.5);
            CHECK(c.x < 30.5);
            CHECK(c.z < 50.5);
        }
    }
    SUBCASE("degenerate domains are rejected") {
        SamplingDomain bad;
        bad.lower = {0, 0, 0};
        bad.upper = {0, 5, 5};
        CHECK_THROWS_AS(draw_samples(bad, 10, 1), std::invalid_argument);
        SamplingDomain empty_mask = d;
        empty_mask.mask = BinaryMask(g);
        CHECK_THROWS_AS(draw_samples(empty_mask, 10, 1), std::invalid_argument);
    }
}

TEST_CASE("derive_seed separates levels and iterations") {
    CHECK(derive_seed(1, 0, 0) == derive_seed(1, 0, 0));
    CHECK(derive_seed(1, 0, 1) != derive_seed(1, 0, 0));
    CHECK(derive_seed(1, 1, 0) != derive_seed(1, 0, 1));
    CHECK(derive_seed(2, 0, 0) != derive_seed(1, 0, 0));
}
