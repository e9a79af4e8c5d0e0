#include <doctest.h>

#include <random>

#include "dcereg/volume.hpp"
#include "test_support.hpp"

using namespace dcereg;
using dcereg::testing::random_volume;

TEST_CASE("world_to_voxel is the inverse of voxel_to_world") {
    Geometry g{{8, 8, 8}, {2.0, 2.0, 2.0}, {0.0, 0.0, 0.0}};
    const Vec3 c = g.world_to_voxel({4.0, 4.0, 4.0});
    CHECK(c == Vec3{2.0, 2.0, 2.0});
    CHECK(g.world_to_voxel(g.origin) == Vec3{0.0, 0.0, 0.0});

    Geometry h{{10, 12, 7}, {1.5, 0.7, 3.1}, {-12.0, 4.5, 100.25}};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-200.0, 200.0);
    for (int n = 0; n < 100; ++n) {
        const Vec3 p{u(rng), u(rng), u(rng)};
        const Vec3 back = h.voxel_to_world(h.world_to_voxel(p));
        CHECK(norm(back - p) < 1e-12);
    }
}

TEST_CASE("geometry validation and construction invariants") {
    CHECK_THROWS(Geometry{{0, 4, 4}, {1, 1, 1}, {}}.validate());
    CHECK_THROWS(Geometry{{4, 4, 4}, {1, 0, 1}, {}}.validate());
    Geometry g{{3, 4, 5}, {1, 1, 1}, {}};
    CHECK(Volume3D(g).size() == 60);
    CHECK_THROWS_AS(Volume3D(g, std::vector<double>(59)), std::invalid_argument);
}

TEST_CASE("series rejects mixed geometry and short series") {
    Geometry g{{4, 4, 4}, {1, 1, 1}, {}};
    Geometry h{{4, 4, 4}, {1, 1, 1.5}, {}};
    CHECK_THROWS_AS(ImageSeries({Volume3D(g)}), std::invalid_argument);
    CHECK_THROWS_AS(ImageSeries({Volume3D(g), Volume3D(h)}), std::invalid_argument);
    CHECK_NOTHROW(ImageSeries({Volume3D(g), Volume3D(g)}));
}

TEST_CASE("subtract_baseline") {
    Geometry g{{5, 4, 3}, {1, 1, 1}, {}};
    SUBCASE("identical volumes give zeros") {
        const Volume3D a = random_volume(g, 1);
        const auto out = subtract_baseline(ImageSeries({a, a, a}));
        REQUIRE(out.size() == 2);
        for (const auto &v : out)
            for (double x : v.voxels()) CHECK(x == 0.0);
    }
    SUBCASE("constant offset") {
        const Volume3D a = random_volume(g, 2);
        Volume3D b = a;
        for (double &x : b.voxels()) x += 5.0;
        const auto out = subtract_baseline(ImageSeries({a, b}));
        REQUIRE(out.size() == 1);
        for (double x : out[0].voxels()) CHECK(x == doctest::Approx(5.0).epsilon(1e-14));
    }
    SUBCASE("output plus baseline reconstructs each volume") {
        std::vector<Volume3D> vols;
        for (int v = 0; v < 4; ++v) vols.push_back(random_volume(g, 10 + v, -50, 50));
        const ImageSeries s(vols);
        const auto out = subtract_baseline(s);
        REQUIRE(out.size() == 3);
        for (std::size_t k = 0; k < out.size(); ++k) {
            CHECK(out[k].geometry() == g);
            for (std::size_t n = 0; n < g.voxel_count(); ++n) CHECK(std::abs(out[k][n] + s[0][n] - s[k + 1][n]) < 1e-12);
        }
    }
    SUBCASE("linear in the series") {
        std::vector<Volume3D> vols, scaled;
        const double alpha = 2.5;
        for (int v = 0; v < 3; ++v) {
            vols.push_back(random_volume(g, 20 + v));
            scaled.push_back(vols.back());
            for (double &x : scaled.back().voxels()) x *= alpha;
        }
        const auto a = subtract_baseline(ImageSeries(vols));
        const auto b = subtract_baseline(ImageSeries(scaled));
        for (std::size_t k = 0; k < a.size(); ++k)
            for (std::size_t n = 0; n < g.voxel_count(); ++n) CHECK(b[k][n] == doctest::Approx(alpha * a[k][n]));
    }
}

TEST_CASE("mean_intensity_in_mask") {
    Geometry g{{6, 5, 4}, {1, 1, 1}, {}};
    Volume3D seven(g, 7.0);
    BinaryMask m(g);
    m.set(1, 2, 3, true);
    m.set(4, 0, 1, true);
    CHECK(mean_intensity_in_mask(seven, m) == 7.0);

    Volume3D v(g);
    v.at(1, 2, 3) = 1.0;
    v.at(4, 0, 1) = 3.0;
    CHECK(mean_intensity_in_mask(v, m) == 2.0);

    CHECK_THROWS(mean_intensity_in_mask(v, BinaryMask(g)));
    CHECK_THROWS(mean_intensity_in_mask(v, BinaryMask(Geometry{{6, 5, 3}, {1, 1, 1}, {}}, true)));

    const Volume3D r = random_volume(g, 5);
    std::mt19937_64 rng(6);
    BinaryMask rm(g);
    for (std::size_t n = 0; n < rm.size(); ++n) rm.set(n, rng() % 3 == 0);
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 6; ++i)
                if (rm.at(i, j, k)) {
                    sum += r.at(i, j, k);
                    ++count;
                }
    CHECK(std::abs(mean_intensity_in_mask(r, rm) - sum / count) < 1e-12);
}
