#include <doctest.h>

#include <random>

#include "dcereg/interpolation.hpp"
#include "test_support.hpp"

using namespace dcereg;
using dcereg::testing::random_volume;

TEST_CASE("prefilter reproduces samples") {
    SUBCASE("constant volume has constant coefficients") {
        Geometry g{{9, 7, 6}, {1, 1, 1}, {}};
        const BsplineCoefficientVolume c(Volume3D(g, 4.5));
        for (double x : c.coefficients()) CHECK(x == doctest::Approx(4.5).epsilon(1e-12));
    }
    SUBCASE("linear ramp") {
        Geometry g{{12, 6, 5}, {1, 1, 1}, {}};
        Volume3D v(g);
        for (int k = 0; k < 5; ++k)
            for (int j = 0; j < 6; ++j)
                for (int i = 0; i < 12; ++i) v.at(i, j, k) = 3.0 * i - 2.0;
        const BsplineCoefficientVolume c(v);
        for (int k = 0; k < 5; ++k)
            for (int j = 0; j < 6; ++j)
                for (int i = 0; i < 12; ++i)
                    CHECK(std::abs(interpolate_value(c, {double(i), double(j), double(k)}) - v.at(i, j, k)) < 1e-8);
    }
    SUBCASE("random 16^3 volume") {
        Geometry g{{16, 16, 16}, {1.0, 1.5, 2.0}, {3, 4, 5}};
        const Volume3D v = random_volume(g, 1);
        const BsplineCoefficientVolume c(v);
        double worst = 0.0;
        for (int k = 0; k < 16; ++k)
            for (int j = 0; j < 16; ++j)
                for (int i = 0; i < 16; ++i)
                    worst = std::max(worst,
                                     std::abs(interpolate_value(c, {double(i), double(j), double(k)}) - v.at(i, j, k)));
        CHECK(worst < 1e-8);
    }
    SUBCASE("axes shorter than 4 voxels are rejected") {
        CHECK_THROWS_AS(BsplineCoefficientVolume(Volume3D(Geometry{{8, 3, 8}, {1, 1, 1}, {}})), std::invalid_argument);
    }
}

TEST_CASE("interpolate value and gradient") {
    SUBCASE("constant field") {
        Geometry g{{8, 8, 8}, {1, 1, 1}, {}};
        const BsplineCoefficientVolume c(Volume3D(g, -3.0));
        const auto s = interpolate(c, {3.3, 4.7, 2.1});
        CHECK(s.valid);
        CHECK(s.value == doctest::Approx(-3.0));
        CHECK(norm(s.gradient) < 1e-10);
    }
    SUBCASE("ramp 2x has gradient 2 per mm") {
        // mirror boundaries bend the ramp near the ends; the error decays by 0.27 per voxel
        Geometry g{{64, 8, 8}, {1, 1, 1}, {}};
        Volume3D v(g);
        for (int k = 0; k < 8; ++k)
            for (int j = 0; j < 8; ++j)
                for (int i = 0; i < 64; ++i) v.at(i, j, k) = 2.0 * i;
        const BsplineCoefficientVolume c(v);
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int n = 0; n < 50; ++n) {
            const Vec3 p{24 + 16 * u(rng), 7 * u(rng), 7 * u(rng)};
            const auto s = interpolate(c, p);
            CHECK(std::abs(s.value - 2.0 * p.x) < 1e-8);
            CHECK(std::abs(s.gradient.x - 2.0) < 1e-8);
            CHECK(std::abs(s.gradient.y) < 1e-8);
        }
    }
    SUBCASE("gradient is per mm") {
        Geometry g{{64, 8, 8}, {2.5, 1, 1}, {}};
        Volume3D v(g);
        for (int k = 0; k < 8; ++k)
            for (int j = 0; j < 8; ++j)
                for (int i = 0; i < 64; ++i) v.at(i, j, k) = 2.0 * i;
        const auto s = interpolate(BsplineCoefficientVolume(v), {32.2, 3.0, 3.0});
        CHECK(std::abs(s.gradient.x - 2.0 / 2.5) < 1e-8);
    }
    SUBCASE("analytic gradient matches central differences") {
        Geometry g{{14, 12, 10}, {1.2, 0.8, 2.0}, {}};
        const BsplineCoefficientVolume c(random_volume(g, 3));
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double h = 1e-4;
        double worst = 0.0;
        for (int n = 0; n < 100; ++n) {
            const Vec3 p{1 + 11 * u(rng), 1 + 9 * u(rng), 1 + 7 * u(rng)};
            const Vec3 w = g.voxel_to_world(p);
            const auto s = interpolate_world(c, w);
            for (int a = 0; a < 3; ++a) {
                Vec3 e;
                e[a] = h;
                const double fd =
                    (interpolate_world(c, w + e).value - interpolate_world(c, w - e).value) / (2.0 * h);
                const double rel = std::abs(s.gradient[a] - fd) / std::max(1.0, std::abs(fd));
                worst = std::max(worst, rel);
            }
        }
        CHECK(worst < 1e-5);
    }
    SUBCASE("validity flag") {
        Geometry g{{8, 8, 8}, {1, 1, 1}, {}};
        const BsplineCoefficientVolume c(random_volume(g, 5));
        CHECK(interpolate(c, {0.0, 0.0, 0.0}).valid);
        CHECK(interpolate(c, {7.0, 7.0, 7.0}).valid);
        CHECK_FALSE(interpolate(c, {-0.01, 3.0, 3.0}).valid);
        CHECK_FALSE(interpolate(c, {3.0, 7.01, 3.0}).valid);
        bool valid = true;
        interpolate_value(c, {3.0, 3.0, 9.0}, &valid);
        CHECK_FALSE(valid);
    }
}

TEST_CASE("gaussian smoothing") {
    Geometry g{{24, 24, 24}, {1, 1, 1}, {}};
    SUBCASE("constants are preserved") {
        const Volume3D s = gaussian_smooth(Volume3D(g, 9.0), {2.0, 1.0, 0.5});
        for (double x : s.voxels()) CHECK(x == doctest::Approx(9.0).epsilon(1e-12));
    }
    SUBCASE("sigma 0 is a no-op") {
        const Volume3D v = random_volume(g, 6);
        const Volume3D s = gaussian_smooth(v, {0, 0, 0});
        for (std::size_t n = 0; n < v.size(); ++n) CHECK(s[n] == v[n]);
    }
    SUBCASE("interior mean preserved to 1% for sigma up to 4") {
        const Volume3D v = random_volume(g, 7, 50.0, 150.0);
        for (double sigma : {1.0, 2.0, 4.0}) {
            const Volume3D s = gaussian_smooth(v, {sigma, sigma, sigma});
            double a = 0.0, b = 0.0;
            for (int k = 6; k < 18; ++k)
                for (int j = 6; j < 18; ++j)
                    for (int i = 6; i < 18; ++i) {
                        a += v.at(i, j, k);
                        b += s.at(i, j, k);
                    }
            CHECK(std::abs(a - b) / a < 0.01);
        }
    }
}

TEST_CASE("build_pyramid") {
    SUBCASE("one level is the input") {
        Geometry g{{10, 10, 10}, {1, 1, 1}, {}};
        const Volume3D v = random_volume(g, 8);
        const auto p = build_pyramid(v, 1);
        REQUIRE(p.size() == 1);
        CHECK(p[0].image.geometry() == g);
        for (std::size_t n = 0; n < v.size(); ++n) CHECK(p[0].image[n] == v[n]);
    }
    SUBCASE("halving schedule") {
        Geometry g{{64, 64, 64}, {1, 1, 1}, {}};
        const auto p = build_pyramid(Volume3D(g, 1.0), 3);
        REQUIRE(p.size() == 3);
        CHECK(p[0].image.dims() == Index3{16, 16, 16});
        CHECK(p[1].image.dims() == Index3{32, 32, 32});
        CHECK(p[2].image.dims() == Index3{64, 64, 64});
        CHECK(p[0].factor == Index3{4, 4, 4});
    }
    SUBCASE("no axis drops below 8 voxels") {
        Geometry g{{64, 64, 16}, {1, 1, 1}, {}};
        const auto p = build_pyramid(Volume3D(g, 1.0), 4);
        CHECK(p[0].image.dims() == Index3{8, 8, 8});
        CHECK(p[0].factor == Index3{8, 8, 2});
    }
    SUBCASE("levels cover the same physical region") {
        Geometry g{{32, 32, 16}, {3, 3, 4}, {10, 20, 30}};
        const auto p = build_pyramid(Volume3D(g, 1.0), 3);
        for (const auto &l : p) {
            const Geometry &h = l.image.geometry();
            const Vec3 lo_full = g.origin - g.spacing * 0.5;
            const Vec3 lo_level = h.origin - h.spacing * 0.5;
            CHECK(norm(lo_full - lo_level) < 1e-9);
        }
    }
    SUBCASE("constant stays constant at every level") {
        Geometry g{{32, 32, 32}, {1, 1, 1}, {}};
        for (const auto &l : build_pyramid(Volume3D(g, 42.0), 4))
            for (double x : l.image.voxels()) CHECK(std::abs(x - 42.0) < 1e-10);
    }
}
