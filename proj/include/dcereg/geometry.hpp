#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace dcereg {

/// Small fixed 3-vector used for physical points, spacings and displacements (mm).
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double &operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3 &operator+=(const Vec3 &o) {
        x += o.x; y += o.y; z += o.z;
        return *this;
    }
    constexpr Vec3 &operator-=(const Vec3 &o) {
        x -= o.x; y -= o.y; z -= o.z;
        return *this;
    }
    constexpr Vec3 &operator*=(double s) {
        x *= s; y *= s; z *= s;
        return *this;
    }
    friend constexpr Vec3 operator+(Vec3 a, const Vec3 &b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3 &b) { return a -= b; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator-(const Vec3 &a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr bool operator==(const Vec3 &, const Vec3 &) = default;
};

inline double norm(const Vec3 &v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }
constexpr double dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
/// Componentwise product / quotient.
constexpr Vec3 hadamard(const Vec3 &a, const Vec3 &b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
constexpr Vec3 divide(const Vec3 &a, const Vec3 &b) { return {a.x / b.x, a.y / b.y, a.z / b.z}; }

struct Index3 {
    int x = 0;
    int y = 0;
    int z = 0;

    constexpr int &operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr int operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    friend constexpr bool operator==(const Index3 &, const Index3 &) = default;
};

/// Row-major 3x3 matrix; used for spatial Jacobians.
using Mat3 = std::array<std::array<double, 3>, 3>;

inline double determinant(const Mat3 &m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

/// Lattice geometry shared by volumes and masks. Voxels are x-fastest.
struct Geometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims.x) * static_cast<std::size_t>(dims.y) *
               static_cast<std::size_t>(dims.z);
    }
    std::size_t linear_index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims.y) +
                static_cast<std::size_t>(j)) *
                   static_cast<std::size_t>(dims.x) +
               static_cast<std::size_t>(i);
    }
    Index3 lattice_index(std::size_t linear) const {
        const auto nx = static_cast<std::size_t>(dims.x);
        const auto ny = static_cast<std::size_t>(dims.y);
        return {static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny),
                static_cast<int>(linear / (nx * ny))};
    }
    /// Continuous voxel coordinate of a physical point; out-of-bounds results are legal.
    Vec3 world_to_voxel(const Vec3 &p) const { return divide(p - origin, spacing); }
    Vec3 voxel_to_world(const Vec3 &c) const { return origin + hadamard(c, spacing); }
    Vec3 voxel_center(int i, int j, int k) const {
        return voxel_to_world({static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)});
    }
    /// Physical extent spanned by voxel centers.
    Vec3 extent() const {
        return {(dims.x - 1) * spacing.x, (dims.y - 1) * spacing.y, (dims.z - 1) * spacing.z};
    }
    bool contains_voxel_coord(const Vec3 &c) const {
        return c.x >= 0.0 && c.y >= 0.0 && c.z >= 0.0 && c.x <= dims.x - 1 && c.y <= dims.y - 1 &&
               c.z <= dims.z - 1;
    }

    /// Throws std::invalid_argument unless dims >= 1 and spacing > 0.
    void validate() const;
    friend bool operator==(const Geometry &, const Geometry &) = default;
};

}  // namespace dcereg
