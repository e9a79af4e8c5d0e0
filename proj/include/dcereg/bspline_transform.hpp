#pragma once

#include <cstddef>
#include <filesystem>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "dcereg/bspline_kernel.hpp"
#include "dcereg/geometry.hpp"

namespace dcereg {

/// Cubic B-spline free-form deformation T(p) = p + sum_k c_k B_k(p), coefficients in mm.
///
/// The control grid starts one spacing before the image origin and extends far
/// enough that every point of the image domain has its full 4x4x4 support.
/// Coefficients are stored interleaved (x, y, z per control point), control
/// points x-fastest; this is also the serialized order.
class BsplineTransform {
  public:
    BsplineTransform() = default;

    /// Identity transform whose grid covers `domain` at `grid_spacing` mm.
    static BsplineTransform for_domain(const Geometry &domain, const Vec3 &grid_spacing);

    /// Fully specified grid; `coefficients` must hold 3 * control-point count values.
    BsplineTransform(const Geometry &domain, const Index3 &grid_dims, const Vec3 &grid_spacing,
                     const Vec3 &grid_origin, std::vector<double> coefficients);

    const Geometry &domain() const { return domain_; }
    const Index3 &grid_dims() const { return grid_dims_; }
    const Vec3 &grid_spacing() const { return grid_spacing_; }
    const Vec3 &grid_origin() const { return grid_origin_; }
    std::size_t control_point_count() const {
        return static_cast<std::size_t>(grid_dims_.x) * grid_dims_.y * grid_dims_.z;
    }
    std::size_t parameter_count() const { return coefficients_.size(); }
    std::span<const double> parameters() const { return coefficients_; }
    std::span<double> parameters() { return coefficients_; }
    std::size_t control_point_index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * grid_dims_.y + j) * grid_dims_.x + i;
    }
    Vec3 coefficient(std::size_t cp) const {
        return {coefficients_[3 * cp], coefficients_[3 * cp + 1], coefficients_[3 * cp + 2]};
    }
    void set_coefficient(std::size_t cp, const Vec3 &d);
    /// Physical position of a control point.
    Vec3 control_point_position(int i, int j, int k) const;
    /// Continuous grid coordinate of a physical point.
    Vec3 grid_coordinate(const Vec3 &p) const { return divide(p - grid_origin_, grid_spacing_); }

    bool is_identity() const;

    Vec3 displacement(const Vec3 &p) const;
    Vec3 apply(const Vec3 &p) const { return p + displacement(p); }
    /// d T / d p, analytic from the derivative kernels.
    Mat3 spatial_jacobian(const Vec3 &p) const;
    double jacobian_determinant(const Vec3 &p) const { return determinant(spatial_jacobian(p)); }

    /// Tensor-product taps of the control points influencing p.
    struct Stencil {
        std::array<CubicTaps, 3> axis;
    };
    Stencil stencil(const Vec3 &p) const {
        const Vec3 u = grid_coordinate(p);
        return {{cubic_taps(u.x), cubic_taps(u.y), cubic_taps(u.z)}};
    }

    /// Calls fn(control_point_index, weight) for every existing control point
    /// whose support contains p. Weights sum to one when the full support exists.
    template <class Fn>
    void for_each_support(const Vec3 &p, Fn &&fn) const {
        const Stencil s = stencil(p);
        for (int c = 0; c < 4; ++c) {
            const int k = s.axis[2].first + c;
            if (k < 0 || k >= grid_dims_.z) continue;
            for (int b = 0; b < 4; ++b) {
                const int j = s.axis[1].first + b;
                if (j < 0 || j >= grid_dims_.y) continue;
                const double wzy = s.axis[2].w[c] * s.axis[1].w[b];
                for (int a = 0; a < 4; ++a) {
                    const int i = s.axis[0].first + a;
                    if (i < 0 || i >= grid_dims_.x) continue;
                    fn(control_point_index(i, j, k), wzy * s.axis[0].w[a]);
                }
            }
        }
    }

    struct Inversion {
        Vec3 point;
        double residual = 0.0;
        int iterations = 0;
        bool converged = false;
    };
    /// Solves apply(p) = q by fixed-point iteration p <- p - (apply(p) - q).
    Inversion invert_at(const Vec3 &q, double tol = 0.01, int max_iter = 50) const;

  private:
    Geometry domain_;
    Index3 grid_dims_{0, 0, 0};
    Vec3 grid_spacing_{1.0, 1.0, 1.0};
    Vec3 grid_origin_{};
    std::vector<double> coefficients_;
};

/// Re-expresses `coarse` on a finer grid with `new_spacing`. Ratios that are
/// powers of two per axis use exact dyadic subdivision; other ratios fall back
/// to interpolating the coarse field at the fine control points.
BsplineTransform refine_grid(const BsplineTransform &coarse, const Vec3 &new_spacing);

enum class RegistrationMode { groupwise, pairwise };

std::string to_string(RegistrationMode mode);
RegistrationMode registration_mode_from_string(const std::string &s);

/// One transform per volume (groupwise) or per non-reference volume (pairwise).
struct TransformStack {
    RegistrationMode mode = RegistrationMode::groupwise;
    std::vector<BsplineTransform> transforms;

    /// Number of series volumes this stack describes.
    std::size_t volume_count() const {
        return mode == RegistrationMode::groupwise ? transforms.size() : transforms.size() + 1;
    }
    /// Transform mapping the registered space into the space of volume v;
    /// nullptr is the identity (the pairwise reference).
    const BsplineTransform *for_volume(std::size_t v) const;
    /// apply() of for_volume(v), identity when absent.
    Vec3 map_to_volume(std::size_t v, const Vec3 &p) const;

    /// Stack of identity transforms for a V-volume series.
    static TransformStack identity(RegistrationMode mode, const Geometry &domain, std::size_t volumes,
                                   const Vec3 &grid_spacing);
};

/// Text header followed by a raw little-endian float64 coefficient block.
void write_transform(const BsplineTransform &t, RegistrationMode mode, std::size_t volume_index,
                     const std::filesystem::path &path);

struct LoadedTransform {
    BsplineTransform transform;
    RegistrationMode mode = RegistrationMode::groupwise;
    std::size_t volume_index = 0;
};
LoadedTransform read_transform(const std::filesystem::path &path);

}  // namespace dcereg
