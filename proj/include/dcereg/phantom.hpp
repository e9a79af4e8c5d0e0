#pragma once

#include <cstdint>
#include <vector>

#include "dcereg/bspline_transform.hpp"
#include "dcereg/volume.hpp"

namespace dcereg {

/// Peak-normalised gamma-variate enhancement of one tissue class.
struct EnhancementParams {
    double baseline = 0.0;
    double amplitude = 0.0;
    double onset = 1.0;  ///< volume index where uptake starts (>= 1: volume 0 is pre-contrast)
    double tau = 4.0;    ///< time from onset to peak, in volume indices
    double shape = 2.0;  ///< gamma-variate exponent k
};

/// baseline before onset, baseline + amplitude * s^k * exp(k (1 - s)) after, s = (t - onset) / tau.
double enhancement_curve(const EnhancementParams &p, double t);

struct Ellipsoid {
    Vec3 center;
    Vec3 semi_axes;
};

struct PhantomSpec {
    Geometry geometry{{64, 64, 32}, {3.0, 3.0, 4.0}, {0.0, 0.0, 0.0}};
    int volumes = 16;
    /// Breath-hold group sizes; must sum to `volumes`. Group 0 is the reference hold.
    std::vector<int> breath_hold_groups{1, 5, 5, 4, 1};
    /// Explicit rigid shift per group (mm). Empty: drawn from the seed, |shift| <= max_shift_mm.
    std::vector<Vec3> group_shifts_mm;
    double max_shift_mm = 6.0;
    /// Smooth per-group perturbation amplitude and extra per-volume jitter (mm, uniform per coefficient).
    double perturbation_mm = 0.35;
    double volume_jitter_mm = 0.15;
    double perturbation_grid_mm = 32.0;

    /// Body outline: elliptic cylinder along z (semi_axes.z ignored).
    Ellipsoid body{{94.5, 94.5, 62.0}, {84.0, 66.0, 0.0}};
    Ellipsoid organ{{80.0, 90.0, 62.0}, {50.0, 40.0, 36.0}};
    /// Close to the organ's upper surface.
    Vec3 lesion_center{92.0, 96.0, 78.0};
    double lesion_radius_mm = 12.0;
    /// Vessel: cylinder along z.
    Vec3 vessel_center{128.0, 112.0, 0.0};
    double vessel_radius_mm = 9.0;
    double edge_width_mm = 1.5;

    EnhancementParams background{0.0, 0.0, 1.0, 4.0, 2.0};
    // Pre-contrast the lesion matches the organ and the vessel matches the body.
    EnhancementParams body_tissue{85.0, 15.0, 1.0, 20.0, 2.0};
    EnhancementParams organ_tissue{100.0, 80.0, 1.0, 20.0, 2.0};
    EnhancementParams lesion_tissue{100.0, 180.0, 1.0, 20.0, 2.0};
    EnhancementParams vessel_tissue{85.0, 300.0, 1.0, 3.0, 2.0};

    double noise_sd = 2.0;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

struct PhantomTruth {
    /// Per volume: anatomy displacement m_t seen from the volume grid; the
    /// volume shows the anatomy at p - m_t(p). Volume 0 is the identity.
    std::vector<BsplineTransform> motion;
    std::vector<int> group_of_volume;
    std::vector<Vec3> group_shifts_mm;
    std::vector<BinaryMask> lesion_masks;
    std::vector<BinaryMask> organ_masks;
    std::vector<Volume3D> clean;

    /// Anatomy (reference-frame) point shown at position q of volume v.
    Vec3 anatomy_point(std::size_t v, const Vec3 &q) const { return q - motion[v].displacement(q); }
};

struct Phantom {
    ImageSeries series;
    PhantomTruth truth;
};

Phantom generate_phantom(const PhantomSpec &spec);

/// Mean over common-space lesion voxels and volumes 1..V-1 of
/// |anatomy_v(T_v c) - anatomy_0(T_0 c)|, measured in voxel units.
double residual_alignment_error(const PhantomTruth &truth, const TransformStack &stack,
                                const BinaryMask &lesion_in_registered_space);

}  // namespace dcereg
