#pragma once

#include <vector>

#include "dcereg/volume.hpp"

namespace dcereg {

/// Cubic B-spline coefficients of a volume (mirror boundary), ready for interpolation.
class BsplineCoefficientVolume {
  public:
    BsplineCoefficientVolume() = default;
    /// Runs the recursive causal/anticausal prefilter along each axis.
    /// Throws std::invalid_argument when any axis has fewer than 4 voxels.
    explicit BsplineCoefficientVolume(const Volume3D &source);

    const Geometry &geometry() const { return geometry_; }
    const std::vector<double> &coefficients() const { return coefficients_; }

  private:
    Geometry geometry_;
    std::vector<double> coefficients_;
};

inline BsplineCoefficientVolume prefilter(const Volume3D &v) { return BsplineCoefficientVolume(v); }

struct InterpolatedSample {
    double value = 0.0;
    Vec3 gradient;  ///< per mm
    bool valid = false;
};

/// Value and analytic gradient at a continuous voxel coordinate. Coordinates
/// outside [0, n-1] on any axis are flagged invalid (value still computed
/// with mirror extension).
InterpolatedSample interpolate(const BsplineCoefficientVolume &c, const Vec3 &voxel_coord);
/// Value only; cheaper.
double interpolate_value(const BsplineCoefficientVolume &c, const Vec3 &voxel_coord, bool *valid = nullptr);

/// Physical-space convenience wrapper around interpolate().
inline InterpolatedSample interpolate_world(const BsplineCoefficientVolume &c, const Vec3 &p) {
    return interpolate(c, c.geometry().world_to_voxel(p));
}

/// Separable Gaussian smoothing with per-axis sigma in voxels (mirror boundary,
/// unit-sum kernels truncated at 3 sigma). Sigma 0 leaves an axis untouched.
Volume3D gaussian_smooth(const Volume3D &v, const Vec3 &sigma_voxels);

/// Trilinear value at a continuous voxel coordinate, clamped to the lattice.
double trilinear(const Volume3D &v, const Vec3 &voxel_coord);

struct PyramidLevel {
    int level = 0;              ///< 0 = coarsest
    Volume3D image;
    Index3 factor{1, 1, 1};     ///< downsampling factor per axis
};

/// Coarse-to-fine pyramid. Level k is smoothed with sigma = 2^(L-1-k)/2 voxels
/// and downsampled by 2^(L-1-k), never below 8 voxels per axis. The last level
/// is the input image unchanged.
std::vector<PyramidLevel> build_pyramid(const Volume3D &v, int levels);

}  // namespace dcereg
