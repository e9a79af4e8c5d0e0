#pragma once

#include <span>
#include <vector>

#include "dcereg/bspline_transform.hpp"
#include "dcereg/interpolation.hpp"
#include "dcereg/pca_metric.hpp"

namespace dcereg {

struct IntensityWindow {
    double min = 0.0;
    double max = 1.0;
};

/// Window spanning the given lower/upper percentiles (0..100) of the voxel values.
IntensityWindow percentile_window(const Volume3D &v, double lower_pct = 0.5, double upper_pct = 99.5);

/// Parzen-smoothed joint distribution; joint is indexed [fixed_bin * bins + moving_bin].
struct JointHistogram {
    std::size_t bins = 0;
    std::vector<double> joint;
    std::vector<double> fixed_marginal;
    std::vector<double> moving_marginal;
    IntensityWindow fixed_window;
    IntensityWindow moving_window;

    double at(std::size_t f, std::size_t m) const { return joint[f * bins + m]; }
};

/// Continuous bin coordinates: fixed axis spans [0, B-1] with a zero-order
/// kernel, moving axis spans [2, B-3] so the cubic kernel stays inside.
double fixed_bin_coordinate(double value, const IntensityWindow &w, std::size_t bins);
double moving_bin_coordinate(double value, const IntensityWindow &w, std::size_t bins);

/// Throws std::invalid_argument for bins < 8 and MetricUndefined for fewer than `bins` samples.
JointHistogram joint_histogram(std::span<const double> fixed, std::span<const double> moving, std::size_t bins,
                               const IntensityWindow &fixed_window, const IntensityWindow &moving_window);

/// sum p(f,m) log(p(f,m) / (p(f) p(m))), natural log, empty cells skipped.
double mutual_information(const JointHistogram &h);

/// Samples for one pairwise evaluation: only pairs valid in both images.
struct PairSamples {
    std::vector<double> fixed;
    std::vector<double> moving;
    std::vector<Vec3> moving_gradients;  ///< per mm, at the mapped point
    std::vector<Vec3> points;            ///< reference-space points
};

/// Samples fixed at p and moving at t.apply(p); drops pairs outside either support.
PairSamples sample_pair(const BsplineCoefficientVolume &fixed, const BsplineCoefficientVolume &moving,
                        const BsplineTransform &t, std::span<const Vec3> points, bool with_gradients);

/// Exact gradient of -MI with respect to the coefficients of `t`.
std::vector<double> mi_gradient(const PairSamples &samples, const JointHistogram &h, const BsplineTransform &t);

struct PairwiseMetricSettings {
    std::size_t bins = 32;
    IntensityWindow fixed_window;
    IntensityWindow moving_window;
};

/// -MI and its gradient; gradient has a single entry (the moving transform).
MetricValue evaluate_pairwise(const BsplineCoefficientVolume &fixed, const BsplineCoefficientVolume &moving,
                              const BsplineTransform &t, std::span<const Vec3> points,
                              const PairwiseMetricSettings &settings, bool with_gradient = true);

}  // namespace dcereg
