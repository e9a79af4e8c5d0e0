#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcereg/bspline_transform.hpp"
#include "dcereg/volume.hpp"

namespace dcereg {

/// 2|a & b| / (|a| + |b|). Throws when both masks are empty or geometries differ.
double dice(const BinaryMask &a, const BinaryMask &b);

/// V * |S_1 & ... & S_V| / sum |S_n|; equals dice() for two masks.
double groupwise_dice(std::span<const BinaryMask> masks);

/// Mask of volume v pulled into the registered space: out(x) = mask(nearest(T_v x)).
BinaryMask warp_mask_to_registered(const BinaryMask &mask, const TransformStack &stack, std::size_t v);

struct PropagatedMask {
    BinaryMask mask;
    std::size_t inversion_failures = 0;
};

/// Volume-0 mask carried onto the grid of volume `target`: each target voxel p
/// is mapped back with T_target^-1 into the registered space, then forward
/// with T_0 into volume 0, and read by nearest neighbour. Throws
/// std::runtime_error when more than 1% of the result's voxels needed a
/// non-convergent inversion.
PropagatedMask propagate_mask(const BinaryMask &mask0, const TransformStack &stack, std::size_t target,
                              double tol = 0.01, int max_iter = 50);

/// Sample SD of the second differences m[t+1] - 2 m[t] + m[t-1]. Throws for fewer than 3 values.
double temporal_smoothness_sd(std::span<const double> means);

/// Mean lesion intensity per volume in the registered space: the volume-0
/// lesion carried along T_0, read from each volume through T_v (cubic).
std::vector<double> lesion_intensity_curve(const ImageSeries &series, const BinaryMask &lesion0,
                                           const TransformStack &stack);

struct JacobianStats {
    std::vector<double> lesion_mean;   ///< per volume
    std::vector<double> lesion_sd;     ///< per volume
    std::vector<double> liver_sd;      ///< per volume, empty without a liver mask
    std::optional<double> liver_sd_mean;  ///< averaged over volumes 1..V-1
};

/// Jacobian determinant statistics at mask-voxel centres (masks in the registered space).
JacobianStats jacobian_stats(const TransformStack &stack, const BinaryMask &lesion, const BinaryMask *liver);

struct VolumeRow {
    std::size_t volume = 0;
    double dsc = 0.0;
    double mean_lesion_intensity = 0.0;
    double lesion_jacobian_mean = 1.0;
    double lesion_jacobian_sd = 0.0;
    std::optional<double> liver_jacobian_sd;
};

struct EvaluationReport {
    std::string method;
    std::string series_id;
    std::vector<VolumeRow> volumes;
    double mean_pairwise_dsc = 0.0;     ///< over volumes 1..V-1
    double groupwise_dsc = 0.0;
    double temporal_smoothness_sd = 0.0;
    double lesion_jacobian_mean = 1.0;  ///< mean of per-volume means over volumes 1..V-1
    double lesion_jacobian_spread = 0.0;  ///< SD of those per-volume means
    std::optional<double> liver_jacobian_sd_mean;
};

/// Stable identifier of a series (size, geometry and a voxel checksum).
std::string series_identity(const ImageSeries &series);

/// Every comparison statistic for one registered series. `lesion_masks` holds
/// one native-space lesion segmentation per volume; `liver0` is optional.
EvaluationReport evaluate_registration(const std::string &method, const ImageSeries &series,
                                       const TransformStack &stack, std::span<const BinaryMask> lesion_masks,
                                       const BinaryMask *liver0);

struct ComparisonRow {
    std::string statistic;
    std::vector<double> values;   ///< one per report
    std::vector<double> deltas;   ///< value minus the first report's value
    std::size_t winner = 0;       ///< index of the best report
};

struct ComparisonTable {
    std::vector<std::string> methods;
    std::vector<ComparisonRow> rows;
};

/// Side-by-side statistics with per-statistic winners. Throws on fewer than
/// two reports or reports from different series.
ComparisonTable compare_methods(std::span<const EvaluationReport> reports);

std::string report_to_csv(const EvaluationReport &r);
std::string report_to_json(const EvaluationReport &r);
std::string comparison_to_csv(const ComparisonTable &t);

}  // namespace dcereg
