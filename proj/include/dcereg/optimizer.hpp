#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcereg/bspline_transform.hpp"
#include "dcereg/volume.hpp"

namespace dcereg {

/// Decaying gain gamma(t) = a / (t + A)^alpha.
struct GainSchedule {
    double a = 400.0;
    double offset = 50.0;  ///< A
    double alpha = 0.602;

    double operator()(std::size_t t) const;
};

/// Groupwise only. zero_mean keeps the coefficient average over all volumes at
/// zero, so the common space stays at the mean of the series.
enum class DriftConstraint { none, zero_mean };

std::string to_string(DriftConstraint d);
DriftConstraint drift_constraint_from_string(const std::string &s);

struct RegistrationConfig {
    RegistrationMode method = RegistrationMode::groupwise;
    int resolutions = 4;
    int iterations_per_resolution = 500;
    std::size_t samples_per_iteration = 2048;
    double final_grid_spacing_mm = 16.0;
    std::uint64_t seed = 0;
    /// Gain numerator at the final grid spacing; scaled by spacing/final per level.
    double gain_a = 400.0;
    double gain_offset = 50.0;
    double gain_alpha = 0.602;
    std::size_t histogram_bins = 32;
    std::optional<std::string> body_mask;
    DriftConstraint drift_constraint = DriftConstraint::zero_mean;

    /// Default settings for the given method (4 resolutions groupwise, 3 pairwise).
    static RegistrationConfig defaults(RegistrationMode method);
    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

/// Grid spacing used at resolution `level` (0 = coarsest): final * 2^(L-1-level).
double grid_spacing_for_level(const RegistrationConfig &config, int level);

struct TraceEntry {
    int resolution = 0;
    int iteration = 0;
    double metric = 0.0;
    double step = 0.0;
    double grad_norm = 0.0;
    std::size_t valid_samples = 0;
    bool skipped = false;
    Vec3 mean_displacement;         ///< mean coefficient vector over all transforms
    std::vector<double> spectrum;   ///< groupwise eigenvalues
};

struct OptimizationTrace {
    std::vector<TraceEntry> entries;
    std::size_t skipped_iterations = 0;
};

/// Thrown when a resolution level sees too many undefined metric evaluations.
class RegistrationAborted : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// params <- params - gamma(t) * gradient. Returns the gain used, or nullopt
/// (and leaves params untouched) when the gradient has non-finite entries.
std::optional<double> sgd_step(std::span<double> params, std::span<const double> gradient, std::size_t t,
                               const GainSchedule &gains);

/// Removes the across-volume mean from each parameter of a groupwise gradient.
void subtract_mean_gradient(std::vector<std::vector<double>> &gradient);

struct RegistrationResult {
    TransformStack stack;
    OptimizationTrace trace;
};

/// Multi-resolution stochastic gradient descent on D_PCA (groupwise, all V
/// transforms jointly) or -MI (pairwise, each volume against volume 0).
RegistrationResult run_registration(const ImageSeries &series, const RegistrationConfig &config,
                                    const BinaryMask *body_mask = nullptr);

/// Volume v resampled into the registered space: out(x) = I_v(T_v(x)), cubic.
Volume3D resample_volume(const Volume3D &volume, const TransformStack &stack, std::size_t v);
ImageSeries resample_series(const ImageSeries &series, const TransformStack &stack);

}  // namespace dcereg
