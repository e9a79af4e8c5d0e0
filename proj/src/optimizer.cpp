#include "dcereg/optimizer.hpp"

#include <cmath>
#include <string>

#include "dcereg/interpolation.hpp"
#include "dcereg/mi_metric.hpp"
#include "dcereg/pca_metric.hpp"
#include "dcereg/sampling.hpp"

namespace dcereg {

double GainSchedule::operator()(std::size_t t) const {
    return a / std::pow(static_cast<double>(t) + offset, alpha);
}

std::string to_string(DriftConstraint d) { return d == DriftConstraint::none ? "none" : "zero_mean"; }

DriftConstraint drift_constraint_from_string(const std::string &s) {
    if (s == "none") return DriftConstraint::none;
    if (s == "zero_mean") return DriftConstraint::zero_mean;
    throw std::invalid_argument("unknown drift constraint '" + s + "' (expected none or zero_mean)");
}

void subtract_mean_gradient(std::vector<std::vector<double>> &gradient) {
    if (gradient.empty()) return;
    const std::size_t n = gradient.front().size();
    for (const auto &g : gradient) {
        if (g.size() != n) throw std::invalid_argument("subtract_mean_gradient: ragged gradient");
    }
    const double inv = 1.0 / static_cast<double>(gradient.size());
    for (std::size_t p = 0; p < n; ++p) {
        double mean = 0.0;
        for (const auto &g : gradient) mean += g[p];
        mean *= inv;
        for (auto &g : gradient) g[p] -= mean;
    }
}

RegistrationConfig RegistrationConfig::defaults(RegistrationMode method) {
    RegistrationConfig c;
    c.method = method;
    c.resolutions = method == RegistrationMode::groupwise ? 4 : 3;
    return c;
}

void RegistrationConfig::validate() const {
    if (resolutions < 1 || resolutions > 8) throw std::invalid_argument("resolutions must be in [1, 8]");
    if (iterations_per_resolution < 1) throw std::invalid_argument("iterations_per_resolution must be >= 1");
    if (samples_per_iteration < 2) throw std::invalid_argument("samples_per_iteration must be >= 2");
    if (!(final_grid_spacing_mm > 0.0)) throw std::invalid_argument("final_grid_spacing_mm must be positive");
    if (!(gain_a > 0.0) || !(gain_offset >= 0.0) || !(gain_alpha > 0.0)) {
        throw std::invalid_argument("gain parameters must be positive");
    }
    if (histogram_bins < 8) throw std::invalid_argument("histogram_bins must be >= 8");
}

double grid_spacing_for_level(const RegistrationConfig &config, int level) {
    return config.final_grid_spacing_mm * std::ldexp(1.0, config.resolutions - 1 - level);
}

std::optional<double> sgd_step(std::span<double> params, std::span<const double> gradient, std::size_t t,
                               const GainSchedule &gains) {
    if (params.size() != gradient.size()) {
        throw std::invalid_argument("sgd_step: parameter and gradient sizes differ");
    }
    for (double g : gradient) {
        if (!std::isfinite(g)) return std::nullopt;
    }
    const double gamma = gains(t);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= gamma * gradient[i];
    return gamma;
}

namespace {

struct LevelData {
    std::vector<Volume3D> images;                        // one per series volume
    std::vector<BsplineCoefficientVolume> coefficients;
    Geometry geometry;
};

std::vector<LevelData> build_levels(const ImageSeries &series, int resolutions) {
    std::vector<LevelData> levels(static_cast<std::size_t>(resolutions));
    for (const Volume3D &v : series) {
        const auto pyramid = build_pyramid(v, resolutions);
        for (int k = 0; k < resolutions; ++k) {
            levels[k].geometry = pyramid[k].image.geometry();
            levels[k].coefficients.emplace_back(pyramid[k].image);
            levels[k].images.push_back(pyramid[k].image);
        }
    }
    return levels;
}

Vec3 mean_coefficient(const TransformStack &stack) {
    Vec3 sum;
    std::size_t n = 0;
    for (const auto &t : stack.transforms) {
        for (std::size_t cp = 0; cp < t.control_point_count(); ++cp) sum += t.coefficient(cp);
        n += t.control_point_count();
    }
    return n ? sum * (1.0 / static_cast<double>(n)) : sum;
}

double gradient_norm(const StackGradient &g) {
    double s = 0.0;
    for (const auto &v : g)
        for (double x : v) s += x * x;
    return std::sqrt(s);
}

SamplingDomain level_domain(const Geometry &level_geometry, const BinaryMask *body_mask) {
    SamplingDomain d = SamplingDomain::eroded(level_geometry, 1.0);
    if (body_mask) d.mask = *body_mask;
    return d;
}

void check_abort(std::size_t undefined, const RegistrationConfig &config, int level) {
    if (static_cast<double>(undefined) > 0.1 * config.iterations_per_resolution) {
        throw RegistrationAborted("resolution " + std::to_string(level) + ": metric undefined in " +
                                  std::to_string(undefined) + " of " +
                                  std::to_string(config.iterations_per_resolution) + " iterations");
    }
}

}  // namespace

RegistrationResult run_registration(const ImageSeries &series, const RegistrationConfig &config,
                                    const BinaryMask *body_mask) {
    config.validate();
    if (body_mask && !co_located(body_mask->geometry(), series.geometry())) {
        throw std::invalid_argument("body mask geometry does not match the series");
    }
    const std::size_t V = series.count();
    const bool groupwise = config.method == RegistrationMode::groupwise;
    const auto levels = build_levels(series, config.resolutions);

    RegistrationResult result;
    const double first_spacing = grid_spacing_for_level(config, 0);
    result.stack = TransformStack::identity(config.method, series.geometry(), V,
                                            {first_spacing, first_spacing, first_spacing});
    result.trace.entries.reserve(static_cast<std::size_t>(config.resolutions) * config.iterations_per_resolution);

    for (int level = 0; level < config.resolutions; ++level) {
        const double spacing = grid_spacing_for_level(config, level);
        if (level > 0) {
            for (auto &t : result.stack.transforms) t = refine_grid(t, {spacing, spacing, spacing});
        }
        const LevelData &data = levels[static_cast<std::size_t>(level)];
        const SamplingDomain domain = level_domain(data.geometry, body_mask);
        const GainSchedule gains{config.gain_a * spacing / config.final_grid_spacing_mm, config.gain_offset,
                                 config.gain_alpha};

        std::vector<PairwiseMetricSettings> pair_settings;
        if (!groupwise) {
            // Windows come from the current resolution's images.
            const IntensityWindow fixed_window = percentile_window(data.images[0]);
            for (std::size_t v = 1; v < V; ++v) {
                pair_settings.push_back({config.histogram_bins, fixed_window, percentile_window(data.images[v])});
            }
        }

        std::size_t undefined = 0;
        for (int it = 0; it < config.iterations_per_resolution; ++it) {
            TraceEntry entry;
            entry.resolution = level;
            entry.iteration = it;
            try {
                if (groupwise) {
                    const auto points = draw_samples(domain, config.samples_per_iteration,
                                                     derive_seed(config.seed, level, it));
                    MetricValue mv = evaluate_groupwise(data.coefficients, result.stack, points);
                    entry.metric = mv.value;
                    entry.valid_samples = mv.valid_samples;
                    entry.grad_norm = gradient_norm(mv.gradient);
                    entry.spectrum = std::move(mv.spectrum);
                    bool finite = true;
                    for (const auto &g : mv.gradient)
                        for (double x : g) finite = finite && std::isfinite(x);
                    if (finite) {
                        if (config.drift_constraint == DriftConstraint::zero_mean) subtract_mean_gradient(mv.gradient);
                        for (std::size_t t = 0; t < V; ++t) {
                            sgd_step(result.stack.transforms[t].parameters(), mv.gradient[t],
                                     static_cast<std::size_t>(it), gains);
                        }
                        entry.step = gains(static_cast<std::size_t>(it));
                    } else {
                        entry.skipped = true;
                    }
                } else {
                    double metric_sum = 0.0;
                    double sq = 0.0;
                    for (std::size_t v = 1; v < V; ++v) {
                        const auto points = draw_samples(
                            domain, config.samples_per_iteration,
                            derive_seed(config.seed ^ (0x51ed27ULL * v), level, it));
                        auto &tf = result.stack.transforms[v - 1];
                        MetricValue mv = evaluate_pairwise(data.coefficients[0], data.coefficients[v], tf, points,
                                                           pair_settings[v - 1]);
                        metric_sum += mv.value;
                        entry.valid_samples += mv.valid_samples;
                        for (double x : mv.gradient[0]) sq += x * x;
                        if (sgd_step(tf.parameters(), mv.gradient[0], static_cast<std::size_t>(it), gains)) {
                            entry.step = gains(static_cast<std::size_t>(it));
                        } else {
                            entry.skipped = true;
                        }
                    }
                    entry.metric = metric_sum / static_cast<double>(V - 1);
                    entry.grad_norm = std::sqrt(sq);
                }
            } catch (const MetricUndefined &) {
                entry.skipped = true;
                ++undefined;
            }
            if (entry.skipped) ++result.trace.skipped_iterations;
            entry.mean_displacement = mean_coefficient(result.stack);
            result.trace.entries.push_back(std::move(entry));
        }
        check_abort(undefined, config, level);
    }
    return result;
}

Volume3D resample_volume(const Volume3D &volume, const TransformStack &stack, std::size_t v) {
    const BsplineTransform *t = stack.for_volume(v);
    if (!t) return volume;
    const BsplineCoefficientVolume coeffs(volume);
    const Geometry &g = volume.geometry();
    Volume3D out(g);
    for (int k = 0; k < g.dims.z; ++k) {
        for (int j = 0; j < g.dims.y; ++j) {
            for (int i = 0; i < g.dims.x; ++i) {
                const Vec3 q = t->apply(g.voxel_center(i, j, k));
                out.at(i, j, k) = interpolate_value(coeffs, g.world_to_voxel(q));
            }
        }
    }
    return out;
}

ImageSeries resample_series(const ImageSeries &series, const TransformStack &stack) {
    std::vector<Volume3D> out;
    out.reserve(series.count());
    for (std::size_t v = 0; v < series.count(); ++v) out.push_back(resample_volume(series[v], stack, v));
    return ImageSeries(std::move(out));
}

}  // namespace dcereg
