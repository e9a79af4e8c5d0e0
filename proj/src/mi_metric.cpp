#include "dcereg/mi_metric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dcereg/bspline_kernel.hpp"

namespace dcereg {

namespace {

double percentile_sorted(const std::vector<double> &sorted, double pct) {
    const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - f) + sorted[hi] * f;
}

double window_width(const IntensityWindow &w) {
    const double width = w.max - w.min;
    return width > 0.0 ? width : 1.0;
}

}  // namespace

IntensityWindow percentile_window(const Volume3D &v, double lower_pct, double upper_pct) {
    std::vector<double> sorted(v.voxels().begin(), v.voxels().end());
    std::sort(sorted.begin(), sorted.end());
    IntensityWindow w{percentile_sorted(sorted, lower_pct), percentile_sorted(sorted, upper_pct)};
    if (!(w.max > w.min)) w.max = w.min + 1.0;
    return w;
}

double fixed_bin_coordinate(double value, const IntensityWindow &w, std::size_t bins) {
    const double c = std::clamp(value, w.min, w.max);
    return (c - w.min) / window_width(w) * static_cast<double>(bins - 1);
}

double moving_bin_coordinate(double value, const IntensityWindow &w, std::size_t bins) {
    const double c = std::clamp(value, w.min, w.max);
    return 2.0 + (c - w.min) / window_width(w) * static_cast<double>(bins - 5);
}

JointHistogram joint_histogram(std::span<const double> fixed, std::span<const double> moving, std::size_t bins,
                               const IntensityWindow &fixed_window, const IntensityWindow &moving_window) {
    if (bins < 8) {
        throw std::invalid_argument("joint histogram needs at least 8 bins");
    }
    if (fixed.size() != moving.size()) {
        throw std::invalid_argument("fixed and moving sample counts differ");
    }
    if (fixed.size() < bins) {
        throw MetricUndefined("joint histogram needs at least " + std::to_string(bins) + " valid samples, got " +
                              std::to_string(fixed.size()));
    }
    JointHistogram h;
    h.bins = bins;
    h.fixed_window = fixed_window;
    h.moving_window = moving_window;
    h.joint.assign(bins * bins, 0.0);
    const double mass = 1.0 / static_cast<double>(fixed.size());
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        const auto fb = static_cast<std::size_t>(std::lround(fixed_bin_coordinate(fixed[i], fixed_window, bins)));
        const CubicTaps taps = cubic_taps(moving_bin_coordinate(moving[i], moving_window, bins));
        double *row = h.joint.data() + fb * bins;
        for (int a = 0; a < 4; ++a) {
            row[taps.first + a] += mass * taps.w[a];
        }
    }
    h.fixed_marginal.assign(bins, 0.0);
    h.moving_marginal.assign(bins, 0.0);
    for (std::size_t f = 0; f < bins; ++f) {
        for (std::size_t m = 0; m < bins; ++m) {
            h.fixed_marginal[f] += h.at(f, m);
            h.moving_marginal[m] += h.at(f, m);
        }
    }
    return h;
}

double mutual_information(const JointHistogram &h) {
    double mi = 0.0;
    for (std::size_t f = 0; f < h.bins; ++f) {
        for (std::size_t m = 0; m < h.bins; ++m) {
            const double p = h.at(f, m);
            if (p <= 0.0) continue;
            mi += p * std::log(p / (h.fixed_marginal[f] * h.moving_marginal[m]));
        }
    }
    return mi;
}

PairSamples sample_pair(const BsplineCoefficientVolume &fixed, const BsplineCoefficientVolume &moving,
                        const BsplineTransform &t, std::span<const Vec3> points, bool with_gradients) {
    PairSamples s;
    s.fixed.reserve(points.size());
    s.moving.reserve(points.size());
    s.points.reserve(points.size());
    for (const Vec3 &p : points) {
        bool fixed_ok = false;
        const double fv = interpolate_value(fixed, fixed.geometry().world_to_voxel(p), &fixed_ok);
        if (!fixed_ok) continue;
        const Vec3 u = moving.geometry().world_to_voxel(t.apply(p));
        double mv = 0.0;
        Vec3 grad;
        if (with_gradients) {
            const InterpolatedSample ms = interpolate(moving, u);
            if (!ms.valid) continue;
            mv = ms.value;
            grad = ms.gradient;
        } else {
            bool ok = false;
            mv = interpolate_value(moving, u, &ok);
            if (!ok) continue;
        }
        s.fixed.push_back(fv);
        s.moving.push_back(mv);
        if (with_gradients) s.moving_gradients.push_back(grad);
        s.points.push_back(p);
    }
    return s;
}

std::vector<double> mi_gradient(const PairSamples &samples, const JointHistogram &h, const BsplineTransform &t) {
    const std::size_t B = h.bins;
    const std::size_t N = samples.fixed.size();
    if (samples.moving_gradients.size() != N) {
        throw std::invalid_argument("mi_gradient needs samples drawn with gradients");
    }
    // log(p(f,m) / p(m)); zero where the cell is empty.
    std::vector<double> log_ratio(B * B, 0.0);
    for (std::size_t f = 0; f < B; ++f) {
        for (std::size_t m = 0; m < B; ++m) {
            const double p = h.at(f, m);
            if (p > 0.0 && h.moving_marginal[m] > 0.0) log_ratio[f * B + m] = std::log(p / h.moving_marginal[m]);
        }
    }
    std::vector<double> grad(t.parameter_count(), 0.0);
    const double width = window_width(h.moving_window);
    const double dbin = static_cast<double>(B - 5) / width;
    const double inv_n = 1.0 / static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double mv = samples.moving[i];
        if (mv < h.moving_window.min || mv > h.moving_window.max) continue;  // clamped, flat
        const auto fb = static_cast<std::size_t>(std::lround(fixed_bin_coordinate(samples.fixed[i], h.fixed_window, B)));
        const CubicTaps taps = cubic_taps(moving_bin_coordinate(mv, h.moving_window, B));
        double acc = 0.0;
        for (int a = 0; a < 4; ++a) acc += taps.dw[a] * log_ratio[fb * B + static_cast<std::size_t>(taps.first + a)];
        const double dm = -inv_n * dbin * acc;  // d(-MI)/d(moving intensity)
        const Vec3 g = samples.moving_gradients[i] * dm;
        t.for_each_support(samples.points[i], [&](std::size_t cp, double w) {
            grad[3 * cp] += w * g.x;
            grad[3 * cp + 1] += w * g.y;
            grad[3 * cp + 2] += w * g.z;
        });
    }
    return grad;
}

MetricValue evaluate_pairwise(const BsplineCoefficientVolume &fixed, const BsplineCoefficientVolume &moving,
                              const BsplineTransform &t, std::span<const Vec3> points,
                              const PairwiseMetricSettings &settings, bool with_gradient) {
    const PairSamples s = sample_pair(fixed, moving, t, points, with_gradient);
    const JointHistogram h = joint_histogram(s.fixed, s.moving, settings.bins, settings.fixed_window,
                                             settings.moving_window);
    MetricValue out;
    out.value = -mutual_information(h);
    out.valid_samples = s.fixed.size();
    if (with_gradient) out.gradient.push_back(mi_gradient(s, h, t));
    return out;
}

}  // namespace dcereg
