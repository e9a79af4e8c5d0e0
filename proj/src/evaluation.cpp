#include "dcereg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dcereg/interpolation.hpp"

namespace dcereg {

namespace {

void require_same_geometry(const BinaryMask &a, const BinaryMask &b) {
    if (!co_located(a.geometry(), b.geometry())) {
        throw std::invalid_argument("masks do not share a geometry");
    }
}

// Nearest-neighbour read; outside the lattice is background.
bool nearest(const BinaryMask &m, const Vec3 &p) {
    const Geometry &g = m.geometry();
    const Vec3 c = g.world_to_voxel(p);
    const long i = std::lround(c.x);
    const long j = std::lround(c.y);
    const long k = std::lround(c.z);
    if (i < 0 || j < 0 || k < 0 || i >= g.dims.x || j >= g.dims.y || k >= g.dims.z) return false;
    return m.at(static_cast<int>(i), static_cast<int>(j), static_cast<int>(k));
}

double max_coefficient(const BsplineTransform *t) {
    if (!t) return 0.0;
    double m = 0.0;
    for (std::size_t cp = 0; cp < t->control_point_count(); ++cp) m = std::max(m, norm(t->coefficient(cp)));
    return m;
}

double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace

double dice(const BinaryMask &a, const BinaryMask &b) {
    require_same_geometry(a, b);
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i];
        nb += b[i];
        both += a[i] && b[i];
    }
    if (na + nb == 0) {
        throw std::invalid_argument("dice of two empty masks is undefined");
    }
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double groupwise_dice(std::span<const BinaryMask> masks) {
    if (masks.empty()) throw std::invalid_argument("groupwise dice needs at least one mask");
    for (const auto &m : masks) require_same_geometry(m, masks.front());
    std::size_t total = 0, common = 0;
    for (std::size_t i = 0; i < masks.front().size(); ++i) {
        bool all = true;
        for (const auto &m : masks) {
            total += m[i];
            all = all && m[i];
        }
        common += all;
    }
    if (total == 0) throw std::invalid_argument("groupwise dice of empty masks is undefined");
    return static_cast<double>(masks.size()) * static_cast<double>(common) / static_cast<double>(total);
}

BinaryMask warp_mask_to_registered(const BinaryMask &mask, const TransformStack &stack, std::size_t v) {
    const BsplineTransform *t = stack.for_volume(v);
    if (!t) return mask;
    const Geometry &g = mask.geometry();
    BinaryMask out(g);
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
        const Index3 l = g.lattice_index(idx);
        out.set(idx, nearest(mask, t->apply(g.voxel_center(l.x, l.y, l.z))));
    }
    return out;
}

PropagatedMask propagate_mask(const BinaryMask &mask0, const TransformStack &stack, std::size_t target,
                              double tol, int max_iter) {
    const Geometry &g = mask0.geometry();
    const BsplineTransform *to_target = stack.for_volume(target);
    const BsplineTransform *to_reference = stack.for_volume(0);
    PropagatedMask out{BinaryMask(g), 0};
    if (mask0.empty()) return out;

    // Only voxels near the mask can end up inside it.
    Index3 lo{g.dims.x, g.dims.y, g.dims.z};
    Index3 hi{-1, -1, -1};
    for (std::size_t idx = 0; idx < mask0.size(); ++idx) {
        if (!mask0[idx]) continue;
        const Index3 l = g.lattice_index(idx);
        for (std::size_t a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], l[a]);
            hi[a] = std::max(hi[a], l[a]);
        }
    }
    const double reach = 2.0 * (max_coefficient(to_target) + max_coefficient(to_reference));
    for (std::size_t a = 0; a < 3; ++a) {
        const int pad = static_cast<int>(std::ceil(reach / g.spacing[a])) + 2;
        lo[a] = std::max(0, lo[a] - pad);
        hi[a] = std::min(g.dims[a] - 1, hi[a] + pad);
    }

    std::size_t failures = 0;
    for (int k = lo.z; k <= hi.z; ++k) {
        for (int j = lo.y; j <= hi.y; ++j) {
            for (int i = lo.x; i <= hi.x; ++i) {
                Vec3 p = g.voxel_center(i, j, k);
                if (to_target) {
                    const auto inv = to_target->invert_at(p, tol, max_iter);
                    if (!inv.converged) ++failures;
                    p = inv.point;
                }
                if (to_reference) p = to_reference->apply(p);
                out.mask.set(i, j, k, nearest(mask0, p));
            }
        }
    }
    out.inversion_failures = failures;
    const double allowed = 0.01 * static_cast<double>(std::max<std::size_t>(out.mask.count(), 1));
    if (static_cast<double>(failures) > allowed) {
        throw std::runtime_error("mask propagation: " + std::to_string(failures) +
                                 " voxels hit non-convergent inversions");
    }
    return out;
}

double temporal_smoothness_sd(std::span<const double> m) {
    if (m.size() < 3) {
        throw std::invalid_argument("temporal smoothness needs at least three time points");
    }
    std::vector<double> d;
    d.reserve(m.size() - 2);
    for (std::size_t t = 1; t + 1 < m.size(); ++t) d.push_back(m[t + 1] - 2.0 * m[t] + m[t - 1]);
    if (d.size() < 2) return 0.0;
    return sample_sd(d);
}

std::vector<double> lesion_intensity_curve(const ImageSeries &series, const BinaryMask &lesion0,
                                           const TransformStack &stack) {
    if (!co_located(series.geometry(), lesion0.geometry())) {
        throw std::invalid_argument("lesion mask geometry does not match the series");
    }
    const BinaryMask region = warp_mask_to_registered(lesion0, stack, 0);
    if (region.empty()) {
        throw std::invalid_argument("lesion region is empty in the registered space");
    }
    const Geometry &g = region.geometry();
    std::vector<double> curve;
    for (std::size_t v = 0; v < series.count(); ++v) {
        const BsplineTransform *t = stack.for_volume(v);
        if (!t) {
            curve.push_back(mean_intensity_in_mask(series[v], region));
            continue;
        }
        const BsplineCoefficientVolume coeffs(series[v]);
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t idx = 0; idx < region.size(); ++idx) {
            if (!region[idx]) continue;
            const Index3 l = g.lattice_index(idx);
            sum += interpolate_value(coeffs, g.world_to_voxel(t->apply(g.voxel_center(l.x, l.y, l.z))));
            ++n;
        }
        curve.push_back(sum / static_cast<double>(n));
    }
    return curve;
}

JacobianStats jacobian_stats(const TransformStack &stack, const BinaryMask &lesion, const BinaryMask *liver) {
    if (lesion.empty()) throw std::invalid_argument("jacobian_stats needs a non-empty lesion mask");
    if (liver && liver->empty()) throw std::invalid_argument("jacobian_stats needs a non-empty liver mask");
    const std::size_t V = stack.volume_count();
    JacobianStats s;
    auto stats_over = [&](const BinaryMask &mask, const BsplineTransform *t, double &mean, double &sd) {
        if (!t) {
            mean = 1.0;
            sd = 0.0;
            return;
        }
        const Geometry &g = mask.geometry();
        std::vector<double> dets;
        for (std::size_t idx = 0; idx < mask.size(); ++idx) {
            if (!mask[idx]) continue;
            const Index3 l = g.lattice_index(idx);
            dets.push_back(t->jacobian_determinant(g.voxel_center(l.x, l.y, l.z)));
        }
        double sum = 0.0;
        for (double d : dets) sum += d;
        mean = sum / static_cast<double>(dets.size());
        sd = sample_sd(dets);
    };
    double liver_sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
        double mean = 1.0, sd = 0.0;
        stats_over(lesion, stack.for_volume(v), mean, sd);
        s.lesion_mean.push_back(mean);
        s.lesion_sd.push_back(sd);
        if (liver) {
            double lm = 1.0, lsd = 0.0;
            stats_over(*liver, stack.for_volume(v), lm, lsd);
            s.liver_sd.push_back(lsd);
            if (v > 0) liver_sum += lsd;
        }
    }
    if (liver) s.liver_sd_mean = V > 1 ? liver_sum / static_cast<double>(V - 1) : 0.0;
    return s;
}

std::string series_identity(const ImageSeries &series) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t x) {
        h ^= x;
        h *= 1099511628211ULL;
    };
    mix(series.count());
    const Geometry &g = series.geometry();
    for (std::size_t a = 0; a < 3; ++a) mix(static_cast<std::uint64_t>(g.dims[a]));
    for (const auto &v : series) {
        for (double x : v.voxels()) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof bits);
            mix(bits);
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

EvaluationReport evaluate_registration(const std::string &method, const ImageSeries &series,
                                       const TransformStack &stack, std::span<const BinaryMask> lesion_masks,
                                       const BinaryMask *liver0) {
    const std::size_t V = series.count();
    if (lesion_masks.size() != V || stack.volume_count() != V) {
        throw std::invalid_argument("evaluation needs one lesion mask and one transform slot per volume");
    }
    for (const auto &m : lesion_masks) {
        if (!co_located(m.geometry(), series.geometry())) {
            throw std::invalid_argument("lesion mask geometry does not match the series");
        }
    }
    if (liver0 && !co_located(liver0->geometry(), series.geometry())) {
        throw std::invalid_argument("liver mask geometry does not match the series");
    }

    EvaluationReport r;
    r.method = method;
    r.series_id = series_identity(series);
    r.volumes.resize(V);

    std::vector<BinaryMask> registered;
    registered.reserve(V);
    double dsc_sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
        r.volumes[v].volume = v;
        const PropagatedMask p = propagate_mask(lesion_masks[0], stack, v);
        r.volumes[v].dsc = dice(p.mask, lesion_masks[v]);
        if (v > 0) dsc_sum += r.volumes[v].dsc;
        registered.push_back(warp_mask_to_registered(lesion_masks[v], stack, v));
    }
    r.mean_pairwise_dsc = dsc_sum / static_cast<double>(V - 1);
    r.groupwise_dsc = groupwise_dice(registered);

    const auto curve = lesion_intensity_curve(series, lesion_masks[0], stack);
    for (std::size_t v = 0; v < V; ++v) r.volumes[v].mean_lesion_intensity = curve[v];
    r.temporal_smoothness_sd = V >= 3 ? temporal_smoothness_sd(curve) : 0.0;

    const BinaryMask &lesion_reg = registered[0];
    std::optional<BinaryMask> liver_reg;
    if (liver0) liver_reg = warp_mask_to_registered(*liver0, stack, 0);
    const JacobianStats js = jacobian_stats(stack, lesion_reg, liver_reg ? &*liver_reg : nullptr);
    std::vector<double> lesion_means;
    for (std::size_t v = 0; v < V; ++v) {
        r.volumes[v].lesion_jacobian_mean = js.lesion_mean[v];
        r.volumes[v].lesion_jacobian_sd = js.lesion_sd[v];
        if (liver_reg) r.volumes[v].liver_jacobian_sd = js.liver_sd[v];
        if (v > 0) lesion_means.push_back(js.lesion_mean[v]);
    }
    double mean = 0.0;
    for (double x : lesion_means) mean += x;
    r.lesion_jacobian_mean = mean / static_cast<double>(lesion_means.size());
    r.lesion_jacobian_spread = sample_sd(lesion_means);
    r.liver_jacobian_sd_mean = js.liver_sd_mean;
    return r;
}

ComparisonTable compare_methods(std::span<const EvaluationReport> reports) {
    if (reports.size() < 2) throw std::invalid_argument("comparison needs at least two reports");
    for (const auto &r : reports) {
        if (r.series_id != reports.front().series_id || r.volumes.size() != reports.front().volumes.size()) {
            throw std::invalid_argument("reports describe different series");
        }
    }
    ComparisonTable t;
    for (const auto &r : reports) t.methods.push_back(r.method);

    enum class Better { higher, lower, closer_to_one };
    auto add = [&](const std::string &name, Better better, auto getter) {
        ComparisonRow row;
        row.statistic = name;
        for (const auto &r : reports) row.values.push_back(getter(r));
        for (double v : row.values) row.deltas.push_back(v - row.values.front());
        auto score = [&](double v) {
            switch (better) {
                case Better::higher: return v;
                case Better::lower: return -v;
                case Better::closer_to_one: return -std::abs(v - 1.0);
            }
            return v;
        };
        for (std::size_t i = 1; i < row.values.size(); ++i) {
            if (score(row.values[i]) > score(row.values[row.winner])) row.winner = i;
        }
        t.rows.push_back(std::move(row));
    };
    add("mean_pairwise_dsc", Better::higher, [](const EvaluationReport &r) { return r.mean_pairwise_dsc; });
    add("groupwise_dsc", Better::higher, [](const EvaluationReport &r) { return r.groupwise_dsc; });
    add("temporal_smoothness_sd", Better::lower, [](const EvaluationReport &r) { return r.temporal_smoothness_sd; });
    add("lesion_jacobian_mean", Better::closer_to_one,
        [](const EvaluationReport &r) { return r.lesion_jacobian_mean; });
    const bool all_liver = std::all_of(reports.begin(), reports.end(),
                                       [](const EvaluationReport &r) { return r.liver_jacobian_sd_mean.has_value(); });
    if (all_liver) {
        add("liver_jacobian_sd_mean", Better::lower,
            [](const EvaluationReport &r) { return *r.liver_jacobian_sd_mean; });
    }
    return t;
}

namespace {

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace

std::string report_to_csv(const EvaluationReport &r) {
    std::ostringstream os;
    os << "row,volume,dsc,mean_lesion_intensity,lesion_jacobian_mean,lesion_jacobian_sd,liver_jacobian_sd\n";
    for (const auto &v : r.volumes) {
        os << "volume," << v.volume << ',' << num(v.dsc) << ',' << num(v.mean_lesion_intensity) << ','
           << num(v.lesion_jacobian_mean) << ',' << num(v.lesion_jacobian_sd) << ','
           << (v.liver_jacobian_sd ? num(*v.liver_jacobian_sd) : "absent") << '\n';
    }
    // Summary rows: statistic name in the volume column, value in the dsc column.
    os << "summary,method," << r.method << ",,,,\n";
    os << "summary,mean_pairwise_dsc," << num(r.mean_pairwise_dsc) << ",,,,\n";
    os << "summary,groupwise_dsc," << num(r.groupwise_dsc) << ",,,,\n";
    os << "summary,temporal_smoothness_sd," << num(r.temporal_smoothness_sd) << ",,,,\n";
    os << "summary,lesion_jacobian_mean," << num(r.lesion_jacobian_mean) << ",,,,\n";
    os << "summary,lesion_jacobian_spread," << num(r.lesion_jacobian_spread) << ",,,,\n";
    os << "summary,liver_jacobian_sd_mean,"
       << (r.liver_jacobian_sd_mean ? num(*r.liver_jacobian_sd_mean) : "absent") << ",,,,\n";
    return os.str();
}

std::string report_to_json(const EvaluationReport &r) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["method"] = r.method;
    j["series_id"] = r.series_id;
    j["mean_pairwise_dsc"] = r.mean_pairwise_dsc;
    j["groupwise_dsc"] = r.groupwise_dsc;
    j["temporal_smoothness_sd"] = r.temporal_smoothness_sd;
    j["lesion_jacobian_mean"] = r.lesion_jacobian_mean;
    j["lesion_jacobian_spread"] = r.lesion_jacobian_spread;
    j["liver_jacobian_sd_mean"] = r.liver_jacobian_sd_mean ? nlohmann::ordered_json(*r.liver_jacobian_sd_mean)
                                                           : nlohmann::ordered_json(nullptr);
    auto &rows = j["volumes"] = nlohmann::ordered_json::array();
    for (const auto &v : r.volumes) {
        nlohmann::ordered_json row;
        row["volume"] = v.volume;
        row["dsc"] = v.dsc;
        row["mean_lesion_intensity"] = v.mean_lesion_intensity;
        row["lesion_jacobian_mean"] = v.lesion_jacobian_mean;
        row["lesion_jacobian_sd"] = v.lesion_jacobian_sd;
        row["liver_jacobian_sd"] =
            v.liver_jacobian_sd ? nlohmann::ordered_json(*v.liver_jacobian_sd) : nlohmann::ordered_json(nullptr);
        rows.push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

std::string comparison_to_csv(const ComparisonTable &t) {
    std::ostringstream os;
    os << "statistic";
    for (const auto &m : t.methods) os << ',' << m;
    for (const auto &m : t.methods) os << ",delta_" << m;
    os << ",winner\n";
    for (const auto &row : t.rows) {
        os << row.statistic;
        for (double v : row.values) os << ',' << num(v);
        for (double d : row.deltas) os << ',' << num(d);
        os << ',' << t.methods[row.winner] << '\n';
    }
    return os.str();
}

}  // namespace dcereg
