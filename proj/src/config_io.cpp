#include "dcereg/config_io.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dcereg {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json parse_object(const std::string &text, const std::string &what) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError(what + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
    if (j.contains("format_version") && j["format_version"] != 1) {
        throw ConfigError(what + ": unsupported format_version");
    }
    return j;
}

void reject_unknown(const json &j, const std::set<std::string> &known, const std::string &what) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ConfigError(what + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
void read(const json &j, const char *key, T &out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception &) {
        throw ConfigError(std::string("key '") + key + "' has the wrong type");
    }
}

Vec3 vec3_from(const json &j, const char *key) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(std::string("key '") + key + "' must be a 3-array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void read_vec3(const json &j, const char *key, Vec3 &out) {
    if (j.contains(key)) out = vec3_from(j[key], key);
}

json vec3_json(const Vec3 &v) { return json::array({v.x, v.y, v.z}); }

void read_ellipsoid(const json &j, const char *key, Ellipsoid &out) {
    if (!j.contains(key)) return;
    const json &e = j[key];
    if (!e.is_object()) throw ConfigError(std::string("key '") + key + "' must be an object");
    reject_unknown(e, {"center", "semi_axes"}, key);
    read_vec3(e, "center", out.center);
    read_vec3(e, "semi_axes", out.semi_axes);
}

void read_enhancement(const json &j, const char *key, EnhancementParams &out) {
    if (!j.contains(key)) return;
    const json &e = j[key];
    if (!e.is_object()) throw ConfigError(std::string("key '") + key + "' must be an object");
    reject_unknown(e, {"baseline", "amplitude", "onset", "tau", "shape"}, key);
    read(e, "baseline", out.baseline);
    read(e, "amplitude", out.amplitude);
    read(e, "onset", out.onset);
    read(e, "tau", out.tau);
    read(e, "shape", out.shape);
}

ordered_json enhancement_json(const EnhancementParams &e) {
    ordered_json j;
    j["baseline"] = e.baseline;
    j["amplitude"] = e.amplitude;
    j["onset"] = e.onset;
    j["tau"] = e.tau;
    j["shape"] = e.shape;
    return j;
}

}  // namespace

RegistrationConfig parse_registration_config(const std::string &text, RegistrationMode default_method) {
    const json j = parse_object(text, "registration config");
    reject_unknown(j,
                   {"format_version", "method", "resolutions", "iterations_per_resolution", "samples_per_iteration",
                    "final_grid_spacing_mm", "seed", "gain_a", "gain_offset", "gain_alpha", "histogram_bins",
                    "body_mask", "drift_constraint"},
                   "registration config");
    RegistrationMode method = default_method;
    if (j.contains("method")) {
        try {
            method = registration_mode_from_string(j["method"].get<std::string>());
        } catch (const std::exception &e) {
            throw ConfigError(std::string("key 'method': ") + e.what());
        }
    }
    RegistrationConfig c = RegistrationConfig::defaults(method);
    read(j, "resolutions", c.resolutions);
    read(j, "iterations_per_resolution", c.iterations_per_resolution);
    read(j, "samples_per_iteration", c.samples_per_iteration);
    read(j, "final_grid_spacing_mm", c.final_grid_spacing_mm);
    read(j, "seed", c.seed);
    read(j, "gain_a", c.gain_a);
    read(j, "gain_offset", c.gain_offset);
    read(j, "gain_alpha", c.gain_alpha);
    read(j, "histogram_bins", c.histogram_bins);
    if (j.contains("body_mask") && !j["body_mask"].is_null()) {
        std::string path;
        read(j, "body_mask", path);
        c.body_mask = path;
    }
    if (j.contains("drift_constraint")) {
        std::string d;
        read(j, "drift_constraint", d);
        try {
            c.drift_constraint = drift_constraint_from_string(d);
        } catch (const std::exception &e) {
            throw ConfigError(std::string("key 'drift_constraint': ") + e.what());
        }
    }
    try {
        c.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(std::string("registration config: ") + e.what());
    }
    return c;
}

RegistrationConfig load_registration_config(const std::filesystem::path &path, RegistrationMode default_method) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_registration_config(ss.str(), default_method);
}

std::string registration_config_to_json(const RegistrationConfig &c) {
    ordered_json j;
    j["format_version"] = 1;
    j["method"] = to_string(c.method);
    j["resolutions"] = c.resolutions;
    j["iterations_per_resolution"] = c.iterations_per_resolution;
    j["samples_per_iteration"] = c.samples_per_iteration;
    j["final_grid_spacing_mm"] = c.final_grid_spacing_mm;
    j["seed"] = c.seed;
    j["gain_a"] = c.gain_a;
    j["gain_offset"] = c.gain_offset;
    j["gain_alpha"] = c.gain_alpha;
    j["histogram_bins"] = c.histogram_bins;
    j["body_mask"] = c.body_mask ? ordered_json(*c.body_mask) : ordered_json(nullptr);
    j["drift_constraint"] = to_string(c.drift_constraint);
    return j.dump(2) + "\n";
}

PhantomSpec parse_phantom_spec(const std::string &text) {
    const json j = parse_object(text, "phantom spec");
    reject_unknown(j,
                   {"format_version", "dims", "spacing", "origin", "volumes", "breath_hold_groups", "group_shifts_mm",
                    "max_shift_mm", "perturbation_mm", "volume_jitter_mm", "perturbation_grid_mm", "body", "organ",
                    "lesion_center", "lesion_radius_mm", "vessel_center", "vessel_radius_mm", "edge_width_mm",
                    "enhancement", "noise_sd", "seed"},
                   "phantom spec");
    PhantomSpec s;
    try {
        if (j.contains("dims")) {
            const Vec3 d = vec3_from(j["dims"], "dims");
            s.geometry.dims = {static_cast<int>(d.x), static_cast<int>(d.y), static_cast<int>(d.z)};
        }
        read_vec3(j, "spacing", s.geometry.spacing);
        read_vec3(j, "origin", s.geometry.origin);
        read(j, "volumes", s.volumes);
        read(j, "breath_hold_groups", s.breath_hold_groups);
        if (j.contains("group_shifts_mm")) {
            s.group_shifts_mm.clear();
            for (const auto &e : j["group_shifts_mm"]) s.group_shifts_mm.push_back(vec3_from(e, "group_shifts_mm"));
        }
        read(j, "max_shift_mm", s.max_shift_mm);
        read(j, "perturbation_mm", s.perturbation_mm);
        read(j, "volume_jitter_mm", s.volume_jitter_mm);
        read(j, "perturbation_grid_mm", s.perturbation_grid_mm);
        read_ellipsoid(j, "body", s.body);
        read_ellipsoid(j, "organ", s.organ);
        read_vec3(j, "lesion_center", s.lesion_center);
        read(j, "lesion_radius_mm", s.lesion_radius_mm);
        read_vec3(j, "vessel_center", s.vessel_center);
        read(j, "vessel_radius_mm", s.vessel_radius_mm);
        read(j, "edge_width_mm", s.edge_width_mm);
        if (j.contains("enhancement")) {
            const json &e = j["enhancement"];
            reject_unknown(e, {"background", "body", "organ", "lesion", "vessel"}, "enhancement");
            read_enhancement(e, "background", s.background);
            read_enhancement(e, "body", s.body_tissue);
            read_enhancement(e, "organ", s.organ_tissue);
            read_enhancement(e, "lesion", s.lesion_tissue);
            read_enhancement(e, "vessel", s.vessel_tissue);
        }
        read(j, "noise_sd", s.noise_sd);
        read(j, "seed", s.seed);
        s.validate();
    } catch (const ConfigError &) {
        throw;
    } catch (const std::exception &e) {
        throw ConfigError(std::string("phantom spec: ") + e.what());
    }
    return s;
}

std::string phantom_spec_to_json(const PhantomSpec &s) {
    ordered_json j;
    j["format_version"] = 1;
    j["dims"] = json::array({s.geometry.dims.x, s.geometry.dims.y, s.geometry.dims.z});
    j["spacing"] = vec3_json(s.geometry.spacing);
    j["origin"] = vec3_json(s.geometry.origin);
    j["volumes"] = s.volumes;
    j["breath_hold_groups"] = s.breath_hold_groups;
    auto shifts = json::array();
    for (const auto &v : s.group_shifts_mm) shifts.push_back(vec3_json(v));
    j["group_shifts_mm"] = shifts;
    j["max_shift_mm"] = s.max_shift_mm;
    j["perturbation_mm"] = s.perturbation_mm;
    j["volume_jitter_mm"] = s.volume_jitter_mm;
    j["perturbation_grid_mm"] = s.perturbation_grid_mm;
    j["body"] = {{"center", vec3_json(s.body.center)}, {"semi_axes", vec3_json(s.body.semi_axes)}};
    j["organ"] = {{"center", vec3_json(s.organ.center)}, {"semi_axes", vec3_json(s.organ.semi_axes)}};
    j["lesion_center"] = vec3_json(s.lesion_center);
    j["lesion_radius_mm"] = s.lesion_radius_mm;
    j["vessel_center"] = vec3_json(s.vessel_center);
    j["vessel_radius_mm"] = s.vessel_radius_mm;
    j["edge_width_mm"] = s.edge_width_mm;
    ordered_json e;
    e["background"] = enhancement_json(s.background);
    e["body"] = enhancement_json(s.body_tissue);
    e["organ"] = enhancement_json(s.organ_tissue);
    e["lesion"] = enhancement_json(s.lesion_tissue);
    e["vessel"] = enhancement_json(s.vessel_tissue);
    j["enhancement"] = e;
    j["noise_sd"] = s.noise_sd;
    j["seed"] = s.seed;
    return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string &text) {
    const json j = parse_object(text, "evaluation report");
    EvaluationReport r;
    try {
        r.method = j.at("method").get<std::string>();
        r.series_id = j.at("series_id").get<std::string>();
        r.mean_pairwise_dsc = j.at("mean_pairwise_dsc").get<double>();
        r.groupwise_dsc = j.at("groupwise_dsc").get<double>();
        r.temporal_smoothness_sd = j.at("temporal_smoothness_sd").get<double>();
        r.lesion_jacobian_mean = j.at("lesion_jacobian_mean").get<double>();
        r.lesion_jacobian_spread = j.at("lesion_jacobian_spread").get<double>();
        if (!j.at("liver_jacobian_sd_mean").is_null()) r.liver_jacobian_sd_mean = j["liver_jacobian_sd_mean"].get<double>();
        for (const auto &row : j.at("volumes")) {
            VolumeRow v;
            v.volume = row.at("volume").get<std::size_t>();
            v.dsc = row.at("dsc").get<double>();
            v.mean_lesion_intensity = row.at("mean_lesion_intensity").get<double>();
            v.lesion_jacobian_mean = row.at("lesion_jacobian_mean").get<double>();
            v.lesion_jacobian_sd = row.at("lesion_jacobian_sd").get<double>();
            if (!row.at("liver_jacobian_sd").is_null()) v.liver_jacobian_sd = row["liver_jacobian_sd"].get<double>();
            r.volumes.push_back(v);
        }
    } catch (const json::exception &e) {
        throw ConfigError(std::string("evaluation report: ") + e.what());
    }
    return r;
}

std::string trace_to_csv(const OptimizationTrace &trace) {
    std::ostringstream os;
    os << std::setprecision(12);
    os << "resolution,iteration,metric,step,grad_norm,valid_samples\n";
    for (const auto &e : trace.entries) {
        os << e.resolution << ',' << e.iteration << ',' << e.metric << ',' << e.step << ',' << e.grad_norm << ','
           << e.valid_samples << '\n';
    }
    return os.str();
}

std::string diagnostics_to_csv(const OptimizationTrace &trace) {
    std::ostringstream os;
    os << std::setprecision(12);
    std::size_t spectrum = 0;
    for (const auto &e : trace.entries) spectrum = std::max(spectrum, e.spectrum.size());
    os << "resolution,iteration,metric";
    for (std::size_t j = 0; j < spectrum; ++j) os << ",lambda_" << (j + 1);
    os << ",valid_samples,skipped,mean_dx,mean_dy,mean_dz\n";
    for (const auto &e : trace.entries) {
        os << e.resolution << ',' << e.iteration << ',' << e.metric;
        for (std::size_t j = 0; j < spectrum; ++j) {
            os << ',';
            if (j < e.spectrum.size()) os << e.spectrum[j];
        }
        os << ',' << e.valid_samples << ',' << (e.skipped ? 1 : 0) << ',' << e.mean_displacement.x << ','
           << e.mean_displacement.y << ',' << e.mean_displacement.z << '\n';
    }
    return os.str();
}

}  // namespace dcereg
