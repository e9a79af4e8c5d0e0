#include "dcereg/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcereg/config_io.hpp"
#include "dcereg/evaluation.hpp"
#include "dcereg/metaimage.hpp"
#include "dcereg/optimizer.hpp"
#include "dcereg/phantom.hpp"

namespace fs = std::filesystem;

namespace dcereg {

namespace {

class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string slurp(const fs::path &p) {
    std::ifstream is(p);
    if (!is) throw InputError("cannot open '" + p.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void spit(const fs::path &p, const std::string &text) {
    std::ofstream os(p, std::ios::binary);
    os << text;
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
}

ImageSeries load_series(const fs::path &dir) {
    const auto files = list_indexed(dir, "volume");
    if (files.size() < 2) {
        throw InputError("series directory '" + dir.string() + "' needs at least two volume_NN.mhd files");
    }
    std::vector<Volume3D> vols;
    for (const auto &f : files) vols.push_back(read_volume(f));
    return ImageSeries(std::move(vols));
}

void write_series(const fs::path &dir, const std::string &prefix, std::span<const Volume3D> volumes,
                  std::size_t first_index = 0) {
    for (std::size_t v = 0; v < volumes.size(); ++v) write_volume(volumes[v], indexed_path(dir, prefix, v + first_index));
}

// A mask argument is a .mhd file, a directory holding <default_prefix>_NN.mhd, or a <dir>/<prefix> stem.
std::vector<BinaryMask> load_mask_set(const fs::path &arg, const std::string &default_prefix) {
    if (arg.extension() == ".mhd") return {read_mask(arg)};
    std::vector<fs::path> files;
    if (fs::is_directory(arg)) {
        files = list_indexed(arg, default_prefix);
    } else {
        files = list_indexed(arg.parent_path().empty() ? fs::path(".") : arg.parent_path(), arg.filename().string());
    }
    if (files.empty()) throw InputError("no masks found for '" + arg.string() + "'");
    std::vector<BinaryMask> masks;
    for (const auto &f : files) masks.push_back(read_mask(f));
    return masks;
}

TransformStack load_stack(const fs::path &dir, const ImageSeries &series) {
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("transform_", 0) == 0 && entry.path().extension() == ".bst") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no transform_NN.bst files in '" + dir.string() + "'");
    TransformStack stack;
    std::vector<LoadedTransform> loaded;
    for (const auto &f : files) loaded.push_back(read_transform(f));
    stack.mode = loaded.front().mode;
    std::sort(loaded.begin(), loaded.end(),
              [](const LoadedTransform &a, const LoadedTransform &b) { return a.volume_index < b.volume_index; });
    for (std::size_t n = 0; n < loaded.size(); ++n) {
        const std::size_t expected = stack.mode == RegistrationMode::groupwise ? n : n + 1;
        if (loaded[n].mode != stack.mode || loaded[n].volume_index != expected) {
            throw InputError("transform set in '" + dir.string() + "' is inconsistent");
        }
        if (!co_located(loaded[n].transform.domain(), series.geometry())) {
            throw InputError("transform domain does not match the series geometry");
        }
        stack.transforms.push_back(std::move(loaded[n].transform));
    }
    if (stack.volume_count() != series.count()) {
        throw InputError("transform count does not match the series length");
    }
    return stack;
}

int cmd_phantom(const std::optional<fs::path> &spec_path, const fs::path &out, std::optional<std::uint64_t> seed) {
    PhantomSpec spec = spec_path ? parse_phantom_spec(slurp(*spec_path)) : PhantomSpec{};
    if (seed) spec.seed = *seed;
    spec.validate();
    const Phantom ph = generate_phantom(spec);
    fs::create_directories(out);
    write_series(out, "volume", ph.series.volumes());
    nlohmann::ordered_json truth;
    truth["format_version"] = 1;
    truth["spec"] = nlohmann::ordered_json::parse(phantom_spec_to_json(spec));
    truth["dims"] = {spec.geometry.dims.x, spec.geometry.dims.y, spec.geometry.dims.z};
    truth["spacing"] = {spec.geometry.spacing.x, spec.geometry.spacing.y, spec.geometry.spacing.z};
    truth["origin"] = {spec.geometry.origin.x, spec.geometry.origin.y, spec.geometry.origin.z};
    truth["volumes"] = spec.volumes;
    truth["group_of_volume"] = ph.truth.group_of_volume;
    auto shifts = nlohmann::ordered_json::array();
    for (const auto &s : ph.truth.group_shifts_mm) shifts.push_back({s.x, s.y, s.z});
    truth["group_shifts_mm"] = shifts;
    truth["motion_convention"] = "volume v shows anatomy point q - m_v(q) at grid position q";
    auto motion_files = nlohmann::ordered_json::array();
    for (std::size_t v = 0; v < ph.truth.motion.size(); ++v) {
        char name[32];
        std::snprintf(name, sizeof name, "truth_motion_%02zu.bst", v);
        write_transform(ph.truth.motion[v], RegistrationMode::groupwise, v, out / name);
        write_mask(ph.truth.lesion_masks[v], indexed_path(out, "lesion", v));
        write_mask(ph.truth.organ_masks[v], indexed_path(out, "liver", v));
        motion_files.push_back(name);
    }
    truth["motion_files"] = motion_files;
    spit(out / "truth.json", truth.dump(2) + "\n");
    return exit_ok;
}

int cmd_register(const std::string &method, const std::optional<fs::path> &config_path, const fs::path &series_dir,
                 const fs::path &out, bool diagnostics) {
    const RegistrationMode mode = registration_mode_from_string(method);
    RegistrationConfig cfg = config_path ? load_registration_config(*config_path, mode)
                                         : RegistrationConfig::defaults(mode);
    if (cfg.method != mode) {
        // Resolution count follows the command-line method unless the config set it.
        bool explicit_resolutions = false;
        if (config_path) {
            explicit_resolutions = nlohmann::json::parse(slurp(*config_path)).contains("resolutions");
        }
        const int res = cfg.resolutions;
        cfg.method = mode;
        cfg.resolutions = explicit_resolutions ? res : RegistrationConfig::defaults(mode).resolutions;
    }
    const ImageSeries series = load_series(series_dir);
    std::optional<BinaryMask> body;
    if (cfg.body_mask) body = read_mask(*cfg.body_mask);
    const RegistrationResult result = run_registration(series, cfg, body ? &*body : nullptr);

    fs::create_directories(out);
    for (std::size_t n = 0; n < result.stack.transforms.size(); ++n) {
        const std::size_t v = mode == RegistrationMode::groupwise ? n : n + 1;
        char name[32];
        std::snprintf(name, sizeof name, "transform_%02zu.bst", v);
        write_transform(result.stack.transforms[n], mode, v, out / name);
    }
    const ImageSeries resampled = resample_series(series, result.stack);
    write_series(out, "volume", resampled.volumes());
    spit(out / "trace.csv", trace_to_csv(result.trace));
    spit(out / "config.json", registration_config_to_json(cfg));
    if (diagnostics) spit(out / "diagnostics.csv", diagnostics_to_csv(result.trace));
    return exit_ok;
}

int cmd_evaluate(const fs::path &series_dir, const std::optional<fs::path> &transforms_dir, const fs::path &lesion,
                 const std::optional<fs::path> &liver, const fs::path &out, const std::optional<std::string> &label) {
    const ImageSeries series = load_series(series_dir);
    TransformStack stack;
    std::string method = "unregistered";
    if (transforms_dir) {
        stack = load_stack(*transforms_dir, series);
        method = to_string(stack.mode);
    } else {
        stack = TransformStack::identity(RegistrationMode::pairwise, series.geometry(), series.count(),
                                         {64.0, 64.0, 64.0});
    }
    if (label) method = *label;
    const auto lesions = load_mask_set(lesion, "lesion");
    if (lesions.size() != series.count()) {
        throw InputError("need one lesion mask per volume (" + std::to_string(series.count()) + "), found " +
                         std::to_string(lesions.size()));
    }
    std::optional<BinaryMask> liver0;
    if (liver) liver0 = load_mask_set(*liver, "liver").front();
    const EvaluationReport report = evaluate_registration(method, series, stack, lesions, liver0 ? &*liver0 : nullptr);

    fs::path stem = out;
    if (stem.extension() == ".csv" || stem.extension() == ".json") stem.replace_extension();
    if (!stem.parent_path().empty()) fs::create_directories(stem.parent_path());
    spit(fs::path(stem.string() + ".csv"), report_to_csv(report));
    spit(fs::path(stem.string() + ".json"), report_to_json(report));
    return exit_ok;
}

int cmd_subtract(const fs::path &series_dir, const fs::path &out) {
    const ImageSeries series = load_series(series_dir);
    fs::create_directories(out);
    write_series(out, "subtraction", subtract_baseline(series), 1);
    return exit_ok;
}

int cmd_compare(const std::vector<fs::path> &reports, const fs::path &out) {
    std::vector<EvaluationReport> rs;
    for (const auto &p : reports) rs.push_back(report_from_json(slurp(p)));
    const ComparisonTable t = compare_methods(rs);
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    spit(out, comparison_to_csv(t));
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string> &args) {
    CLI::App app{"DCE-MRI motion correction: groupwise PCA and pairwise MI B-spline registration"};
    app.require_subcommand(1);

    std::optional<fs::path> spec_path;
    fs::path out;
    std::optional<std::uint64_t> seed;
    auto *phantom = app.add_subcommand("phantom", "generate a synthetic DCE phantom with ground truth");
    phantom->add_option("--spec", spec_path, "phantom spec JSON (defaults when omitted)");
    phantom->add_option("--out", out, "output directory")->required();
    phantom->add_option("--seed", seed, "override the seed given in --spec");

    std::string method = "groupwise";
    std::optional<fs::path> config_path;
    fs::path series_dir;
    bool diagnostics = false;
    auto *reg = app.add_subcommand("register", "register a series");
    reg->add_option("--method", method, "groupwise|pairwise")->check(CLI::IsMember({"groupwise", "pairwise"}));
    reg->add_option("--config", config_path, "registration config JSON");
    reg->add_option("--series", series_dir, "directory of volume_NN.mhd")->required();
    reg->add_option("--out", out, "output directory")->required();
    reg->add_flag("--diagnostics", diagnostics, "also write diagnostics.csv");

    std::optional<fs::path> transforms;
    fs::path lesion;
    std::optional<fs::path> liver;
    std::optional<std::string> label;
    auto *eval = app.add_subcommand("evaluate", "compute the evaluation report of a registration");
    eval->add_option("--series", series_dir, "original (unregistered) series directory")->required();
    eval->add_option("--transforms", transforms, "directory of transform_NN.bst; omit for the unregistered arm");
    eval->add_option("--lesion", lesion, "lesion masks: directory, <dir>/<prefix> stem")->required();
    eval->add_option("--liver", liver, "liver mask of volume 0 (file, directory or stem)");
    eval->add_option("--out", out, "report path stem; writes .csv and .json")->required();
    eval->add_option("--label", label, "method label in the report");

    auto *sub = app.add_subcommand("subtract", "write baseline-subtracted volumes");
    sub->add_option("--series", series_dir, "series directory")->required();
    sub->add_option("--out", out, "output directory")->required();

    std::vector<fs::path> reports;
    auto *cmp = app.add_subcommand("compare", "side-by-side comparison of evaluation reports");
    cmp->add_option("--reports", reports, "report JSON files")->required()->expected(2, 64);
    cmp->add_option("--out", out, "comparison CSV")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return exit_input_error;
    }

    try {
        if (*phantom) return cmd_phantom(spec_path, out, seed);
        if (*reg) return cmd_register(method, config_path, series_dir, out, diagnostics);
        if (*eval) return cmd_evaluate(series_dir, transforms, lesion, liver, out, label);
        if (*sub) return cmd_subtract(series_dir, out);
        if (*cmp) return cmd_compare(reports, out);
    } catch (const RegistrationAborted &e) {
        std::cerr << "registration failed: " << e.what() << '\n';
        return exit_registration_failure;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input_error;
    }
    return exit_input_error;
}

int run_cli(int argc, char **argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace dcereg
