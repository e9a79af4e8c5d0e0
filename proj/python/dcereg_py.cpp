#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dcereg/cli.hpp"
#include "dcereg/config_io.hpp"
#include "dcereg/evaluation.hpp"
#include "dcereg/metaimage.hpp"
#include "dcereg/optimizer.hpp"
#include "dcereg/pca_metric.hpp"
#include "dcereg/phantom.hpp"

namespace py = pybind11;
using namespace dcereg;

namespace {

// Arrays are (z, y, x): x varies fastest, matching the voxel layout.
template <class T>
py::array_t<T> to_array(const Geometry &g, std::span<const T> data) {
    py::array_t<T> a({g.dims.z, g.dims.y, g.dims.x});
    std::copy(data.begin(), data.end(), a.mutable_data());
    return a;
}

Geometry checked_geometry(const py::array &a, const Geometry &g) {
    if (a.ndim() != 3 || a.shape(0) != g.dims.z || a.shape(1) != g.dims.y || a.shape(2) != g.dims.x) {
        throw std::invalid_argument("array shape must be (dims.z, dims.y, dims.x)");
    }
    return g;
}

Volume3D volume_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a, const Geometry &g) {
    checked_geometry(a, g);
    return Volume3D(g, std::vector<double>(a.data(), a.data() + a.size()));
}

BinaryMask mask_from_array(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a, const Geometry &g) {
    checked_geometry(a, g);
    std::vector<std::uint8_t> bits(a.data(), a.data() + a.size());
    for (auto &b : bits) b = b ? 1 : 0;
    return BinaryMask(g, std::move(bits));
}

py::object json_to_py(const std::string &text) { return py::module_::import("json").attr("loads")(text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "DCE-MRI motion correction: groupwise PCA and pairwise MI B-spline registration";

    py::register_exception<MetricUndefined>(m, "MetricUndefined", PyExc_RuntimeError);
    py::register_exception<RegistrationAborted>(m, "RegistrationAborted", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Geometry>(m, "Geometry")
        .def(py::init([](std::array<int, 3> dims, std::array<double, 3> spacing, std::array<double, 3> origin) {
                 Geometry g{{dims[0], dims[1], dims[2]}, {spacing[0], spacing[1], spacing[2]},
                            {origin[0], origin[1], origin[2]}};
                 g.validate();
                 return g;
             }),
             py::arg("dims"), py::arg("spacing") = std::array<double, 3>{1, 1, 1},
             py::arg("origin") = std::array<double, 3>{0, 0, 0})
        .def_property_readonly("dims", [](const Geometry &g) { return std::array<int, 3>{g.dims.x, g.dims.y, g.dims.z}; })
        .def_property_readonly("spacing",
                               [](const Geometry &g) { return std::array<double, 3>{g.spacing.x, g.spacing.y, g.spacing.z}; })
        .def_property_readonly("origin",
                               [](const Geometry &g) { return std::array<double, 3>{g.origin.x, g.origin.y, g.origin.z}; })
        .def("__eq__", [](const Geometry &a, const Geometry &b) { return a == b; });

    py::class_<Volume3D>(m, "Volume")
        .def(py::init(&volume_from_array), py::arg("array"), py::arg("geometry"))
        .def_property_readonly("geometry", &Volume3D::geometry)
        .def("array", [](const Volume3D &v) { return to_array<double>(v.geometry(), v.voxels()); });

    py::class_<BinaryMask>(m, "Mask")
        .def(py::init(&mask_from_array), py::arg("array"), py::arg("geometry"))
        .def_property_readonly("geometry", &BinaryMask::geometry)
        .def("count", &BinaryMask::count)
        .def("array", [](const BinaryMask &b) { return to_array<std::uint8_t>(b.geometry(), b.voxels()); });

    py::class_<ImageSeries>(m, "Series")
        .def(py::init<std::vector<Volume3D>>(), py::arg("volumes"))
        .def("__len__", &ImageSeries::count)
        .def("__getitem__",
             [](const ImageSeries &s, std::size_t v) {
                 if (v >= s.count()) throw py::index_error();
                 return s[v];
             })
        .def_property_readonly("geometry", &ImageSeries::geometry);

    py::enum_<RegistrationMode>(m, "Method")
        .value("groupwise", RegistrationMode::groupwise)
        .value("pairwise", RegistrationMode::pairwise);

    py::class_<TransformStack>(m, "TransformStack")
        .def_readonly("method", &TransformStack::mode)
        .def("__len__", [](const TransformStack &s) { return s.transforms.size(); })
        .def("volume_count", &TransformStack::volume_count)
        .def("map_to_volume",
             [](const TransformStack &s, std::size_t v, std::array<double, 3> p) {
                 const Vec3 q = s.map_to_volume(v, {p[0], p[1], p[2]});
                 return std::array<double, 3>{q.x, q.y, q.z};
             })
        .def("jacobian_determinant",
             [](const TransformStack &s, std::size_t v, std::array<double, 3> p) {
                 const BsplineTransform *t = s.for_volume(v);
                 return t ? t->jacobian_determinant({p[0], p[1], p[2]}) : 1.0;
             })
        .def("save",
             [](const TransformStack &s, const std::filesystem::path &dir) {
                 std::filesystem::create_directories(dir);
                 const std::size_t first = s.mode == RegistrationMode::groupwise ? 0 : 1;
                 for (std::size_t k = 0; k < s.transforms.size(); ++k) {
                     char name[32];
                     std::snprintf(name, sizeof name, "transform_%02zu.bst", k + first);
                     write_transform(s.transforms[k], s.mode, k + first, dir / name);
                 }
             })
        .def_static("identity", [](RegistrationMode mode, const Geometry &g, std::size_t volumes, double spacing) {
            return TransformStack::identity(mode, g, volumes, {spacing, spacing, spacing});
        });

    py::class_<RegistrationConfig>(m, "RegistrationConfig")
        .def(py::init([](RegistrationMode method) { return RegistrationConfig::defaults(method); }),
             py::arg("method") = RegistrationMode::groupwise)
        .def_static("from_json", &parse_registration_config, py::arg("text"),
                    py::arg("default_method") = RegistrationMode::groupwise)
        .def("to_json", &registration_config_to_json)
        .def_readwrite("method", &RegistrationConfig::method)
        .def_readwrite("resolutions", &RegistrationConfig::resolutions)
        .def_readwrite("iterations_per_resolution", &RegistrationConfig::iterations_per_resolution)
        .def_readwrite("samples_per_iteration", &RegistrationConfig::samples_per_iteration)
        .def_readwrite("final_grid_spacing_mm", &RegistrationConfig::final_grid_spacing_mm)
        .def_readwrite("seed", &RegistrationConfig::seed)
        .def_readwrite("gain_a", &RegistrationConfig::gain_a)
        .def_readwrite("histogram_bins", &RegistrationConfig::histogram_bins);

    py::class_<PhantomTruth>(m, "PhantomTruth")
        .def_readonly("lesion_masks", &PhantomTruth::lesion_masks)
        .def_readonly("organ_masks", &PhantomTruth::organ_masks)
        .def_readonly("group_of_volume", &PhantomTruth::group_of_volume)
        .def("anatomy_point", [](const PhantomTruth &t, std::size_t v, std::array<double, 3> q) {
            const Vec3 p = t.anatomy_point(v, {q[0], q[1], q[2]});
            return std::array<double, 3>{p.x, p.y, p.z};
        });

    py::class_<Phantom>(m, "Phantom")
        .def_readonly("series", &Phantom::series)
        .def_readonly("truth", &Phantom::truth);

    m.def(
        "generate_phantom",
        [](const std::optional<std::string> &spec_json, std::optional<std::uint64_t> seed) {
            PhantomSpec spec = spec_json ? parse_phantom_spec(*spec_json) : PhantomSpec{};
            if (seed) spec.seed = *seed;
            py::gil_scoped_release release;
            return generate_phantom(spec);
        },
        py::arg("spec_json") = py::none(), py::arg("seed") = py::none(),
        "Synthetic series with ground truth; spec_json overrides the default spec field by field.");

    m.def(
        "register_series",
        [](const ImageSeries &series, const RegistrationConfig &config) {
            py::gil_scoped_release release;
            return run_registration(series, config).stack;
        },
        py::arg("series"), py::arg("config"));
    m.def("resample_series", &resample_series, py::arg("series"), py::arg("stack"));
    m.def("subtract_baseline", &subtract_baseline, py::arg("series"));

    m.def(
        "evaluate",
        [](const std::string &method, const ImageSeries &series, const TransformStack &stack,
           const std::vector<BinaryMask> &lesion_masks, const std::optional<BinaryMask> &liver0) {
            const EvaluationReport r =
                evaluate_registration(method, series, stack, lesion_masks, liver0 ? &*liver0 : nullptr);
            return json_to_py(report_to_json(r));
        },
        py::arg("method"), py::arg("series"), py::arg("stack"), py::arg("lesion_masks"), py::arg("liver") = py::none(),
        "Evaluation report as a dict.");
    m.def(
        "residual_alignment_error",
        [](const Phantom &ph, const TransformStack &stack) {
            return residual_alignment_error(ph.truth, stack,
                                            warp_mask_to_registered(ph.truth.lesion_masks[0], stack, 0));
        },
        py::arg("phantom"), py::arg("stack"), "Mean lesion residual against the phantom truth, in voxels.");

    m.def("dice", &dice, py::arg("a"), py::arg("b"));
    m.def(
        "groupwise_dice", [](const std::vector<BinaryMask> &masks) { return groupwise_dice(masks); },
        py::arg("masks"));
    m.def(
        "temporal_smoothness_sd", [](const std::vector<double> &means) { return temporal_smoothness_sd(means); },
        py::arg("means"));
    m.def(
        "d_pca",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> samples) {
            if (samples.ndim() != 2) throw std::invalid_argument("samples must be an N x V array");
            SampleMatrix s;
            s.rows = static_cast<std::size_t>(samples.shape(0));
            s.cols = static_cast<std::size_t>(samples.shape(1));
            s.values.assign(samples.data(), samples.data() + samples.size());
            const CorrelationDecomposition c = correlation_matrix(s);
            return py::make_tuple(d_pca(c), c.eigenvalues);
        },
        py::arg("samples"), "D_PCA of an N x V sample matrix and its descending eigenvalues.");

    m.def("read_volume", &read_volume, py::arg("path"));
    m.def(
        "write_volume", [](const Volume3D &v, const std::filesystem::path &p) { write_volume(v, p); }, py::arg("volume"),
        py::arg("path"));
    m.def("read_mask", &read_mask, py::arg("path"));
    m.def("write_mask", &write_mask, py::arg("mask"), py::arg("path"));

    m.def(
        "run_cli",
        [](const std::vector<std::string> &args) {
            py::gil_scoped_release release;
            return run_cli(args);
        },
        py::arg("args"), "Runs a dcereg subcommand in-process and returns its exit code.");
}
