#include "dcereg/bspline_transform.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dcereg {

namespace {

Index3 grid_dims_for(const Geometry &domain, const Vec3 &spacing) {
    const Vec3 extent = domain.extent();
    Index3 dims;
    for (std::size_t a = 0; a < 3; ++a) {
        dims[a] = static_cast<int>(std::floor(extent[a] / spacing[a] + 1e-9)) + 4;
    }
    return dims;
}

// Coefficient array (3 values per control point) with its lattice dims.
struct CoefficientGrid {
    Index3 dims;
    std::vector<double> values;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims.y + j) * dims.x + i;
    }
};

// Dyadic refinement along one axis: fine[k] = sum_j coarse[j] * w[k - 2j + 1].
CoefficientGrid subdivide_axis(const CoefficientGrid &in, std::size_t axis, int fine_dim) {
    static constexpr double mask[5] = {1.0 / 8.0, 4.0 / 8.0, 6.0 / 8.0, 4.0 / 8.0, 1.0 / 8.0};
    CoefficientGrid out;
    out.dims = in.dims;
    out.dims[axis] = fine_dim;
    out.values.assign(3 * static_cast<std::size_t>(out.dims.x) * out.dims.y * out.dims.z, 0.0);
    for (int k = 0; k < out.dims.z; ++k) {
        for (int j = 0; j < out.dims.y; ++j) {
            for (int i = 0; i < out.dims.x; ++i) {
                Index3 fine{i, j, k};
                const int f = fine[axis];
                double acc[3] = {0.0, 0.0, 0.0};
                for (int m = -2; m <= 2; ++m) {
                    // k = 2c + m - 1  =>  c = (k - m + 1) / 2
                    const int twice = f - m + 1;
                    if (twice % 2 != 0) continue;
                    const int c = twice / 2;
                    if (c < 0 || c >= in.dims[axis]) continue;
                    Index3 src = fine;
                    src[axis] = c;
                    const std::size_t s = 3 * in.index(src.x, src.y, src.z);
                    for (int d = 0; d < 3; ++d) acc[d] += mask[m + 2] * in.values[s + d];
                }
                const std::size_t o = 3 * out.index(i, j, k);
                for (int d = 0; d < 3; ++d) out.values[o + d] = acc[d];
            }
        }
    }
    return out;
}

// Solves the cubic B-spline interpolation system (1/6, 4/6, 1/6) in place along one axis.
void interpolate_axis(CoefficientGrid &g, std::size_t axis) {
    const int n = g.dims[axis];
    if (n < 2) return;
    std::vector<double> cprime(static_cast<std::size_t>(n));
    std::vector<double> line(static_cast<std::size_t>(n));
    Index3 other_dims = g.dims;
    other_dims[axis] = 1;
    for (int k = 0; k < other_dims.z; ++k) {
        for (int j = 0; j < other_dims.y; ++j) {
            for (int i = 0; i < other_dims.x; ++i) {
                for (int d = 0; d < 3; ++d) {
                    Index3 at{i, j, k};
                    for (int t = 0; t < n; ++t) {
                        at[axis] = t;
                        line[t] = g.values[3 * g.index(at.x, at.y, at.z) + d];
                    }
                    // Thomas algorithm, sub/super diagonal 1/6, diagonal 4/6.
                    const double a = 1.0 / 6.0;
                    const double b = 4.0 / 6.0;
                    cprime[0] = a / b;
                    line[0] /= b;
                    for (int t = 1; t < n; ++t) {
                        const double denom = b - a * cprime[t - 1];
                        cprime[t] = a / denom;
                        line[t] = (line[t] - a * line[t - 1]) / denom;
                    }
                    for (int t = n - 2; t >= 0; --t) line[t] -= cprime[t] * line[t + 1];
                    for (int t = 0; t < n; ++t) {
                        at[axis] = t;
                        g.values[3 * g.index(at.x, at.y, at.z) + d] = line[t];
                    }
                }
            }
        }
    }
}

bool is_power_of_two_ratio(double ratio, int &levels) {
    const double l = std::log2(ratio);
    const double r = std::round(l);
    if (r < 0.0 || std::abs(l - r) > 1e-9) return false;
    levels = static_cast<int>(r);
    return true;
}

}  // namespace

BsplineTransform BsplineTransform::for_domain(const Geometry &domain, const Vec3 &grid_spacing) {
    domain.validate();
    for (std::size_t a = 0; a < 3; ++a) {
        if (!(grid_spacing[a] > 0.0)) {
            throw std::invalid_argument("grid spacing must be positive");
        }
    }
    const Index3 dims = grid_dims_for(domain, grid_spacing);
    const std::size_t n = static_cast<std::size_t>(dims.x) * dims.y * dims.z;
    return BsplineTransform(domain, dims, grid_spacing, domain.origin - grid_spacing,
                            std::vector<double>(3 * n, 0.0));
}

BsplineTransform::BsplineTransform(const Geometry &domain, const Index3 &grid_dims, const Vec3 &grid_spacing,
                                   const Vec3 &grid_origin, std::vector<double> coefficients)
    : domain_(domain), grid_dims_(grid_dims), grid_spacing_(grid_spacing), grid_origin_(grid_origin),
      coefficients_(std::move(coefficients)) {
    for (std::size_t a = 0; a < 3; ++a) {
        if (grid_dims_[a] < 4) {
            throw std::invalid_argument("B-spline grid needs at least 4 control points per axis");
        }
        if (!(grid_spacing_[a] > 0.0)) {
            throw std::invalid_argument("grid spacing must be positive");
        }
    }
    if (coefficients_.size() != 3 * control_point_count()) {
        throw std::invalid_argument("coefficient count does not match the control grid");
    }
}

void BsplineTransform::set_coefficient(std::size_t cp, const Vec3 &d) {
    coefficients_[3 * cp] = d.x;
    coefficients_[3 * cp + 1] = d.y;
    coefficients_[3 * cp + 2] = d.z;
}

Vec3 BsplineTransform::control_point_position(int i, int j, int k) const {
    return grid_origin_ + hadamard(Vec3{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)},
                                   grid_spacing_);
}

bool BsplineTransform::is_identity() const {
    for (double c : coefficients_) {
        if (c != 0.0) return false;
    }
    return true;
}

Vec3 BsplineTransform::displacement(const Vec3 &p) const {
    Vec3 d;
    for_each_support(p, [&](std::size_t cp, double w) {
        d.x += w * coefficients_[3 * cp];
        d.y += w * coefficients_[3 * cp + 1];
        d.z += w * coefficients_[3 * cp + 2];
    });
    return d;
}

Mat3 BsplineTransform::spatial_jacobian(const Vec3 &p) const {
    const Stencil s = stencil(p);
    Mat3 jac{};
    for (int c = 0; c < 4; ++c) {
        const int k = s.axis[2].first + c;
        if (k < 0 || k >= grid_dims_.z) continue;
        for (int b = 0; b < 4; ++b) {
            const int j = s.axis[1].first + b;
            if (j < 0 || j >= grid_dims_.y) continue;
            for (int a = 0; a < 4; ++a) {
                const int i = s.axis[0].first + a;
                if (i < 0 || i >= grid_dims_.x) continue;
                const double grad[3] = {
                    s.axis[0].dw[a] * s.axis[1].w[b] * s.axis[2].w[c] / grid_spacing_.x,
                    s.axis[0].w[a] * s.axis[1].dw[b] * s.axis[2].w[c] / grid_spacing_.y,
                    s.axis[0].w[a] * s.axis[1].w[b] * s.axis[2].dw[c] / grid_spacing_.z,
                };
                const std::size_t cp = 3 * control_point_index(i, j, k);
                for (int r = 0; r < 3; ++r) {
                    for (int q = 0; q < 3; ++q) jac[r][q] += coefficients_[cp + r] * grad[q];
                }
            }
        }
    }
    for (int r = 0; r < 3; ++r) jac[r][r] += 1.0;
    return jac;
}

BsplineTransform::Inversion BsplineTransform::invert_at(const Vec3 &q, double tol, int max_iter) const {
    Inversion out;
    out.point = q;
    for (int it = 0;; ++it) {
        const Vec3 r = apply(out.point) - q;
        out.residual = norm(r);
        out.iterations = it;
        if (out.residual < tol) {
            out.converged = true;
            return out;
        }
        if (it >= max_iter) {
            return out;
        }
        out.point -= r;
    }
}

BsplineTransform refine_grid(const BsplineTransform &coarse, const Vec3 &new_spacing) {
    const Geometry &domain = coarse.domain();
    for (std::size_t a = 0; a < 3; ++a) {
        if (new_spacing[a] > coarse.grid_spacing()[a] * (1.0 + 1e-12)) {
            throw std::invalid_argument("refine_grid cannot coarsen a transform");
        }
    }
    BsplineTransform fine = BsplineTransform::for_domain(domain, new_spacing);
    if (coarse.is_identity()) {
        return fine;
    }

    bool aligned = true;
    Index3 levels{};
    for (std::size_t a = 0; a < 3; ++a) {
        const double expected_origin = domain.origin[a] - coarse.grid_spacing()[a];
        if (std::abs(coarse.grid_origin()[a] - expected_origin) > 1e-9 ||
            !is_power_of_two_ratio(coarse.grid_spacing()[a] / new_spacing[a], levels[a])) {
            aligned = false;
        }
    }

    if (aligned) {
        CoefficientGrid g{coarse.grid_dims(), std::vector<double>(coarse.parameters().begin(),
                                                                  coarse.parameters().end())};
        for (std::size_t a = 0; a < 3; ++a) {
            double spacing = coarse.grid_spacing()[a];
            for (int l = 0; l < levels[a]; ++l) {
                spacing /= 2.0;
                Vec3 probe = new_spacing;
                probe[a] = spacing;
                Geometry tmp = domain;
                g = subdivide_axis(g, a, grid_dims_for(tmp, probe)[a]);
            }
        }
        std::copy(g.values.begin(), g.values.end(), fine.parameters().begin());
        return fine;
    }

    // General ratio: interpolate the coarse displacement at the fine control points.
    const Index3 fd = fine.grid_dims();
    CoefficientGrid g{fd, std::vector<double>(3 * fine.control_point_count())};
    for (int k = 0; k < fd.z; ++k) {
        for (int j = 0; j < fd.y; ++j) {
            for (int i = 0; i < fd.x; ++i) {
                const Vec3 d = coarse.displacement(fine.control_point_position(i, j, k));
                const std::size_t o = 3 * g.index(i, j, k);
                g.values[o] = d.x;
                g.values[o + 1] = d.y;
                g.values[o + 2] = d.z;
            }
        }
    }
    for (std::size_t a = 0; a < 3; ++a) interpolate_axis(g, a);
    std::copy(g.values.begin(), g.values.end(), fine.parameters().begin());
    return fine;
}

std::string to_string(RegistrationMode mode) {
    return mode == RegistrationMode::groupwise ? "groupwise" : "pairwise";
}

RegistrationMode registration_mode_from_string(const std::string &s) {
    if (s == "groupwise") return RegistrationMode::groupwise;
    if (s == "pairwise") return RegistrationMode::pairwise;
    throw std::invalid_argument("unknown registration method '" + s + "' (expected groupwise|pairwise)");
}

const BsplineTransform *TransformStack::for_volume(std::size_t v) const {
    if (mode == RegistrationMode::groupwise) {
        return &transforms.at(v);
    }
    if (v == 0) return nullptr;
    return &transforms.at(v - 1);
}

Vec3 TransformStack::map_to_volume(std::size_t v, const Vec3 &p) const {
    const BsplineTransform *t = for_volume(v);
    return t ? t->apply(p) : p;
}

TransformStack TransformStack::identity(RegistrationMode mode, const Geometry &domain, std::size_t volumes,
                                        const Vec3 &grid_spacing) {
    TransformStack stack;
    stack.mode = mode;
    const std::size_t n = mode == RegistrationMode::groupwise ? volumes : volumes - 1;
    for (std::size_t v = 0; v < n; ++v) {
        stack.transforms.push_back(BsplineTransform::for_domain(domain, grid_spacing));
    }
    return stack;
}

namespace {

std::string triple(const Vec3 &v) {
    std::ostringstream os;
    os.precision(17);
    os << v.x << ' ' << v.y << ' ' << v.z;
    return os.str();
}

std::string triple(const Index3 &v) {
    return std::to_string(v.x) + ' ' + std::to_string(v.y) + ' ' + std::to_string(v.z);
}

template <class T>
T parse_triple(const std::map<std::string, std::string> &fields, const std::string &key) {
    auto it = fields.find(key);
    if (it == fields.end()) {
        throw std::runtime_error("transform header is missing '" + key + "'");
    }
    std::istringstream is(it->second);
    T out;
    if (!(is >> out[0] >> out[1] >> out[2])) {
        throw std::runtime_error("transform header field '" + key + "' is malformed");
    }
    return out;
}

void write_le_doubles(std::ostream &os, std::span<const double> values) {
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        if constexpr (std::endian::native == std::endian::big) {
            bits = __builtin_bswap64(bits);
        }
        os.write(reinterpret_cast<const char *>(&bits), sizeof bits);
    }
}

}  // namespace

void write_transform(const BsplineTransform &t, RegistrationMode mode, std::size_t volume_index,
                     const std::filesystem::path &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    os << "BsplineTransform\n"
       << "format_version = 1\n"
       << "mode = " << to_string(mode) << '\n'
       << "volume_index = " << volume_index << '\n'
       << "grid_dims = " << triple(t.grid_dims()) << '\n'
       << "grid_spacing = " << triple(t.grid_spacing()) << '\n'
       << "grid_origin = " << triple(t.grid_origin()) << '\n'
       << "domain_dims = " << triple(t.domain().dims) << '\n'
       << "domain_spacing = " << triple(t.domain().spacing) << '\n'
       << "domain_origin = " << triple(t.domain().origin) << '\n'
       << "coefficient_count = " << t.parameter_count() << '\n'
       << "data = float64_le xyz_per_control_point x_fastest\n"
       << "EndHeader\n";
    write_le_doubles(os, t.parameters());
    if (!os) {
        throw std::runtime_error("failed writing transform '" + path.string() + "'");
    }
}

LoadedTransform read_transform(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open transform '" + path.string() + "'");
    }
    std::string line;
    std::getline(is, line);
    if (line != "BsplineTransform") {
        throw std::runtime_error("'" + path.string() + "' is not a B-spline transform file");
    }
    std::map<std::string, std::string> fields;
    bool ended = false;
    while (std::getline(is, line)) {
        if (line == "EndHeader") {
            ended = true;
            break;
        }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) {
            throw std::runtime_error("malformed transform header line: " + line);
        }
        fields[line.substr(0, eq)] = line.substr(eq + 3);
    }
    if (!ended) {
        throw std::runtime_error("transform header is not terminated");
    }
    if (fields["format_version"] != "1") {
        throw std::runtime_error("unsupported transform format_version");
    }
    Geometry domain;
    domain.dims = parse_triple<Index3>(fields, "domain_dims");
    domain.spacing = parse_triple<Vec3>(fields, "domain_spacing");
    domain.origin = parse_triple<Vec3>(fields, "domain_origin");
    const auto dims = parse_triple<Index3>(fields, "grid_dims");
    const auto spacing = parse_triple<Vec3>(fields, "grid_spacing");
    const auto origin = parse_triple<Vec3>(fields, "grid_origin");
    const std::size_t count = std::stoull(fields.at("coefficient_count"));
    std::vector<double> coefficients(count);
    for (double &c : coefficients) {
        std::uint64_t bits;
        if (!is.read(reinterpret_cast<char *>(&bits), sizeof bits)) {
            throw std::runtime_error("transform coefficient block is truncated");
        }
        if constexpr (std::endian::native == std::endian::big) {
            bits = __builtin_bswap64(bits);
        }
        std::memcpy(&c, &bits, sizeof bits);
    }
    LoadedTransform out{BsplineTransform(domain, dims, spacing, origin, std::move(coefficients)),
                        registration_mode_from_string(fields.at("mode")),
                        static_cast<std::size_t>(std::stoull(fields.at("volume_index")))};
    return out;
}

}  // namespace dcereg
