#include "dcereg/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dcereg/bspline_kernel.hpp"

namespace dcereg {

namespace {

constexpr double kPole = -0.26794919243112270;  // sqrt(3) - 2

double initial_causal(const double *c, int n, std::ptrdiff_t stride) {
    const int horizon = 30;
    if (n > horizon) {
        double zn = kPole;
        double sum = c[0];
        for (int k = 1; k < horizon; ++k) {
            sum += zn * c[k * stride];
            zn *= kPole;
        }
        return sum;
    }
    double zn = kPole;
    const double iz = 1.0 / kPole;
    double z2n = std::pow(kPole, n - 1);
    double sum = c[0] + z2n * c[(n - 1) * stride];
    z2n *= z2n * iz;
    for (int k = 1; k <= n - 2; ++k) {
        sum += (zn + z2n) * c[k * stride];
        zn *= kPole;
        z2n *= iz;
    }
    return sum / (1.0 - zn * zn);
}

void prefilter_line(double *c, int n, std::ptrdiff_t stride) {
    const double gain = (1.0 - kPole) * (1.0 - 1.0 / kPole);
    for (int k = 0; k < n; ++k) c[k * stride] *= gain;
    c[0] = initial_causal(c, n, stride);
    for (int k = 1; k < n; ++k) c[k * stride] += kPole * c[(k - 1) * stride];
    c[(n - 1) * stride] = (kPole / (kPole * kPole - 1.0)) * (kPole * c[(n - 2) * stride] + c[(n - 1) * stride]);
    for (int k = n - 2; k >= 0; --k) c[k * stride] = kPole * (c[(k + 1) * stride] - c[k * stride]);
}

inline int mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

struct AxisTaps {
    int index[4];
    double w[4];
    double dw[4];
};

inline AxisTaps axis_taps(double u, int n) {
    const CubicTaps t = cubic_taps(u);
    AxisTaps a;
    const int first = t.first;
    if (first >= 0 && first + 3 < n) {
        for (int k = 0; k < 4; ++k) a.index[k] = first + k;
    } else {
        for (int k = 0; k < 4; ++k) a.index[k] = mirror(first + k, n);
    }
    for (int k = 0; k < 4; ++k) {
        a.w[k] = t.w[k];
        a.dw[k] = t.dw[k];
    }
    return a;
}

}  // namespace

BsplineCoefficientVolume::BsplineCoefficientVolume(const Volume3D &source)
    : geometry_(source.geometry()), coefficients_(source.voxels().begin(), source.voxels().end()) {
    const Index3 d = geometry_.dims;
    if (d.x < 4 || d.y < 4 || d.z < 4) {
        throw std::invalid_argument("cubic prefilter needs at least 4 voxels per axis");
    }
    double *base = coefficients_.data();
    const std::ptrdiff_t sx = 1;
    const std::ptrdiff_t sy = d.x;
    const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(d.x) * d.y;
    for (int k = 0; k < d.z; ++k)
        for (int j = 0; j < d.y; ++j) prefilter_line(base + k * sz + j * sy, d.x, sx);
    for (int k = 0; k < d.z; ++k)
        for (int i = 0; i < d.x; ++i) prefilter_line(base + k * sz + i, d.y, sy);
    for (int j = 0; j < d.y; ++j)
        for (int i = 0; i < d.x; ++i) prefilter_line(base + j * sy + i, d.z, sz);
}

InterpolatedSample interpolate(const BsplineCoefficientVolume &c, const Vec3 &u) {
    const Geometry &g = c.geometry();
    InterpolatedSample out;
    out.valid = g.contains_voxel_coord(u);
    const AxisTaps ax = axis_taps(u.x, g.dims.x);
    const AxisTaps ay = axis_taps(u.y, g.dims.y);
    const AxisTaps az = axis_taps(u.z, g.dims.z);
    const double *coef = c.coefficients().data();
    const std::size_t nx = static_cast<std::size_t>(g.dims.x);
    const std::size_t nxy = nx * static_cast<std::size_t>(g.dims.y);
    double v = 0.0, gx = 0.0, gy = 0.0, gz = 0.0;
    for (int kc = 0; kc < 4; ++kc) {
        const double *plane = coef + static_cast<std::size_t>(az.index[kc]) * nxy;
        double pv = 0.0, px = 0.0, py = 0.0;
        for (int jc = 0; jc < 4; ++jc) {
            const double *row = plane + static_cast<std::size_t>(ay.index[jc]) * nx;
            double rv = 0.0, rx = 0.0;
            for (int ic = 0; ic < 4; ++ic) {
                const double cv = row[ax.index[ic]];
                rv += ax.w[ic] * cv;
                rx += ax.dw[ic] * cv;
            }
            pv += ay.w[jc] * rv;
            px += ay.w[jc] * rx;
            py += ay.dw[jc] * rv;
        }
        v += az.w[kc] * pv;
        gx += az.w[kc] * px;
        gy += az.w[kc] * py;
        gz += az.dw[kc] * pv;
    }
    out.value = v;
    out.gradient = {gx / g.spacing.x, gy / g.spacing.y, gz / g.spacing.z};
    return out;
}

double interpolate_value(const BsplineCoefficientVolume &c, const Vec3 &u, bool *valid) {
    const Geometry &g = c.geometry();
    if (valid) *valid = g.contains_voxel_coord(u);
    const AxisTaps ax = axis_taps(u.x, g.dims.x);
    const AxisTaps ay = axis_taps(u.y, g.dims.y);
    const AxisTaps az = axis_taps(u.z, g.dims.z);
    const double *coef = c.coefficients().data();
    const std::size_t nx = static_cast<std::size_t>(g.dims.x);
    const std::size_t nxy = nx * static_cast<std::size_t>(g.dims.y);
    double v = 0.0;
    for (int kc = 0; kc < 4; ++kc) {
        const double *plane = coef + static_cast<std::size_t>(az.index[kc]) * nxy;
        double pv = 0.0;
        for (int jc = 0; jc < 4; ++jc) {
            const double *row = plane + static_cast<std::size_t>(ay.index[jc]) * nx;
            pv += ay.w[jc] * (ax.w[0] * row[ax.index[0]] + ax.w[1] * row[ax.index[1]] +
                              ax.w[2] * row[ax.index[2]] + ax.w[3] * row[ax.index[3]]);
        }
        v += az.w[kc] * pv;
    }
    return v;
}

namespace {

void smooth_axis(std::vector<double> &data, const Index3 &d, std::size_t axis, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * k * k / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        sum += w;
    }
    for (double &w : kernel) w /= sum;

    const int n = d[axis];
    const std::ptrdiff_t strides[3] = {1, d.x, static_cast<std::ptrdiff_t>(d.x) * d.y};
    const std::ptrdiff_t stride = strides[axis];
    Index3 other = d;
    other[axis] = 1;
    std::vector<double> line(static_cast<std::size_t>(n));
    for (int k = 0; k < other.z; ++k) {
        for (int j = 0; j < other.y; ++j) {
            for (int i = 0; i < other.x; ++i) {
                double *base = data.data() + i * strides[0] + j * strides[1] + k * strides[2];
                for (int t = 0; t < n; ++t) line[t] = base[t * stride];
                for (int t = 0; t < n; ++t) {
                    double acc = 0.0;
                    for (int o = -radius; o <= radius; ++o) {
                        acc += kernel[static_cast<std::size_t>(o + radius)] * line[mirror(t + o, n)];
                    }
                    base[t * stride] = acc;
                }
            }
        }
    }
}

}  // namespace

Volume3D gaussian_smooth(const Volume3D &v, const Vec3 &sigma_voxels) {
    std::vector<double> data(v.voxels().begin(), v.voxels().end());
    for (std::size_t a = 0; a < 3; ++a) smooth_axis(data, v.dims(), a, sigma_voxels[a]);
    return Volume3D(v.geometry(), std::move(data));
}

double trilinear(const Volume3D &v, const Vec3 &u) {
    const Index3 &d = v.dims();
    int i0[3];
    double f[3];
    for (std::size_t a = 0; a < 3; ++a) {
        const double c = std::clamp(u[a], 0.0, static_cast<double>(d[a] - 1));
        i0[a] = std::min(static_cast<int>(std::floor(c)), std::max(d[a] - 2, 0));
        f[a] = c - i0[a];
    }
    double acc = 0.0;
    for (int c = 0; c < 2; ++c) {
        const int k = std::min(i0[2] + c, d.z - 1);
        const double wz = c ? f[2] : 1.0 - f[2];
        for (int b = 0; b < 2; ++b) {
            const int j = std::min(i0[1] + b, d.y - 1);
            const double wy = b ? f[1] : 1.0 - f[1];
            for (int a = 0; a < 2; ++a) {
                const int i = std::min(i0[0] + a, d.x - 1);
                const double wx = a ? f[0] : 1.0 - f[0];
                acc += wx * wy * wz * v.at(i, j, k);
            }
        }
    }
    return acc;
}

std::vector<PyramidLevel> build_pyramid(const Volume3D &v, int levels) {
    if (levels < 1) {
        throw std::invalid_argument("pyramid needs at least one level");
    }
    std::vector<PyramidLevel> out;
    out.reserve(static_cast<std::size_t>(levels));
    for (int k = 0; k < levels; ++k) {
        const int scale = 1 << (levels - 1 - k);
        if (scale == 1) {
            out.push_back({k, v, {1, 1, 1}});
            continue;
        }
        const double sigma = scale / 2.0;
        const Volume3D smooth = gaussian_smooth(v, {sigma, sigma, sigma});
        Index3 factor;
        Geometry g = v.geometry();
        for (std::size_t a = 0; a < 3; ++a) {
            int f = scale;
            while (f > 1 && v.dims()[a] / f < 8) f /= 2;
            factor[a] = f;
            g.dims[a] = v.dims()[a] / f;
            g.spacing[a] = v.spacing()[a] * f;
            g.origin[a] = v.origin()[a] + 0.5 * (f - 1) * v.spacing()[a];
        }
        Volume3D level(g);
        for (int kk = 0; kk < g.dims.z; ++kk) {
            for (int j = 0; j < g.dims.y; ++j) {
                for (int i = 0; i < g.dims.x; ++i) {
                    const Vec3 src = v.world_to_voxel(g.voxel_center(i, j, kk));
                    level.at(i, j, kk) = trilinear(smooth, src);
                }
            }
        }
        out.push_back({k, std::move(level), factor});
    }
    return out;
}

}  // namespace dcereg
