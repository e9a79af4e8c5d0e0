#include "dcereg/phantom.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace dcereg {

double enhancement_curve(const EnhancementParams &p, double t) {
    if (t <= p.onset) return p.baseline;
    const double s = (t - p.onset) / p.tau;
    return p.baseline + p.amplitude * std::pow(s, p.shape) * std::exp(p.shape * (1.0 - s));
}

void PhantomSpec::validate() const {
    geometry.validate();
    if (volumes < 2) throw std::invalid_argument("phantom needs at least two volumes");
    if (breath_hold_groups.empty() ||
        std::accumulate(breath_hold_groups.begin(), breath_hold_groups.end(), 0) != volumes) {
        throw std::invalid_argument("breath-hold group sizes must sum to the volume count");
    }
    for (int g : breath_hold_groups) {
        if (g < 1) throw std::invalid_argument("breath-hold groups must be non-empty");
    }
    if (breath_hold_groups.front() != 1) {
        throw std::invalid_argument("the reference breath hold (group 0) must hold exactly volume 0");
    }
    if (!group_shifts_mm.empty() && group_shifts_mm.size() != breath_hold_groups.size()) {
        throw std::invalid_argument("group_shifts_mm must list one shift per breath-hold group");
    }
    if (!group_shifts_mm.empty() && norm(group_shifts_mm.front()) != 0.0) {
        throw std::invalid_argument("the reference breath hold must not be shifted");
    }
    const double min_axis = std::min({organ.semi_axes.x, organ.semi_axes.y, organ.semi_axes.z});
    if (!(min_axis > 0.0) || !(lesion_radius_mm > 0.0)) {
        throw std::invalid_argument("organ axes and lesion radius must be positive");
    }
    const double quarter_extent = 0.5 * min_axis;  // a quarter of the smallest full extent
    double largest_shift = max_shift_mm;
    for (const Vec3 &s : group_shifts_mm) largest_shift = std::max(largest_shift, norm(s));
    if (largest_shift > quarter_extent) {
        throw std::invalid_argument("shift magnitudes must stay below a quarter of the organ extent");
    }
    // Lesion sphere strictly inside the organ ellipsoid: check its extreme points.
    for (int a = 0; a < 3; ++a) {
        for (double sgn : {-1.0, 1.0}) {
            Vec3 p = lesion_center;
            p[static_cast<std::size_t>(a)] += sgn * lesion_radius_mm;
            const Vec3 q = divide(p - organ.center, organ.semi_axes);
            if (dot(q, q) >= 1.0) throw std::invalid_argument("lesion must lie strictly inside the organ");
        }
    }
    if (noise_sd < 0.0 || perturbation_mm < 0.0 || volume_jitter_mm < 0.0 || edge_width_mm <= 0.0) {
        throw std::invalid_argument("noise, perturbation and edge width must be non-negative");
    }
    for (const auto *e : {&background, &body_tissue, &organ_tissue, &lesion_tissue, &vessel_tissue}) {
        if (e->onset < 1.0 || e->tau <= 0.0 || e->shape <= 0.0) {
            throw std::invalid_argument("enhancement onset must be >= 1 with positive tau and shape");
        }
    }
}

namespace {

double unit(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double symmetric(std::mt19937_64 &rng) { return 2.0 * unit(rng) - 1.0; }
double gaussian(std::mt19937_64 &rng) {
    double u1 = unit(rng);
    while (u1 <= 0.0) u1 = unit(rng);
    const double u2 = unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Signed distance approximation: exact for spheres, radial scaling otherwise.
double ellipsoid_distance(const Vec3 &p, const Vec3 &center, const Vec3 &axes) {
    const Vec3 d = p - center;
    const double q = norm(divide(d, axes));
    if (q < 1e-12) return -std::min({axes.x, axes.y, axes.z});
    return (q - 1.0) * norm(d) / q;
}

double cylinder_distance(const Vec3 &p, const Vec3 &center, double ax, double ay) {
    return ellipsoid_distance({p.x, p.y, 0.0}, {center.x, center.y, 0.0}, {ax, ay, 1.0});
}

double membership(double signed_distance, double width) {
    return 0.5 * (1.0 - std::tanh(signed_distance / width));
}

struct TissueIntensities {
    double background, body, organ, lesion, vessel;
};

double render(const PhantomSpec &s, const TissueIntensities &ti, const Vec3 &a) {
    const double w = s.edge_width_mm;
    double value = ti.background;
    value += membership(cylinder_distance(a, s.body.center, s.body.semi_axes.x, s.body.semi_axes.y), w) *
             (ti.body - value);
    value += membership(ellipsoid_distance(a, s.organ.center, s.organ.semi_axes), w) * (ti.organ - value);
    value += membership(norm(a - s.lesion_center) - s.lesion_radius_mm, w) * (ti.lesion - value);
    value += membership(cylinder_distance(a, s.vessel_center, s.vessel_radius_mm, s.vessel_radius_mm), w) *
             (ti.vessel - value);
    return value;
}

Vec3 random_shift(std::mt19937_64 &rng, double max_shift) {
    // Mostly cranio-caudal (z), some antero-posterior (y), little left-right (x).
    const double magnitude = max_shift * (0.5 + 0.5 * unit(rng));
    Vec3 dir{0.25 * symmetric(rng), 0.5 * symmetric(rng), unit(rng) < 0.5 ? -1.0 : 1.0};
    return dir * (magnitude / norm(dir));
}

}  // namespace

Phantom generate_phantom(const PhantomSpec &spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    const Geometry &g = spec.geometry;
    const std::size_t V = static_cast<std::size_t>(spec.volumes);
    const std::size_t groups = spec.breath_hold_groups.size();

    PhantomTruth truth;
    truth.group_shifts_mm = spec.group_shifts_mm;
    if (truth.group_shifts_mm.empty()) {
        truth.group_shifts_mm.push_back({});
        for (std::size_t k = 1; k < groups; ++k) truth.group_shifts_mm.push_back(random_shift(rng, spec.max_shift_mm));
    }
    for (std::size_t k = 0; k < groups; ++k) {
        for (int n = 0; n < spec.breath_hold_groups[k]; ++n) truth.group_of_volume.push_back(static_cast<int>(k));
    }

    const Vec3 grid{spec.perturbation_grid_mm, spec.perturbation_grid_mm, spec.perturbation_grid_mm};
    std::vector<BsplineTransform> group_motion;
    for (std::size_t k = 0; k < groups; ++k) {
        BsplineTransform t = BsplineTransform::for_domain(g, grid);
        if (k > 0) {
            for (std::size_t cp = 0; cp < t.control_point_count(); ++cp) {
                t.set_coefficient(cp, truth.group_shifts_mm[k] + Vec3{symmetric(rng), symmetric(rng), symmetric(rng)} *
                                                                     spec.perturbation_mm);
            }
        }
        group_motion.push_back(std::move(t));
    }
    for (std::size_t v = 0; v < V; ++v) {
        BsplineTransform t = group_motion[static_cast<std::size_t>(truth.group_of_volume[v])];
        if (v > 0) {
            for (std::size_t cp = 0; cp < t.control_point_count(); ++cp) {
                t.set_coefficient(cp, t.coefficient(cp) + Vec3{symmetric(rng), symmetric(rng), symmetric(rng)} *
                                                              spec.volume_jitter_mm);
            }
        }
        truth.motion.push_back(std::move(t));
    }

    std::vector<Volume3D> noisy;
    for (std::size_t v = 0; v < V; ++v) {
        const double t = static_cast<double>(v);
        const TissueIntensities ti{enhancement_curve(spec.background, t), enhancement_curve(spec.body_tissue, t),
                                   enhancement_curve(spec.organ_tissue, t), enhancement_curve(spec.lesion_tissue, t),
                                   enhancement_curve(spec.vessel_tissue, t)};
        Volume3D clean(g);
        BinaryMask lesion(g);
        BinaryMask organ(g);
        for (int k = 0; k < g.dims.z; ++k) {
            for (int j = 0; j < g.dims.y; ++j) {
                for (int i = 0; i < g.dims.x; ++i) {
                    const Vec3 a = truth.anatomy_point(v, g.voxel_center(i, j, k));
                    clean.at(i, j, k) = render(spec, ti, a);
                    lesion.set(i, j, k, norm(a - spec.lesion_center) <= spec.lesion_radius_mm);
                    const Vec3 q = divide(a - spec.organ.center, spec.organ.semi_axes);
                    organ.set(i, j, k, dot(q, q) <= 1.0);
                }
            }
        }
        Volume3D image = clean;
        if (spec.noise_sd > 0.0) {
            for (double &x : image.voxels()) x += spec.noise_sd * gaussian(rng);
        }
        truth.clean.push_back(std::move(clean));
        truth.lesion_masks.push_back(std::move(lesion));
        truth.organ_masks.push_back(std::move(organ));
        noisy.push_back(std::move(image));
    }
    return Phantom{ImageSeries(std::move(noisy)), std::move(truth)};
}

double residual_alignment_error(const PhantomTruth &truth, const TransformStack &stack,
                                const BinaryMask &lesion) {
    const Geometry &g = lesion.geometry();
    const std::size_t V = truth.motion.size();
    if (stack.volume_count() != V) {
        throw std::invalid_argument("stack and phantom truth disagree on the volume count");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t idx = 0; idx < lesion.size(); ++idx) {
        if (!lesion[idx]) continue;
        const Index3 l = g.lattice_index(idx);
        const Vec3 c = g.voxel_center(l.x, l.y, l.z);
        const Vec3 a0 = truth.anatomy_point(0, stack.map_to_volume(0, c));
        for (std::size_t v = 1; v < V; ++v) {
            const Vec3 av = truth.anatomy_point(v, stack.map_to_volume(v, c));
            sum += norm(divide(av - a0, g.spacing));
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("residual error needs a non-empty lesion mask");
    return sum / static_cast<double>(n);
}

}  // namespace dcereg
