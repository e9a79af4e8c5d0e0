#include "dcereg/sampling.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dcereg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Portable [0,1) double; std::uniform_real_distribution is implementation-defined.
double unit(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

SamplingDomain SamplingDomain::eroded(const Geometry &g, double margin_voxels) {
    SamplingDomain d;
    const Vec3 extent = g.extent();
    for (std::size_t a = 0; a < 3; ++a) {
        d.lower[a] = g.origin[a] + margin_voxels * g.spacing[a];
        d.upper[a] = g.origin[a] + extent[a] - margin_voxels * g.spacing[a];
    }
    return d;
}

bool SamplingDomain::contains(const Vec3 &p) const {
    for (std::size_t a = 0; a < 3; ++a) {
        if (p[a] < lower[a] || p[a] > upper[a]) return false;
    }
    if (mask) {
        const Geometry &g = mask->geometry();
        const Vec3 c = g.world_to_voxel(p);
        const int i = static_cast<int>(std::lround(c.x));
        const int j = static_cast<int>(std::lround(c.y));
        const int k = static_cast<int>(std::lround(c.z));
        if (i < 0 || j < 0 || k < 0 || i >= g.dims.x || j >= g.dims.y || k >= g.dims.z) return false;
        return mask->at(i, j, k);
    }
    return true;
}

std::vector<Vec3> draw_samples(const SamplingDomain &domain, std::size_t count, std::uint64_t seed) {
    for (std::size_t a = 0; a < 3; ++a) {
        if (!(domain.upper[a] > domain.lower[a])) {
            throw std::invalid_argument("sampling domain is empty or too small");
        }
    }
    std::mt19937_64 rng(splitmix64(seed));
    std::vector<Vec3> points;
    points.reserve(count);
    const std::size_t max_attempts = 1000 * count + 1000;
    std::size_t attempts = 0;
    while (points.size() < count) {
        if (++attempts > max_attempts) {
            throw std::invalid_argument("sampling mask covers too little of the domain");
        }
        Vec3 p;
        for (std::size_t a = 0; a < 3; ++a) {
            p[a] = domain.lower[a] + unit(rng) * (domain.upper[a] - domain.lower[a]);
        }
        if (!domain.mask || domain.contains(p)) {
            points.push_back(p);
        }
    }
    return points;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t resolution, std::uint64_t iteration) {
    return splitmix64(splitmix64(splitmix64(seed) ^ resolution) ^ iteration);
}

}  // namespace dcereg
