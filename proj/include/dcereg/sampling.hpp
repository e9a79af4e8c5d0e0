#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dcereg/volume.hpp"

namespace dcereg {

/// Axis-aligned physical box, optionally restricted to a body mask.
struct SamplingDomain {
    Vec3 lower;
    Vec3 upper;
    std::optional<BinaryMask> mask;

    /// Image box shrunk by `margin_voxels` on every side.
    static SamplingDomain eroded(const Geometry &g, double margin_voxels);
    bool contains(const Vec3 &p) const;
};

/// Uniform random points in the domain (rejection sampling against the mask
/// when present). Deterministic for a given seed; throws std::invalid_argument
/// when the box is degenerate or the mask rejects nearly everything.
std::vector<Vec3> draw_samples(const SamplingDomain &domain, std::size_t count, std::uint64_t seed);

/// Mixes (seed, resolution, iteration) into a per-iteration sampling seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t resolution, std::uint64_t iteration);

}  // namespace dcereg
