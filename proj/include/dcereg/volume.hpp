#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dcereg/geometry.hpp"

namespace dcereg {

/// True when two lattices agree on dims exactly and on spacing/origin to 1e-9 mm.
bool co_located(const Geometry &a, const Geometry &b);

/// Scalar 3D image in double precision, x-fastest voxel order.
class Volume3D {
  public:
    Volume3D() = default;
    /// Zero-filled volume on `geometry`.
    explicit Volume3D(const Geometry &geometry, double fill = 0.0);
    /// Takes ownership of `voxels`; size must equal the voxel count.
    Volume3D(const Geometry &geometry, std::vector<double> voxels);

    const Geometry &geometry() const { return geometry_; }
    const Index3 &dims() const { return geometry_.dims; }
    const Vec3 &spacing() const { return geometry_.spacing; }
    const Vec3 &origin() const { return geometry_.origin; }
    std::size_t size() const { return voxels_.size(); }

    double at(int i, int j, int k) const { return voxels_[geometry_.linear_index(i, j, k)]; }
    double &at(int i, int j, int k) { return voxels_[geometry_.linear_index(i, j, k)]; }
    double operator[](std::size_t n) const { return voxels_[n]; }
    double &operator[](std::size_t n) { return voxels_[n]; }

    std::span<const double> voxels() const { return voxels_; }
    std::span<double> voxels() { return voxels_; }

    Vec3 world_to_voxel(const Vec3 &p) const { return geometry_.world_to_voxel(p); }
    Vec3 voxel_to_world(const Vec3 &c) const { return geometry_.voxel_to_world(c); }

  private:
    Geometry geometry_;
    std::vector<double> voxels_;
};

/// Boolean voxel mask sharing the volume lattice.
class BinaryMask {
  public:
    BinaryMask() = default;
    explicit BinaryMask(const Geometry &geometry, bool fill = false);
    BinaryMask(const Geometry &geometry, std::vector<std::uint8_t> voxels);

    const Geometry &geometry() const { return geometry_; }
    std::size_t size() const { return voxels_.size(); }
    bool at(int i, int j, int k) const { return voxels_[geometry_.linear_index(i, j, k)] != 0; }
    void set(int i, int j, int k, bool v) { voxels_[geometry_.linear_index(i, j, k)] = v ? 1 : 0; }
    bool operator[](std::size_t n) const { return voxels_[n] != 0; }
    void set(std::size_t n, bool v) { voxels_[n] = v ? 1 : 0; }
    std::span<const std::uint8_t> voxels() const { return voxels_; }

    std::size_t count() const;
    bool empty() const { return count() == 0; }

  private:
    Geometry geometry_;
    std::vector<std::uint8_t> voxels_;
};

/// Ordered, co-located DCE time series. Index 0 is the non-contrast baseline.
class ImageSeries {
  public:
    ImageSeries() = default;
    /// Throws std::invalid_argument for fewer than two volumes or mixed geometry.
    explicit ImageSeries(std::vector<Volume3D> volumes);

    std::size_t count() const { return volumes_.size(); }
    const Volume3D &operator[](std::size_t v) const { return volumes_[v]; }
    const std::vector<Volume3D> &volumes() const { return volumes_; }
    const Geometry &geometry() const { return volumes_.front().geometry(); }
    auto begin() const { return volumes_.begin(); }
    auto end() const { return volumes_.end(); }

  private:
    std::vector<Volume3D> volumes_;
};

/// Volumes 1..V-1 minus volume 0, voxelwise; signed output.
std::vector<Volume3D> subtract_baseline(const ImageSeries &series);

/// Arithmetic mean of voxels under `mask`. Throws on empty mask or geometry mismatch.
double mean_intensity_in_mask(const Volume3D &volume, const BinaryMask &mask);

}  // namespace dcereg
