#include "dcereg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dcereg {

void Geometry::validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
        if (dims[a] < 1) {
            throw std::invalid_argument("volume dims must be >= 1 on every axis");
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw std::invalid_argument("volume spacing must be positive on every axis");
        }
    }
}

bool co_located(const Geometry &a, const Geometry &b) {
    if (a.dims != b.dims) {
        return false;
    }
    for (std::size_t i = 0; i < 3; ++i) {
        if (std::abs(a.spacing[i] - b.spacing[i]) > 1e-9 || std::abs(a.origin[i] - b.origin[i]) > 1e-9) {
            return false;
        }
    }
    return true;
}

Volume3D::Volume3D(const Geometry &geometry, double fill) : geometry_(geometry) {
    geometry_.validate();
    voxels_.assign(geometry_.voxel_count(), fill);
}

Volume3D::Volume3D(const Geometry &geometry, std::vector<double> voxels)
    : geometry_(geometry), voxels_(std::move(voxels)) {
    geometry_.validate();
    if (voxels_.size() != geometry_.voxel_count()) {
        throw std::invalid_argument("voxel buffer has " + std::to_string(voxels_.size()) +
                                    " entries, geometry needs " + std::to_string(geometry_.voxel_count()));
    }
}

BinaryMask::BinaryMask(const Geometry &geometry, bool fill) : geometry_(geometry) {
    geometry_.validate();
    voxels_.assign(geometry_.voxel_count(), fill ? 1 : 0);
}

BinaryMask::BinaryMask(const Geometry &geometry, std::vector<std::uint8_t> voxels)
    : geometry_(geometry), voxels_(std::move(voxels)) {
    geometry_.validate();
    if (voxels_.size() != geometry_.voxel_count()) {
        throw std::invalid_argument("mask buffer size does not match geometry");
    }
    for (auto &v : voxels_) {
        v = v != 0 ? 1 : 0;
    }
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), std::uint8_t{1}));
}

ImageSeries::ImageSeries(std::vector<Volume3D> volumes) : volumes_(std::move(volumes)) {
    if (volumes_.size() < 2) {
        throw std::invalid_argument("an image series needs at least two volumes");
    }
    for (std::size_t v = 1; v < volumes_.size(); ++v) {
        if (!co_located(volumes_[v].geometry(), volumes_[0].geometry())) {
            throw std::invalid_argument("series volume " + std::to_string(v) +
                                        " is not co-located with volume 0");
        }
    }
}

std::vector<Volume3D> subtract_baseline(const ImageSeries &series) {
    const Volume3D &baseline = series[0];
    std::vector<Volume3D> out;
    out.reserve(series.count() - 1);
    for (std::size_t v = 1; v < series.count(); ++v) {
        Volume3D diff(baseline.geometry());
        const auto src = series[v].voxels();
        const auto base = baseline.voxels();
        auto dst = diff.voxels();
        for (std::size_t n = 0; n < dst.size(); ++n) {
            dst[n] = src[n] - base[n];
        }
        out.push_back(std::move(diff));
    }
    return out;
}

double mean_intensity_in_mask(const Volume3D &volume, const BinaryMask &mask) {
    if (!co_located(volume.geometry(), mask.geometry())) {
        throw std::invalid_argument("mask geometry does not match volume");
    }
    double sum = 0.0;
    std::size_t n = 0;
    const auto vox = volume.voxels();
    for (std::size_t i = 0; i < vox.size(); ++i) {
        if (mask[i]) {
            sum += vox[i];
            ++n;
        }
    }
    if (n == 0) {
        throw std::invalid_argument("mean over an empty mask is undefined");
    }
    return sum / static_cast<double>(n);
}

}  // namespace dcereg
