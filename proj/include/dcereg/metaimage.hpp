#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dcereg/volume.hpp"

namespace dcereg {

enum class ElementType { met_short, met_float, met_double };

std::string to_string(ElementType t);
std::size_t element_size(ElementType t);

struct MetaImageHeader {
    int ndims = 3;
    Index3 dim_size;
    Vec3 element_spacing;
    Vec3 offset;
    ElementType element_type = ElementType::met_double;
    bool element_byte_order_msb = false;
    std::string element_data_file;
};

/// Parses a .mhd header. Throws std::runtime_error on unknown ElementType,
/// big-endian data, or missing fields.
MetaImageHeader read_metaimage_header(const std::filesystem::path &mhd);

/// Integer types are widened to double. The raw blob length must match exactly.
Volume3D read_volume(const std::filesystem::path &mhd);
/// Writes <stem>.mhd and <stem>.raw next to each other.
void write_volume(const Volume3D &v, const std::filesystem::path &mhd, ElementType type = ElementType::met_double);

/// Nonzero voxels are inside.
BinaryMask read_mask(const std::filesystem::path &mhd);
/// Stored as MET_SHORT 0/1.
void write_mask(const BinaryMask &m, const std::filesystem::path &mhd);

/// `<prefix>_<NN>.mhd`, two-digit volume index.
std::filesystem::path indexed_path(const std::filesystem::path &dir, const std::string &prefix, std::size_t index);

/// All `<prefix>_NN.mhd` files in `dir`, in index order.
std::vector<std::filesystem::path> list_indexed(const std::filesystem::path &dir, const std::string &prefix);

}  // namespace dcereg
