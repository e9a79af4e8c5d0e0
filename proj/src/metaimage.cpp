#include "dcereg/metaimage.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace dcereg {

std::string to_string(ElementType t) {
    switch (t) {
        case ElementType::met_short: return "MET_SHORT";
        case ElementType::met_float: return "MET_FLOAT";
        case ElementType::met_double: return "MET_DOUBLE";
    }
    return "MET_DOUBLE";
}

std::size_t element_size(ElementType t) {
    switch (t) {
        case ElementType::met_short: return 2;
        case ElementType::met_float: return 4;
        case ElementType::met_double: return 8;
    }
    return 8;
}

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string &s) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (l == "true" || l == "1") return true;
    if (l == "false" || l == "0") return false;
    throw std::runtime_error("bad boolean in MetaImage header: " + s);
}

template <class T>
T triple(const std::string &s, const std::string &key) {
    std::istringstream is(s);
    T out;
    if (!(is >> out[0] >> out[1] >> out[2])) {
        throw std::runtime_error("MetaImage field " + key + " needs three values");
    }
    return out;
}

template <class T>
T load_le(const char *p) {
    T v;
    std::memcpy(&v, p, sizeof v);
    if constexpr (std::endian::native == std::endian::big) {
        auto *b = reinterpret_cast<unsigned char *>(&v);
        std::reverse(b, b + sizeof v);
    }
    return v;
}

template <class T>
void store_le(char *p, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto *b = reinterpret_cast<unsigned char *>(&v);
        std::reverse(b, b + sizeof v);
    }
    std::memcpy(p, &v, sizeof v);
}

std::string format_triple(const Vec3 &v) {
    std::ostringstream os;
    os.precision(17);
    os << v.x << ' ' << v.y << ' ' << v.z;
    return os.str();
}

}  // namespace

MetaImageHeader read_metaimage_header(const std::filesystem::path &mhd) {
    std::ifstream is(mhd);
    if (!is) throw std::runtime_error("cannot open MetaImage header '" + mhd.string() + "'");
    std::map<std::string, std::string> fields;
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        fields[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto need = [&](const std::string &k) -> const std::string & {
        auto it = fields.find(k);
        if (it == fields.end()) throw std::runtime_error("MetaImage header '" + mhd.string() + "' lacks " + k);
        return it->second;
    };
    MetaImageHeader h;
    h.ndims = std::stoi(need("NDims"));
    if (h.ndims != 3) throw std::runtime_error("only 3D MetaImage volumes are supported");
    h.dim_size = triple<Index3>(need("DimSize"), "DimSize");
    h.element_spacing = fields.count("ElementSpacing") ? triple<Vec3>(fields["ElementSpacing"], "ElementSpacing")
                                                       : Vec3{1.0, 1.0, 1.0};
    h.offset = fields.count("Offset") ? triple<Vec3>(fields["Offset"], "Offset") : Vec3{};
    const std::string &type = need("ElementType");
    if (type == "MET_SHORT") h.element_type = ElementType::met_short;
    else if (type == "MET_FLOAT") h.element_type = ElementType::met_float;
    else if (type == "MET_DOUBLE") h.element_type = ElementType::met_double;
    else throw std::runtime_error("unsupported ElementType " + type);
    for (const char *key : {"ElementByteOrderMSB", "BinaryDataByteOrderMSB"}) {
        if (fields.count(key) && parse_bool(fields[key])) {
            throw std::runtime_error("big-endian MetaImage data is not supported");
        }
    }
    if (fields.count("CompressedData") && parse_bool(fields["CompressedData"])) {
        throw std::runtime_error("compressed MetaImage data is not supported");
    }
    h.element_data_file = need("ElementDataFile");
    return h;
}

Volume3D read_volume(const std::filesystem::path &mhd) {
    const MetaImageHeader h = read_metaimage_header(mhd);
    Geometry g{h.dim_size, h.element_spacing, h.offset};
    g.validate();
    const std::filesystem::path raw = mhd.parent_path() / h.element_data_file;
    std::ifstream is(raw, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open raw data '" + raw.string() + "'");
    const std::string blob((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const std::size_t es = element_size(h.element_type);
    const std::size_t expected = g.voxel_count() * es;
    if (blob.size() != expected) {
        throw std::runtime_error("raw data '" + raw.string() + "' has " + std::to_string(blob.size()) +
                                 " bytes, header implies " + std::to_string(expected));
    }
    std::vector<double> voxels(g.voxel_count());
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const char *p = blob.data() + i * es;
        switch (h.element_type) {
            case ElementType::met_short: voxels[i] = load_le<std::int16_t>(p); break;
            case ElementType::met_float: voxels[i] = load_le<float>(p); break;
            case ElementType::met_double: voxels[i] = load_le<double>(p); break;
        }
    }
    return Volume3D(g, std::move(voxels));
}

void write_volume(const Volume3D &v, const std::filesystem::path &mhd, ElementType type) {
    std::filesystem::path raw = mhd;
    raw.replace_extension(".raw");
    const Geometry &g = v.geometry();
    {
        std::ofstream os(mhd);
        if (!os) throw std::runtime_error("cannot write '" + mhd.string() + "'");
        os << "ObjectType = Image\n"
           << "NDims = 3\n"
           << "BinaryData = True\n"
           << "BinaryDataByteOrderMSB = False\n"
           << "CompressedData = False\n"
           << "DimSize = " << g.dims.x << ' ' << g.dims.y << ' ' << g.dims.z << '\n'
           << "ElementSpacing = " << format_triple(g.spacing) << '\n'
           << "Offset = " << format_triple(g.origin) << '\n'
           << "ElementType = " << to_string(type) << '\n'
           << "ElementByteOrderMSB = False\n"
           << "ElementDataFile = " << raw.filename().string() << '\n';
    }
    const std::size_t es = element_size(type);
    std::string blob(v.size() * es, '\0');
    const auto vox = v.voxels();
    for (std::size_t i = 0; i < vox.size(); ++i) {
        char *p = blob.data() + i * es;
        switch (type) {
            case ElementType::met_short: {
                const double r = std::clamp(std::round(vox[i]), -32768.0, 32767.0);
                store_le<std::int16_t>(p, static_cast<std::int16_t>(r));
                break;
            }
            case ElementType::met_float: store_le<float>(p, static_cast<float>(vox[i])); break;
            case ElementType::met_double: store_le<double>(p, vox[i]); break;
        }
    }
    std::ofstream os(raw, std::ios::binary);
    os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!os) throw std::runtime_error("cannot write '" + raw.string() + "'");
}

BinaryMask read_mask(const std::filesystem::path &mhd) {
    const Volume3D v = read_volume(mhd);
    std::vector<std::uint8_t> bits(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) bits[i] = v[i] != 0.0 ? 1 : 0;
    return BinaryMask(v.geometry(), std::move(bits));
}

void write_mask(const BinaryMask &m, const std::filesystem::path &mhd) {
    Volume3D v(m.geometry());
    for (std::size_t i = 0; i < m.size(); ++i) v[i] = m[i] ? 1.0 : 0.0;
    write_volume(v, mhd, ElementType::met_short);
}

std::filesystem::path indexed_path(const std::filesystem::path &dir, const std::string &prefix, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%02zu.mhd", index);
    return dir / (prefix + buf);
}

std::vector<std::filesystem::path> list_indexed(const std::filesystem::path &dir, const std::string &prefix) {
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("'" + dir.string() + "' is not a directory");
    }
    const std::regex pattern(prefix + "_([0-9]+)\\.mhd");
    std::vector<std::pair<int, std::filesystem::path>> found;
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) found.emplace_back(std::stoi(m[1]), entry.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<std::filesystem::path> out;
    for (auto &f : found) out.push_back(std::move(f.second));
    return out;
}

}  // namespace dcereg
