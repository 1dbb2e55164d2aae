#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "frh/skeleton.hpp"
#include "json.hpp"

namespace frh {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'L', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("dataset file: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is) {
    const std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string manifest_path(const std::string& path) { return path + ".json"; }

}  // namespace

void write_dataset(const std::string& path, const SkeletonDataset& dataset,
                   const DatasetManifest& manifest) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("dataset file: cannot open for writing: " + path);
    os.write(kMagic, 4);
    put_u32(os, kFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(manifest.classes));
    put_u32(os, static_cast<std::uint32_t>(dataset.topology.joints));
    put_u32(os, static_cast<std::uint32_t>(dataset.samples.size()));
    for (int p : dataset.topology.parent) put_u32(os, static_cast<std::uint32_t>(p));
    for (const auto& s : dataset.samples) {
        put_u32(os, static_cast<std::uint32_t>(s.label));
        put_u32(os, static_cast<std::uint32_t>(s.frames));
        for (float v : s.coords) put_f32(os, v);
    }
    if (!os) throw std::runtime_error("dataset file: write failed: " + path);
    os.close();

    nlohmann::json j;
    j["classes"] = manifest.classes;
    j["joints"] = manifest.joints;
    j["frames_canonical"] = manifest.frames_canonical;
    j["class_names"] = manifest.class_names;
    j["per_class_counts"] = manifest.per_class_counts;
    j["seed"] = manifest.seed;
    auto& pairs = j["ambiguity_map"] = nlohmann::json::array();
    for (const auto& p : manifest.ambiguity_map)
        pairs.push_back({{"class_a", p.class_a},
                         {"class_b", p.class_b},
                         {"axis", p.axis == AmbiguityAxis::kSpatial ? "spatial" : "temporal"}});
    std::ofstream ms(manifest_path(path));
    if (!ms) throw std::runtime_error("manifest: cannot open for writing");
    ms << j.dump(2) << "\n";
}

SkeletonDataset read_dataset(const std::string& path, DatasetManifest* manifest_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("dataset file: cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw std::runtime_error("dataset file: truncated file");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("dataset file: bad magic");
    const std::uint32_t version = get_u32(is);
    if (version != kFormatVersion)
        throw std::runtime_error("dataset file: version mismatch");
    const std::uint32_t k = get_u32(is);
    const std::uint32_t v = get_u32(is);
    const std::uint32_t count = get_u32(is);

    SkeletonDataset ds;
    ds.topology.joints = static_cast<int>(v);
    ds.topology.parent.resize(v);
    for (std::uint32_t j = 0; j < v; ++j) ds.topology.parent[j] = static_cast<int>(get_u32(is));
    ds.samples.resize(count);
    for (auto& s : ds.samples) {
        s.label = static_cast<int>(get_u32(is));
        if (s.label < 0 || s.label >= static_cast<int>(k))
            throw std::runtime_error("dataset file: label out of range");
        s.frames = static_cast<int>(get_u32(is));
        s.joints = static_cast<int>(v);
        s.coords.resize(static_cast<std::size_t>(s.frames) * v * 3);
        for (float& c : s.coords) c = get_f32(is);
    }

    if (manifest_out) {
        std::ifstream ms(manifest_path(path));
        if (!ms) throw std::runtime_error("manifest: cannot open: " + manifest_path(path));
        nlohmann::json j;
        ms >> j;
        DatasetManifest m;
        m.classes = j.at("classes").get<int>();
        m.joints = j.at("joints").get<int>();
        m.frames_canonical = j.at("frames_canonical").get<int>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        m.per_class_counts = j.at("per_class_counts").get<std::vector<int>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& p : j.at("ambiguity_map"))
            m.ambiguity_map.push_back(
                {p.at("class_a").get<int>(), p.at("class_b").get<int>(),
                 p.at("axis").get<std::string>() == "spatial" ? AmbiguityAxis::kSpatial
                                                              : AmbiguityAxis::kTemporal});
        *manifest_out = std::move(m);
    }
    return ds;
}

}  // namespace frh
