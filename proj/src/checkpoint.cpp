#include "frh/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace frh {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u32(os, static_cast<std::uint32_t>(bits & 0xffffffffu));
    put_u32(os, static_cast<std::uint32_t>(bits >> 32));
}

double get_f64(std::istream& is) {
    const std::uint64_t lo = get_u32(is);
    const std::uint64_t hi = get_u32(is);
    const std::uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    const std::uint32_t n = get_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return s;
}

void put_blocks(std::ostream& os, const std::vector<NamedBlock>& blocks) {
    put_u32(os, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        put_string(os, b.name);
        put_u32(os, static_cast<std::uint32_t>(b.shape.size()));
        std::size_t numel = 1;
        for (int d : b.shape) {
            put_u32(os, static_cast<std::uint32_t>(d));
            numel *= static_cast<std::size_t>(d);
        }
        if (numel != b.data.size())
            throw std::runtime_error("checkpoint: block shape/data mismatch for " + b.name);
        for (double v : b.data) put_f64(os, v);
    }
}

std::vector<NamedBlock> get_blocks(std::istream& is) {
    const std::uint32_t count = get_u32(is);
    std::vector<NamedBlock> blocks(count);
    for (auto& b : blocks) {
        b.name = get_string(is);
        const std::uint32_t rank = get_u32(is);
        std::size_t numel = 1;
        b.shape.resize(rank);
        for (std::uint32_t r = 0; r < rank; ++r) {
            b.shape[r] = static_cast<int>(get_u32(is));
            numel *= static_cast<std::size_t>(b.shape[r]);
        }
        b.data.resize(numel);
        for (auto& v : b.data) v = get_f64(is);
    }
    return blocks;
}

constexpr char kMagic[4] = {'F', 'R', 'H', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(ckpt.config.joints));
    put_u32(os, static_cast<std::uint32_t>(ckpt.config.classes));
    put_u32(os, static_cast<std::uint32_t>(ckpt.config.base_channels));
    put_u32(os, static_cast<std::uint32_t>(ckpt.config.temporal_kernel));
    put_u32(os, static_cast<std::uint32_t>(ckpt.config.temporal_kernel_2));
    put_u32(os, static_cast<std::uint32_t>(ckpt.topology.joints));
    for (int p : ckpt.topology.parent) put_u32(os, static_cast<std::uint32_t>(p));
    put_string(os, ckpt.meta_json);
    put_blocks(os, ckpt.params);
    put_blocks(os, ckpt.state);
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) throw std::runtime_error("checkpoint: version mismatch");
    Checkpoint ckpt;
    ckpt.config.joints = static_cast<int>(get_u32(is));
    ckpt.config.classes = static_cast<int>(get_u32(is));
    ckpt.config.base_channels = static_cast<int>(get_u32(is));
    ckpt.config.temporal_kernel = static_cast<int>(get_u32(is));
    ckpt.config.temporal_kernel_2 = static_cast<int>(get_u32(is));
    ckpt.topology.joints = static_cast<int>(get_u32(is));
    ckpt.topology.parent.resize(static_cast<std::size_t>(ckpt.topology.joints));
    for (auto& p : ckpt.topology.parent) p = static_cast<int>(get_u32(is));
    ckpt.meta_json = get_string(is);
    ckpt.params = get_blocks(is);
    ckpt.state = get_blocks(is);
    return ckpt;
}

}  // namespace frh
