#pragma once

// Model checkpoint file ("FRH1"): backbone config + topology, a JSON metadata
// string, then named float64 blocks for parameters and for auxiliary state
// (optimizer momenta, batch-norm running stats, prototype banks).

#include <cstdint>
#include <string>
#include <vector>

#include "frh/backbone.hpp"
#include "frh/skeleton.hpp"

namespace frh {

struct NamedBlock {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

struct Checkpoint {
    BackboneConfig config;
    SkeletonTopology topology;
    std::string meta_json;
    std::vector<NamedBlock> params;
    std::vector<NamedBlock> state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

template <class T>
NamedBlock to_block(const std::string& name, const std::vector<int>& shape,
                    const std::vector<T>& data) {
    NamedBlock b;
    b.name = name;
    b.shape = shape;
    b.data.assign(data.begin(), data.end());
    return b;
}

template <class T>
void block_into(const NamedBlock& b, std::vector<T>& out) {
    if (out.size() != b.data.size())
        throw std::runtime_error("checkpoint: block size mismatch for " + b.name);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(b.data[i]);
}

}  // namespace frh
