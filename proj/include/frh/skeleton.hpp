#pragma once

// Synthetic skeleton sequences with controlled spatial/temporal ambiguity,
// temporal resampling and the joint/bone/motion modality transforms.

#include <cstdint>
#include <string>
#include <vector>

#include "frh/tensor.hpp"

namespace frh {

struct SkeletonTopology {
    int joints = 0;                // V
    std::vector<int> parent;       // parent[root] == root

    int root() const;
    void validate() const;         // tree with exactly one root
};

struct SkeletonSequence {
    int frames = 0;                          // T
    int joints = 0;                          // V
    std::vector<float> coords;               // T x V x 3 row-major
    int label = 0;

    float& at(int t, int v, int c) { return coords[(static_cast<std::size_t>(t) * joints + v) * 3 + c]; }
    float at(int t, int v, int c) const { return coords[(static_cast<std::size_t>(t) * joints + v) * 3 + c]; }
};

enum class Modality { kJoint, kBone, kJointMotion, kBoneMotion };

Modality modality_from_string(const std::string& s);
std::string modality_to_string(Modality m);

enum class AmbiguityAxis { kSpatial, kTemporal };

struct AmbiguousPair {
    int class_a = 0;
    int class_b = 0;
    AmbiguityAxis axis = AmbiguityAxis::kSpatial;
};

struct DatasetManifest {
    int classes = 0;               // K
    int joints = 0;                // V
    int frames_canonical = 64;
    std::vector<std::string> class_names;
    std::vector<int> per_class_counts;
    std::uint64_t seed = 0;
    std::vector<AmbiguousPair> ambiguity_map;
};

struct SkeletonDataset {
    SkeletonTopology topology;
    std::vector<SkeletonSequence> samples;
};

struct SyntheticConfig {
    int classes = 10;              // K
    int joints = 15;               // V
    int frames = 64;               // T
    int samples_per_class = 100;
    int spatial_pairs = 2;
    int temporal_pairs = 2;
    double noise_std = 0.05;
};

// Smooth per-class sinusoid templates plus per-sample Gaussian noise.
// Temporal-ambiguous pairs share a template with one member time-reversed;
// spatial-ambiguous pairs share a template with one member offset by a
// constant displacement on a 20% joint subset. Deterministic given seed.
SkeletonDataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed,
                                   DatasetManifest* manifest_out = nullptr);

// Per-coordinate linear interpolation on the normalized time axis; endpoints
// are preserved exactly and T_out == T is the identity.
SkeletonSequence resample_frames(const SkeletonSequence& seq, int t_out);

// Channel-first [3, T, V] view of a sequence under the chosen modality.
template <class T>
Tensor<T> to_modality(const SkeletonSequence& seq, const SkeletonTopology& topo,
                      Modality m) {
    if (topo.joints != seq.joints)
        throw std::invalid_argument("to_modality: topology/sequence joint mismatch");
    const int tn = seq.frames, v = seq.joints;
    auto coord = [&](int t, int j, int c) { return static_cast<T>(seq.at(t, j, c)); };
    auto bone = [&](int t, int j, int c) {
        return coord(t, j, c) - coord(t, topo.parent[static_cast<std::size_t>(j)], c);
    };
    std::vector<T> out(static_cast<std::size_t>(3) * tn * v);
    auto store = [&](int c, int t, int j, T val) {
        out[(static_cast<std::size_t>(c) * tn + t) * v + j] = val;
    };
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < tn; ++t)
            for (int j = 0; j < v; ++j) {
                T val;
                switch (m) {
                    case Modality::kJoint:
                        val = coord(t, j, c);
                        break;
                    case Modality::kBone:
                        val = bone(t, j, c);
                        break;
                    case Modality::kJointMotion:
                        val = t + 1 < tn ? coord(t + 1, j, c) - coord(t, j, c) : T(0);
                        break;
                    case Modality::kBoneMotion:
                        val = t + 1 < tn ? bone(t + 1, j, c) - bone(t, j, c) : T(0);
                        break;
                }
                store(c, t, j, val);
            }
    return Tensor<T>::from({3, tn, v}, std::move(out));
}

// Bit-exact binary dataset file ("SKL1") plus a JSON manifest at
// path + ".json".
void write_dataset(const std::string& path, const SkeletonDataset& dataset,
                   const DatasetManifest& manifest);
SkeletonDataset read_dataset(const std::string& path, DatasetManifest* manifest_out = nullptr);

}  // namespace frh
