#include "frh/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "frh/rng.hpp"

namespace frh {

int SkeletonTopology::root() const {
    for (int v = 0; v < joints; ++v)
        if (parent[static_cast<std::size_t>(v)] == v) return v;
    return -1;
}

void SkeletonTopology::validate() const {
    if (joints <= 0 || static_cast<int>(parent.size()) != joints)
        throw std::invalid_argument("topology: bad joint count");
    int roots = 0;
    for (int v = 0; v < joints; ++v) {
        const int p = parent[static_cast<std::size_t>(v)];
        if (p < 0 || p >= joints) throw std::invalid_argument("topology: parent out of range");
        if (p == v) ++roots;
    }
    if (roots != 1) throw std::invalid_argument("topology: must have exactly one root");
    // connectivity: walk each joint up to the root
    for (int v = 0; v < joints; ++v) {
        int cur = v, steps = 0;
        while (parent[static_cast<std::size_t>(cur)] != cur) {
            cur = parent[static_cast<std::size_t>(cur)];
            if (++steps > joints) throw std::invalid_argument("topology: cycle detected");
        }
    }
}

Modality modality_from_string(const std::string& s) {
    if (s == "joint") return Modality::kJoint;
    if (s == "bone") return Modality::kBone;
    if (s == "joint_motion") return Modality::kJointMotion;
    if (s == "bone_motion") return Modality::kBoneMotion;
    throw std::invalid_argument("unknown modality: " + s);
}

std::string modality_to_string(Modality m) {
    switch (m) {
        case Modality::kJoint: return "joint";
        case Modality::kBone: return "bone";
        case Modality::kJointMotion: return "joint_motion";
        case Modality::kBoneMotion: return "bone_motion";
    }
    return "?";
}

namespace {

// One joint coordinate curve: sum of 3 low-frequency sinusoids over s in [0,1].
struct Sinusoids {
    double amp[3], freq[3], phase[3];
    double eval(double s) const {
        double y = 0.0;
        for (int h = 0; h < 3; ++h)
            y += amp[h] * std::sin(2.0 * M_PI * freq[h] * s + phase[h]);
        return y;
    }
};

struct ClassTemplate {
    std::vector<Sinusoids> curves;  // V*3
    bool reversed = false;          // evaluate at 1-s
    std::vector<double> offset;     // V*3 constant displacement
};

Sinusoids random_sinusoids(Rng& rng) {
    Sinusoids s{};
    for (int h = 0; h < 3; ++h) {
        s.amp[h] = rng.uniform(-0.5, 0.5);
        s.freq[h] = rng.uniform(0.3, 2.0);
        s.phase[h] = rng.uniform(0.0, 2.0 * M_PI);
    }
    return s;
}

}  // namespace

SkeletonDataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed,
                                   DatasetManifest* manifest_out) {
    const int k = cfg.classes, v = cfg.joints, t = cfg.frames;
    if (k < 2 * (cfg.spatial_pairs + cfg.temporal_pairs) || v < 4 || t < 8 ||
        cfg.samples_per_class < 1 || cfg.noise_std < 0.0 || cfg.spatial_pairs < 0 ||
        cfg.temporal_pairs < 0)
        throw std::invalid_argument("generate_synthetic: infeasible config");

    Rng rng(seed);

    SkeletonDataset ds;
    ds.topology.joints = v;
    ds.topology.parent.resize(static_cast<std::size_t>(v));
    ds.topology.parent[0] = 0;
    for (int j = 1; j < v; ++j) ds.topology.parent[static_cast<std::size_t>(j)] = rng.uniform_int(0, j - 1);

    DatasetManifest manifest;
    manifest.classes = k;
    manifest.joints = v;
    manifest.frames_canonical = t;
    manifest.seed = seed;
    manifest.per_class_counts.assign(static_cast<std::size_t>(k), cfg.samples_per_class);
    for (int c = 0; c < k; ++c) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "class_%02d", c);
        manifest.class_names.emplace_back(buf);
    }

    // class templates: temporal pairs first, then spatial pairs, then free classes
    std::vector<ClassTemplate> templates(static_cast<std::size_t>(k));
    int next = 0;
    for (int p = 0; p < cfg.temporal_pairs; ++p) {
        const int a = next, b = next + 1;
        next += 2;
        auto& ta = templates[static_cast<std::size_t>(a)];
        ta.curves.reserve(static_cast<std::size_t>(v) * 3);
        for (int i = 0; i < v * 3; ++i) ta.curves.push_back(random_sinusoids(rng));
        auto& tb = templates[static_cast<std::size_t>(b)];
        tb.curves = ta.curves;
        tb.reversed = true;
        manifest.ambiguity_map.push_back({a, b, AmbiguityAxis::kTemporal});
    }
    for (int p = 0; p < cfg.spatial_pairs; ++p) {
        const int a = next, b = next + 1;
        next += 2;
        auto& ta = templates[static_cast<std::size_t>(a)];
        for (int i = 0; i < v * 3; ++i) ta.curves.push_back(random_sinusoids(rng));
        auto& tb = templates[static_cast<std::size_t>(b)];
        tb.curves = ta.curves;
        tb.offset.assign(static_cast<std::size_t>(v) * 3, 0.0);
        // constant displacement on a random 20% joint subset
        const int n_moved = std::max(1, (v + 4) / 5);
        std::vector<int> joints_idx(static_cast<std::size_t>(v));
        for (int j = 0; j < v; ++j) joints_idx[static_cast<std::size_t>(j)] = j;
        rng.shuffle(joints_idx);
        double disp[3];
        for (double& d : disp) d = rng.uniform(0.15, 0.35) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        for (int j = 0; j < n_moved; ++j)
            for (int c = 0; c < 3; ++c)
                tb.offset[static_cast<std::size_t>(joints_idx[static_cast<std::size_t>(j)]) * 3 + c] = disp[c];
        manifest.ambiguity_map.push_back({a, b, AmbiguityAxis::kSpatial});
    }
    for (; next < k; ++next) {
        auto& tpl = templates[static_cast<std::size_t>(next)];
        for (int i = 0; i < v * 3; ++i) tpl.curves.push_back(random_sinusoids(rng));
    }

    ds.samples.reserve(static_cast<std::size_t>(k) * cfg.samples_per_class);
    for (int c = 0; c < k; ++c) {
        const auto& tpl = templates[static_cast<std::size_t>(c)];
        for (int s = 0; s < cfg.samples_per_class; ++s) {
            SkeletonSequence seq;
            seq.frames = t;
            seq.joints = v;
            seq.label = c;
            seq.coords.resize(static_cast<std::size_t>(t) * v * 3);
            for (int tt = 0; tt < t; ++tt) {
                // reversal via the integer frame index keeps the time-reversed
                // member bit-identical to its partner's reversed frames
                const int eff = tpl.reversed ? t - 1 - tt : tt;
                const double pos = static_cast<double>(eff) / (t - 1);
                for (int j = 0; j < v; ++j)
                    for (int cc = 0; cc < 3; ++cc) {
                        double val = tpl.curves[static_cast<std::size_t>(j) * 3 + cc].eval(pos);
                        if (!tpl.offset.empty()) val += tpl.offset[static_cast<std::size_t>(j) * 3 + cc];
                        if (cfg.noise_std > 0.0) val += rng.normal(0.0, cfg.noise_std);
                        seq.at(tt, j, cc) = static_cast<float>(val);
                    }
            }
            ds.samples.push_back(std::move(seq));
        }
    }

    if (manifest_out) *manifest_out = std::move(manifest);
    return ds;
}

SkeletonSequence resample_frames(const SkeletonSequence& seq, int t_out) {
    if (t_out < 2) throw std::invalid_argument("resample_frames: need at least 2 frames");
    SkeletonSequence out;
    out.frames = t_out;
    out.joints = seq.joints;
    out.label = seq.label;
    out.coords.resize(static_cast<std::size_t>(t_out) * seq.joints * 3);
    for (int i = 0; i < t_out; ++i) {
        const double pos = static_cast<double>(i) * (seq.frames - 1) / (t_out - 1);
        const int lo = std::min(static_cast<int>(pos), seq.frames - 2);
        const double frac = pos - lo;
        for (int j = 0; j < seq.joints; ++j)
            for (int c = 0; c < 3; ++c) {
                const double a = seq.at(lo, j, c), b = seq.at(lo + 1, j, c);
                out.at(i, j, c) = frac == 0.0 ? static_cast<float>(a)
                                              : static_cast<float>(a + frac * (b - a));
            }
    }
    return out;
}

}  // namespace frh
