#pragma once

// The 10-unit TGN backbone: per unit a joint-graph convolution with a
// learnable topology residual, a two-branch multi-scale temporal convolution,
// batch norm and a residual connection. Stage taps are captured after units
// 1, 5, 8 and 10.

#include <array>
#include <string>
#include <vector>

#include "frh/nn.hpp"
#include "frh/rng.hpp"
#include "frh/skeleton.hpp"
#include "frh/tensor.hpp"

namespace frh {

struct BackboneConfig {
    int joints = 25;           // V
    int classes = 60;          // K
    int base_channels = 64;    // C
    int temporal_kernel = 9;   // wide TCN branch
    int temporal_kernel_2 = 5; // narrow TCN branch

    static constexpr int kUnits = 10;
    static constexpr std::array<int, 4> kTapUnits = {1, 5, 8, 10};  // 1-indexed

    std::array<int, kUnits> channel_plan() const {
        const int c = base_channels;
        return {c, c, c, c, 2 * c, 2 * c, 2 * c, 4 * c, 4 * c, 4 * c};
    }
    static constexpr std::array<int, kUnits> stride_plan() {
        return {1, 1, 1, 1, 2, 1, 1, 2, 1, 1};
    }
    std::array<int, 4> stage_channels() const {
        const int c = base_channels;
        return {c, 2 * c, 4 * c, 4 * c};
    }
    int embedding_dim() const { return 4 * base_channels; }

    void validate() const {
        if (joints < 2 || classes < 2 || base_channels < 2 || base_channels % 2 != 0)
            throw std::invalid_argument("backbone config: invalid plan");
        if (temporal_kernel < 1 || temporal_kernel % 2 == 0 || temporal_kernel_2 < 1 ||
            temporal_kernel_2 % 2 == 0)
            throw std::invalid_argument("backbone config: temporal kernels must be odd");
    }
};

// Symmetric degree normalization D^{-1/2} (Adj + I) D^{-1/2} of the tree
// adjacency.
template <class T>
Tensor<T> normalized_adjacency(const SkeletonTopology& topo) {
    topo.validate();
    const int v = topo.joints;
    std::vector<T> a(static_cast<std::size_t>(v) * v, T(0));
    for (int j = 0; j < v; ++j) {
        a[static_cast<std::size_t>(j) * v + j] = T(1);
        const int p = topo.parent[static_cast<std::size_t>(j)];
        if (p != j) {
            a[static_cast<std::size_t>(j) * v + p] = T(1);
            a[static_cast<std::size_t>(p) * v + j] = T(1);
        }
    }
    std::vector<T> dinv(static_cast<std::size_t>(v));
    for (int j = 0; j < v; ++j) {
        T deg = T(0);
        for (int u = 0; u < v; ++u) deg += a[static_cast<std::size_t>(j) * v + u];
        dinv[static_cast<std::size_t>(j)] = T(1) / std::sqrt(deg);
    }
    for (int j = 0; j < v; ++j)
        for (int u = 0; u < v; ++u)
            a[static_cast<std::size_t>(j) * v + u] *=
                dinv[static_cast<std::size_t>(j)] * dinv[static_cast<std::size_t>(u)];
    return Tensor<T>::from({v, v}, std::move(a));
}

// Convolution + batch norm block. The convolution carries no bias: batch
// norm subtracts the per-channel mean, so a bias before it has exactly zero
// gradient and beta fills that role.
template <class T>
struct ConvBn {
    Tensor<T> weight;  // [C_out, C_in, k]
    Tensor<T> gamma, beta;
    BatchNormState<T> bn;
    int stride = 1, pad = 0;

    void init(Rng& rng, int c_in, int c_out, int k, int stride_, int pad_) {
        stride = stride_;
        pad = pad_;
        weight = detail::uniform_init<T>(rng, {c_out, c_in, k}, c_in * k);
        gamma = Tensor<T>::from({c_out}, std::vector<T>(static_cast<std::size_t>(c_out), T(1)), true);
        beta = Tensor<T>::zeros({c_out}, true);
        bn = BatchNormState<T>(c_out);
    }

    Tensor<T> forward(const Tensor<T>& x, bool training, bool update_running) {
        return batch_norm(conv1d_temporal(x, weight, stride, pad), gamma, beta, bn,
                          training, update_running);
    }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
        out.push_back({prefix + "/w", weight});
        out.push_back({prefix + "/bn_gamma", gamma});
        out.push_back({prefix + "/bn_beta", beta});
    }
    void collect_bn(const std::string& prefix, std::vector<std::pair<std::string, std::vector<T>*>>& out) {
        out.push_back({prefix + "/bn_mean", &bn.running_mean});
        out.push_back({prefix + "/bn_var", &bn.running_var});
    }
};

template <class T>
struct TGNUnit {
    int in_channels = 0, out_channels = 0, stride = 1;
    Tensor<T> delta_adj;  // [V, V], zero-initialized topology residual
    ConvBn<T> gcn;        // 1x1 channel transform after aggregation
    ConvBn<T> tcn_a_pw, tcn_a;  // wide temporal branch: 1x1 then k-wide conv
    ConvBn<T> tcn_b_pw, tcn_b;  // narrow temporal branch
    ConvBn<T> res;              // projection when shape changes
    bool has_projection = false;

    void init(Rng& rng, int v, int c_in, int c_out, int stride_, int k_wide, int k_narrow) {
        in_channels = c_in;
        out_channels = c_out;
        stride = stride_;
        const int half = c_out / 2;
        delta_adj = Tensor<T>::zeros({v, v}, true);
        gcn.init(rng, c_in, c_out, 1, 1, 0);
        tcn_a_pw.init(rng, c_out, half, 1, 1, 0);
        tcn_a.init(rng, half, half, k_wide, stride_, (k_wide - 1) / 2);
        tcn_b_pw.init(rng, c_out, half, 1, 1, 0);
        tcn_b.init(rng, half, half, k_narrow, stride_, (k_narrow - 1) / 2);
        has_projection = c_in != c_out || stride_ != 1;
        if (has_projection) res.init(rng, c_in, c_out, 1, stride_, 0);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& base_adj, bool training,
                      bool update_running) {
        auto adj = add(base_adj, delta_adj);
        auto s = relu(gcn.forward(graph_aggregate(x, adj), training, update_running));
        auto a = tcn_a.forward(relu(tcn_a_pw.forward(s, training, update_running)),
                               training, update_running);
        auto b = tcn_b.forward(relu(tcn_b_pw.forward(s, training, update_running)),
                               training, update_running);
        auto t = concat_channels(a, b);
        auto shortcut = has_projection ? res.forward(x, training, update_running) : x;
        return relu(add(t, shortcut));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
        out.push_back({prefix + "/delta_adj", delta_adj});
        gcn.collect(prefix + "/gcn", out);
        tcn_a_pw.collect(prefix + "/tcn_a_pw", out);
        tcn_a.collect(prefix + "/tcn_a", out);
        tcn_b_pw.collect(prefix + "/tcn_b_pw", out);
        tcn_b.collect(prefix + "/tcn_b", out);
        if (has_projection) res.collect(prefix + "/res", out);
    }
    void collect_bn(const std::string& prefix, std::vector<std::pair<std::string, std::vector<T>*>>& out) {
        gcn.collect_bn(prefix + "/gcn", out);
        tcn_a_pw.collect_bn(prefix + "/tcn_a_pw", out);
        tcn_a.collect_bn(prefix + "/tcn_a", out);
        tcn_b_pw.collect_bn(prefix + "/tcn_b_pw", out);
        tcn_b.collect_bn(prefix + "/tcn_b", out);
        if (has_projection) res.collect_bn(prefix + "/res", out);
    }
};

template <class T>
struct BackboneForward {
    Tensor<T> logits;                 // [N, K]
    Tensor<T> pooled;                 // [N, 4C]
    std::vector<Tensor<T>> taps;      // stage features, [N, C_i, T_i, V] x4
};

template <class T>
class Backbone {
  public:
    Backbone() = default;

    Backbone(const BackboneConfig& cfg, const SkeletonTopology& topo, std::uint64_t seed)
        : cfg_(cfg), topo_(topo) {
        cfg_.validate();
        if (topo.joints != cfg.joints)
            throw std::invalid_argument("backbone: topology joint count mismatch");
        base_adj_ = normalized_adjacency<T>(topo);
        Rng rng(seed);
        const auto channels = cfg_.channel_plan();
        const auto strides = BackboneConfig::stride_plan();
        units_.resize(BackboneConfig::kUnits);
        int c_in = 3;
        for (int u = 0; u < BackboneConfig::kUnits; ++u) {
            units_[static_cast<std::size_t>(u)].init(rng, cfg.joints, c_in,
                                                     channels[static_cast<std::size_t>(u)],
                                                     strides[static_cast<std::size_t>(u)],
                                                     cfg.temporal_kernel, cfg.temporal_kernel_2);
            c_in = channels[static_cast<std::size_t>(u)];
        }
        const int emb = cfg_.embedding_dim();
        fc_w_ = detail::uniform_init<T>(rng, {emb, cfg.classes}, emb);
        fc_b_ = detail::uniform_init<T>(rng, {cfg.classes}, emb);
    }

    // batch: [N, 3, T, V] with T divisible by 4.
    BackboneForward<T> forward(const Tensor<T>& batch, bool training,
                               bool want_taps = false, bool update_running = true) {
        if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(3) != cfg_.joints)
            throw std::invalid_argument("backbone forward: bad batch shape");
        if (batch.dim(2) % 4 != 0)
            throw std::invalid_argument("backbone forward: T must be divisible by 4");
        BackboneForward<T> out;
        Tensor<T> x = batch;
        int tap = 0;
        for (int u = 0; u < BackboneConfig::kUnits; ++u) {
            x = units_[static_cast<std::size_t>(u)].forward(x, base_adj_, training, update_running);
            if (tap < 4 && u + 1 == BackboneConfig::kTapUnits[static_cast<std::size_t>(tap)]) {
                if (want_taps) out.taps.push_back(x);
                ++tap;
            }
        }
        out.pooled = reduce_mean(x, {2, 3});
        out.logits = add_bias_axis1(matmul(out.pooled, fc_w_), fc_b_);
        return out;
    }

    std::vector<NamedParam<T>> params() {
        std::vector<NamedParam<T>> out;
        for (int u = 0; u < BackboneConfig::kUnits; ++u)
            units_[static_cast<std::size_t>(u)].collect("unit" + std::to_string(u + 1), out);
        out.push_back({"fc/w", fc_w_});
        out.push_back({"fc/b", fc_b_});
        return out;
    }

    std::vector<std::pair<std::string, std::vector<T>*>> bn_stats() {
        std::vector<std::pair<std::string, std::vector<T>*>> out;
        for (int u = 0; u < BackboneConfig::kUnits; ++u)
            units_[static_cast<std::size_t>(u)].collect_bn("unit" + std::to_string(u + 1), out);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (const auto& p : params()) n += p.tensor.numel();
        return n;
    }

    const BackboneConfig& config() const { return cfg_; }
    const SkeletonTopology& topology() const { return topo_; }
    Tensor<T>& base_adjacency() { return base_adj_; }
    std::vector<TGNUnit<T>>& units() { return units_; }

  private:
    BackboneConfig cfg_;
    SkeletonTopology topo_;
    Tensor<T> base_adj_;
    std::vector<TGNUnit<T>> units_;
    Tensor<T> fc_w_, fc_b_;
};

}  // namespace frh
