#pragma once

// Feature refinement head: spatial-temporal decoupling of tapped backbone
// features, EMA class prototypes over confident (TP) samples, per-batch
// FN/FP ambiguous centers, and the multi-level contrastive loss with the
// compensation/penalty calibration terms.
//
// Gradient policy: prototypes, ambiguous centers and the confidence weight
// p_ik are constants; only the anchor feature carries gradient.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "frh/nn.hpp"
#include "frh/rng.hpp"
#include "frh/tensor.hpp"

namespace frh {

struct FRHeadConfig {
    int hidden = 256;                 // C_h
    double temperature = 0.1;         // tau
    double ema_alpha = 0.9;           // EMA momentum
    std::array<double, 4> lambdas = {0.1, 0.2, 0.5, 1.0};
    double w_cl = 0.1;
    std::array<bool, 4> enabled_stages = {true, true, true, true};
    bool decouple = true;             // two ST branches vs single pooled feature
    bool tp_only_anchors = false;

    void validate() const {
        if (!(temperature > 0.0) || ema_alpha < 0.0 || ema_alpha >= 1.0 || hidden <= 0)
            throw std::invalid_argument("fr head config: invalid");
        for (double l : lambdas)
            if (l < 0.0) throw std::invalid_argument("fr head config: negative lambda");
    }
    int branches() const { return decouple ? 2 : 1; }
    bool any_stage() const {
        for (bool e : enabled_stages)
            if (e) return true;
        return false;
    }
};

// ---- batch partition ---------------------------------------------------------

struct BatchPartition {
    int classes = 0;
    std::vector<int> pred;                  // argmax prediction per sample
    std::vector<std::vector<int>> tp, fn, fp;  // per-class index sets
};

// pred = row argmax (lowest index wins ties); TP/FN/FP per the usual
// label-vs-prediction definitions.
template <class T>
BatchPartition partition_batch(const std::vector<T>& scores, int n, int k,
                               const std::vector<int>& labels) {
    BatchPartition part;
    part.classes = k;
    part.pred.resize(static_cast<std::size_t>(n));
    part.tp.assign(static_cast<std::size_t>(k), {});
    part.fn.assign(static_cast<std::size_t>(k), {});
    part.fp.assign(static_cast<std::size_t>(k), {});
    for (int i = 0; i < n; ++i) {
        const T* row = scores.data() + static_cast<std::size_t>(i) * k;
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        part.pred[static_cast<std::size_t>(i)] = best;
        const int lab = labels[static_cast<std::size_t>(i)];
        if (best == lab) {
            part.tp[static_cast<std::size_t>(lab)].push_back(i);
        } else {
            part.fn[static_cast<std::size_t>(lab)].push_back(i);
            part.fp[static_cast<std::size_t>(best)].push_back(i);
        }
    }
    return part;
}

// ---- prototypes and centers --------------------------------------------------

template <class T>
struct PrototypeBank {
    int classes = 0, dim = 0;
    std::vector<T> protos;            // K x dim
    std::vector<std::uint8_t> initialized;

    PrototypeBank() = default;
    PrototypeBank(int k, int d)
        : classes(k), dim(d), protos(static_cast<std::size_t>(k) * d, T(0)),
          initialized(static_cast<std::size_t>(k), 0) {}

    const T* row(int k) const { return protos.data() + static_cast<std::size_t>(k) * dim; }
    T* row(int k) { return protos.data() + static_cast<std::size_t>(k) * dim; }
};

// P_k <- (1-alpha) * mean(TP features of k) + alpha * P_k; a class's first
// update assigns the batch mean outright.
template <class T>
void update_prototypes(PrototypeBank<T>& bank, const std::vector<T>& features,
                       const BatchPartition& part, T alpha) {
    for (int k = 0; k < bank.classes; ++k) {
        const auto& tp = part.tp[static_cast<std::size_t>(k)];
        if (tp.empty()) continue;
        std::vector<T> mean(static_cast<std::size_t>(bank.dim), T(0));
        for (int i : tp) {
            const T* f = features.data() + static_cast<std::size_t>(i) * bank.dim;
            for (int d = 0; d < bank.dim; ++d) mean[static_cast<std::size_t>(d)] += f[d];
        }
        const T inv = T(1) / static_cast<T>(tp.size());
        T* p = bank.row(k);
        if (!bank.initialized[static_cast<std::size_t>(k)]) {
            for (int d = 0; d < bank.dim; ++d) p[d] = mean[static_cast<std::size_t>(d)] * inv;
            bank.initialized[static_cast<std::size_t>(k)] = 1;
        } else {
            for (int d = 0; d < bank.dim; ++d)
                p[d] = (T(1) - alpha) * mean[static_cast<std::size_t>(d)] * inv + alpha * p[d];
        }
    }
}

template <class T>
struct AmbiguousCenters {
    int classes = 0, dim = 0;
    std::vector<std::uint8_t> has_fn, has_fp;
    std::vector<T> mu_fn, mu_fp;  // K x dim, rows valid only where has_* set

    const T* fn_row(int k) const { return mu_fn.data() + static_cast<std::size_t>(k) * dim; }
    const T* fp_row(int k) const { return mu_fp.data() + static_cast<std::size_t>(k) * dim; }
};

// Per-class means over the FN/FP sets of the current batch; absent when the
// set is empty. Recomputed fresh every batch (no global ambiguous state).
template <class T>
AmbiguousCenters<T> ambiguous_centers(const std::vector<T>& features, int dim,
                                      const BatchPartition& part) {
    AmbiguousCenters<T> c;
    c.classes = part.classes;
    c.dim = dim;
    c.has_fn.assign(static_cast<std::size_t>(part.classes), 0);
    c.has_fp.assign(static_cast<std::size_t>(part.classes), 0);
    c.mu_fn.assign(static_cast<std::size_t>(part.classes) * dim, T(0));
    c.mu_fp.assign(static_cast<std::size_t>(part.classes) * dim, T(0));
    auto fill = [&](const std::vector<std::vector<int>>& sets, std::vector<std::uint8_t>& has,
                    std::vector<T>& mu) {
        for (int k = 0; k < part.classes; ++k) {
            const auto& set = sets[static_cast<std::size_t>(k)];
            if (set.empty()) continue;
            has[static_cast<std::size_t>(k)] = 1;
            T* row = mu.data() + static_cast<std::size_t>(k) * dim;
            for (int i : set) {
                const T* f = features.data() + static_cast<std::size_t>(i) * dim;
                for (int d = 0; d < dim; ++d) row[d] += f[d];
            }
            const T inv = T(1) / static_cast<T>(set.size());
            for (int d = 0; d < dim; ++d) row[d] *= inv;
        }
    };
    fill(part.fn, c.has_fn, c.mu_fn);
    fill(part.fp, c.has_fp, c.mu_fp);
    return c;
}

// ---- calibration terms -------------------------------------------------------

namespace detail {

template <class T>
Tensor<T> constant_vector(const T* data, int dim) {
    return Tensor<T>::from({dim}, std::vector<T>(data, data + dim));
}

inline bool sample_in(const std::vector<int>& set, int i) {
    for (int j : set)
        if (j == i) return true;
    return false;
}

}  // namespace detail

// phi_i = 1 - dis(F_i, mu_FN^k) for TP anchors with FN samples present, else 0.
template <class T>
Tensor<T> compensation(const Tensor<T>& anchor, const AmbiguousCenters<T>& centers,
                       const BatchPartition& part, int sample, int label) {
    if (!detail::sample_in(part.tp[static_cast<std::size_t>(label)], sample) ||
        !centers.has_fn[static_cast<std::size_t>(label)])
        return Tensor<T>::scalar(T(0));
    auto mu = detail::constant_vector(centers.fn_row(label), centers.dim);
    return add_scalar(scale(cosine_distance(anchor, mu), T(-1)), T(1));
}

// psi_i = 1 + dis(F_i, mu_FP^k) for TP anchors with FP samples present, else 0.
template <class T>
Tensor<T> penalty(const Tensor<T>& anchor, const AmbiguousCenters<T>& centers,
                  const BatchPartition& part, int sample, int label) {
    if (!detail::sample_in(part.tp[static_cast<std::size_t>(label)], sample) ||
        !centers.has_fp[static_cast<std::size_t>(label)])
        return Tensor<T>::scalar(T(0));
    auto mu = detail::constant_vector(centers.fp_row(label), centers.dim);
    return add_scalar(cosine_distance(anchor, mu), T(1));
}

// ---- the CL loss -------------------------------------------------------------

// Anchor CL loss. Both negative-log terms share the denominator
// e^{dis(F,P_k)/tau - (1-p)psi} + sum_{l != k} e^{dis(F,P_l)/tau}; the
// numerators carry psi and phi respectively. Uninitialized other-class rows
// are excluded from the sum; an uninitialized own-class prototype makes the
// anchor skip (nullopt).
template <class T>
std::optional<Tensor<T>> cl_loss(const Tensor<T>& anchor, int label,
                                 const PrototypeBank<T>& bank, const Tensor<T>& phi,
                                 const Tensor<T>& psi, T p_ik, T tau) {
    if (!bank.initialized[static_cast<std::size_t>(label)]) return std::nullopt;
    const T inv_tau = T(1) / tau;
    const T w = T(1) - p_ik;

    auto own = detail::constant_vector(bank.row(label), bank.dim);
    auto d_own = scale(cosine_distance(anchor, own), inv_tau);
    auto a_psi = sub(d_own, scale(psi, w));  // appears in both denominators
    auto a_phi = sub(d_own, scale(phi, w));

    std::vector<Tensor<T>> denom_terms{a_psi};
    for (int l = 0; l < bank.classes; ++l) {
        if (l == label || !bank.initialized[static_cast<std::size_t>(l)]) continue;
        auto other = detail::constant_vector(bank.row(l), bank.dim);
        denom_terms.push_back(scale(cosine_distance(anchor, other), inv_tau));
    }
    T shift = denom_terms[0].value();
    for (const auto& t : denom_terms) shift = std::max(shift, t.value());
    Tensor<T> expsum;
    for (const auto& t : denom_terms) {
        auto e = exp(add_scalar(t, -shift));
        expsum = expsum.defined() ? add(expsum, e) : e;
    }
    auto lse = add_scalar(log(expsum), shift);
    // -log(e^{a_psi}/denom) - log(e^{a_phi}/denom) = 2*lse - a_psi - a_phi
    return sub(scale(lse, T(2)), add(a_psi, a_phi));
}

// ---- the head ----------------------------------------------------------------

template <class T>
struct Decoupler {
    Tensor<T> spatial_w, spatial_b;    // 1x1 conv stage channels -> C_h
    Tensor<T> temporal_w, temporal_b;

    void init(Rng& rng, int stage_channels, int hidden) {
        spatial_w = detail::uniform_init<T>(rng, {hidden, stage_channels, 1}, stage_channels);
        spatial_b = detail::uniform_init<T>(rng, {hidden}, stage_channels);
        temporal_w = detail::uniform_init<T>(rng, {hidden, stage_channels, 1}, stage_channels);
        temporal_b = detail::uniform_init<T>(rng, {hidden}, stage_channels);
    }
};

template <class T>
struct StageContext {
    AmbiguousCenters<T> centers[2];  // per branch
};

// Frozen per-batch constants for the CL losses: partition, confidence
// weights and the per-branch ambiguous centers.
template <class T>
struct HeadContext {
    BatchPartition part;
    std::vector<T> p_label;  // p_{i,label(i)}
    std::vector<int> labels;
    std::vector<StageContext<T>> stages;  // one per backbone stage (4)
};

template <class T>
struct HeadLosses {
    Tensor<T> weighted_cl;             // sum of lambda_i * L_CL^i over enabled stages
    std::array<double, 4> stage_values = {0, 0, 0, 0};
    int skipped_anchors = 0;
};

template <class T>
class FRHead {
  public:
    FRHead() = default;

    FRHead(const FRHeadConfig& cfg, const std::array<int, 4>& stage_channels,
           int classes, std::uint64_t seed)
        : cfg_(cfg), stage_channels_(stage_channels), classes_(classes) {
        cfg_.validate();
        Rng rng(seed);
        for (int s = 0; s < 4; ++s) {
            const int dim = cfg_.decouple ? cfg_.hidden : stage_channels[static_cast<std::size_t>(s)];
            if (cfg_.enabled_stages[static_cast<std::size_t>(s)]) {
                if (cfg_.decouple)
                    decouplers_[static_cast<std::size_t>(s)].init(
                        rng, stage_channels[static_cast<std::size_t>(s)], cfg_.hidden);
                for (int b = 0; b < cfg_.branches(); ++b)
                    banks_[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)] =
                        PrototypeBank<T>(classes, dim);
            }
        }
    }

    // Branch features per stage from the tapped feature maps. Spatial branch
    // pools over T then projects channels to C_h and pools over V; temporal
    // branch is symmetric. Without decoupling, the single branch is the
    // stage-mean feature.
    std::vector<std::vector<Tensor<T>>> decouple(const std::vector<Tensor<T>>& taps) {
        std::vector<std::vector<Tensor<T>>> out(4);
        for (int s = 0; s < 4; ++s) {
            if (!cfg_.enabled_stages[static_cast<std::size_t>(s)]) continue;
            const Tensor<T>& f = taps[static_cast<std::size_t>(s)];
            if (!cfg_.decouple) {
                out[static_cast<std::size_t>(s)].push_back(reduce_mean(f, {2, 3}));
                continue;
            }
            auto& dec = decouplers_[static_cast<std::size_t>(s)];
            const int n = f.dim(0), c = f.dim(1), t = f.dim(2), v = f.dim(3);
            auto spatial_in = reshape(reduce_mean(f, {2}), {n, c, v, 1});
            auto f_s = add_bias_axis1(
                reduce_mean(conv1d_temporal(spatial_in, dec.spatial_w, 1, 0), {2, 3}),
                dec.spatial_b);
            auto temporal_in = reshape(reduce_mean(f, {3}), {n, c, t, 1});
            auto f_t = add_bias_axis1(
                reduce_mean(conv1d_temporal(temporal_in, dec.temporal_w, 1, 0), {2, 3}),
                dec.temporal_b);
            out[static_cast<std::size_t>(s)] = {f_s, f_t};
        }
        return out;
    }

    HeadContext<T> build_context(const std::vector<std::vector<Tensor<T>>>& feats,
                                 const BatchPartition& part, const std::vector<int>& labels,
                                 const std::vector<T>& probs) {
        HeadContext<T> ctx;
        ctx.part = part;
        ctx.labels = labels;
        ctx.p_label.resize(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i)
            ctx.p_label[i] = probs[i * static_cast<std::size_t>(classes_) +
                                   static_cast<std::size_t>(labels[i])];
        ctx.stages.resize(4);
        for (int s = 0; s < 4; ++s) {
            if (!cfg_.enabled_stages[static_cast<std::size_t>(s)]) continue;
            for (int b = 0; b < cfg_.branches(); ++b) {
                const Tensor<T>& f = feats[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)];
                ctx.stages[static_cast<std::size_t>(s)].centers[b] =
                    ambiguous_centers(f.data(), f.dim(1), part);
            }
        }
        return ctx;
    }

    // L_CL^i per Eq-style per-branch sum, batch-mean over anchors; returns the
    // lambda-weighted multi-level sum.
    HeadLosses<T> losses(const std::vector<std::vector<Tensor<T>>>& feats,
                         const HeadContext<T>& ctx) {
        HeadLosses<T> out;
        for (int s = 0; s < 4; ++s) {
            if (!cfg_.enabled_stages[static_cast<std::size_t>(s)]) continue;
            Tensor<T> stage_sum;
            for (int b = 0; b < cfg_.branches(); ++b) {
                auto branch = branch_loss(feats[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)],
                                          banks_[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)],
                                          ctx, ctx.stages[static_cast<std::size_t>(s)].centers[b],
                                          out.skipped_anchors);
                stage_sum = stage_sum.defined() ? add(stage_sum, branch) : branch;
            }
            out.stage_values[static_cast<std::size_t>(s)] =
                static_cast<double>(stage_sum.value());
            auto weighted = scale(stage_sum, static_cast<T>(cfg_.lambdas[static_cast<std::size_t>(s)]));
            out.weighted_cl =
                out.weighted_cl.defined() ? add(out.weighted_cl, weighted) : weighted;
        }
        if (!out.weighted_cl.defined()) out.weighted_cl = Tensor<T>::scalar(T(0));
        return out;
    }

    // EMA prototype maintenance from detached feature values.
    void update_banks(const std::vector<std::vector<Tensor<T>>>& feats,
                      const BatchPartition& part) {
        for (int s = 0; s < 4; ++s) {
            if (!cfg_.enabled_stages[static_cast<std::size_t>(s)]) continue;
            for (int b = 0; b < cfg_.branches(); ++b)
                update_prototypes(banks_[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)],
                                  feats[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)].data(),
                                  part, static_cast<T>(cfg_.ema_alpha));
        }
    }

    std::vector<NamedParam<T>> params() {
        std::vector<NamedParam<T>> out;
        if (!cfg_.decouple) return out;
        for (int s = 0; s < 4; ++s) {
            if (!cfg_.enabled_stages[static_cast<std::size_t>(s)]) continue;
            auto& d = decouplers_[static_cast<std::size_t>(s)];
            const std::string p = "head" + std::to_string(s + 1);
            out.push_back({p + "/spatial_w", d.spatial_w});
            out.push_back({p + "/spatial_b", d.spatial_b});
            out.push_back({p + "/temporal_w", d.temporal_w});
            out.push_back({p + "/temporal_b", d.temporal_b});
        }
        return out;
    }

    const FRHeadConfig& config() const { return cfg_; }
    PrototypeBank<T>& bank(int stage, int branch) {
        return banks_[static_cast<std::size_t>(stage)][static_cast<std::size_t>(branch)];
    }

  private:
    Tensor<T> branch_loss(const Tensor<T>& feats, const PrototypeBank<T>& bank,
                          const HeadContext<T>& ctx, const AmbiguousCenters<T>& centers,
                          int& skipped) {
        const int n = feats.dim(0);
        Tensor<T> sum;
        int anchors = 0;
        for (int i = 0; i < n; ++i) {
            const int lab = ctx.labels[static_cast<std::size_t>(i)];
            const bool tp = detail::sample_in(ctx.part.tp[static_cast<std::size_t>(lab)], i);
            if (cfg_.tp_only_anchors && !tp) continue;
            ++anchors;
            if (!bank.initialized[static_cast<std::size_t>(lab)]) {
                ++skipped;
                continue;
            }
            auto anchor = select_row(feats, i);
            auto phi = compensation(anchor, centers, ctx.part, i, lab);
            auto psi = penalty(anchor, centers, ctx.part, i, lab);
            auto loss = cl_loss(anchor, lab, bank, phi, psi,
                                ctx.p_label[static_cast<std::size_t>(i)],
                                static_cast<T>(cfg_.temperature));
            sum = sum.defined() ? add(sum, *loss) : *loss;
        }
        if (!sum.defined()) return Tensor<T>::scalar(T(0));
        return scale(sum, T(1) / static_cast<T>(std::max(anchors, 1)));
    }

    FRHeadConfig cfg_;
    std::array<int, 4> stage_channels_ = {0, 0, 0, 0};
    int classes_ = 0;
    std::array<Decoupler<T>, 4> decouplers_;
    std::array<std::array<PrototypeBank<T>, 2>, 4> banks_;
};

}  // namespace frh
