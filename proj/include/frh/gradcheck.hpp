#pragma once

// Finite-difference verification of the full composite objective on a tiny
// model. The per-batch constants of the contrastive loss (partition,
// confidence weights, ambiguous centers, prototype banks) are frozen at the
// starting parameters, matching their stop-gradient treatment, so central
// differences measure exactly what the analytic gradients compute.

#include <cstdint>
#include <vector>

#include "frh/backbone.hpp"
#include "frh/fr_head.hpp"
#include "frh/nn.hpp"
#include "frh/rng.hpp"

namespace frh {

struct GradcheckResult {
    double max_rel_error = 0;
    std::size_t param_count = 0;
    std::size_t skipped_coords = 0;  // probe interval straddled a relu kink
};

// Tiny configuration: V=5, T=8, C=4, K=3, C_h=8, N=4. The frozen partition is
// crafted so that TP, FN and FP sets are all nonempty (class 0 has one of
// each), exercising both calibration terms.
template <class T>
GradcheckResult full_objective_gradcheck(std::uint64_t seed, T eps) {
    const int v = 5, t = 8, c = 4, k = 3, hidden = 8, n = 4;

    SkeletonTopology topo;
    topo.joints = v;
    topo.parent = {0, 0, 1, 1, 2};

    BackboneConfig bc;
    bc.joints = v;
    bc.classes = k;
    bc.base_channels = c;
    Backbone<T> model(bc, topo, seed);

    FRHeadConfig hc;
    hc.hidden = hidden;
    FRHead<T> head(hc, bc.stage_channels(), k, seed + 1);

    Rng rng(seed + 2);
    std::vector<T> batch_data(static_cast<std::size_t>(n) * 3 * t * v);
    for (T& x : batch_data) x = static_cast<T>(rng.normal());
    auto batch = Tensor<T>::from({n, 3, t, v}, std::move(batch_data));
    const std::vector<int> labels = {0, 0, 1, 2};

    const T w_cl = static_cast<T>(hc.w_cl);
    auto forward = [&](bool want_taps) {
        return model.forward(batch, /*training=*/true, want_taps,
                             /*update_running=*/false);
    };

    // Initialize every prototype row from an all-correct partition, then
    // freeze the loss context on a partition with TP {0}, FN {1} and FP {3}
    // for class 0 (pred = [0, 1, 1, 0]).
    HeadContext<T> ctx;
    {
        auto fw = forward(true);
        auto feats = head.decouple(fw.taps);
        std::vector<T> all_correct(static_cast<std::size_t>(n) * k, T(0));
        for (int i = 0; i < n; ++i)
            all_correct[static_cast<std::size_t>(i) * k +
                        static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] = T(1);
        head.update_banks(feats, partition_batch(all_correct, n, k, labels));

        const std::vector<int> pred = {0, 1, 1, 0};
        std::vector<T> forced(static_cast<std::size_t>(n) * k, T(0));
        for (int i = 0; i < n; ++i)
            forced[static_cast<std::size_t>(i) * k +
                   static_cast<std::size_t>(pred[static_cast<std::size_t>(i)])] = T(1);
        auto part = partition_batch(forced, n, k, labels);
        auto probs = softmax_rows(fw.logits.data(), n, k);
        ctx = head.build_context(feats, part, labels, probs);
    }

    auto objective = [&]() {
        auto fw = forward(true);
        auto ce = softmax_cross_entropy(fw.logits, labels);
        auto feats = head.decouple(fw.taps);
        auto hl = head.losses(feats, ctx);
        return add(ce, scale(hl.weighted_cl, w_cl));
    };

    std::vector<Tensor<T>> params;
    for (auto& p : model.params()) params.push_back(p.tensor);
    for (auto& p : head.params()) params.push_back(p.tensor);

    GradcheckResult res;
    for (const auto& p : params) res.param_count += p.numel();
    res.max_rel_error = finite_difference_check<T>(objective, params, eps, &res.skipped_coords);
    return res;
}

}  // namespace frh
