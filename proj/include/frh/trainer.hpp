#pragma once

// Training loop: mini-batch SGD with momentum, linear warmup + step decay,
// the cross-entropy/contrastive composite objective, per-epoch held-out
// evaluation and checkpointing of the best-accuracy state.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "frh/backbone.hpp"
#include "frh/checkpoint.hpp"
#include "frh/fr_head.hpp"
#include "frh/nn.hpp"
#include "frh/rng.hpp"
#include "frh/skeleton.hpp"
#include "frh/tensor.hpp"

namespace frh {

struct AblationSwitches {
    bool cl_loss = true;      // off: plain cross-entropy baseline
    bool st_decouple = true;  // off: single pooled feature per stage
    bool multi_level = true;  // off: final stage only
};

struct TrainConfig {
    int epochs = 70;
    int batch_size = 64;
    double base_lr = 0.1;
    std::vector<int> decay_epochs = {35, 55};
    double decay_factor = 0.1;
    int warmup_epochs = 5;
    double momentum = 0.9;
    double weight_decay = 4e-4;
    std::uint64_t seed = 1;
    int frames = 64;              // sequences are resampled to this length
    double eval_fraction = 0.2;   // stratified held-out share
    Modality modality = Modality::kJoint;
    std::string precision = "double";  // "float" | "double"
    // With determinism on, wall time is logged as 0 so that identical runs
    // produce bit-identical RunLogs.
    bool determinism = true;
    bool record_steps = false;
    BackboneConfig backbone;
    FRHeadConfig head;
    AblationSwitches ablation;

    bool use_head() const { return ablation.cl_loss; }

    // The head configuration after applying the ablation switches.
    FRHeadConfig effective_head() const {
        FRHeadConfig h = head;
        h.decouple = ablation.st_decouple;
        if (!ablation.multi_level) h.enabled_stages = {false, false, false, true};
        return h;
    }

    void validate() const {
        if (epochs < 1 || batch_size < 2 || base_lr <= 0.0 || warmup_epochs < 0 ||
            decay_factor <= 0.0 || momentum < 0.0 || momentum >= 1.0 ||
            weight_decay < 0.0 || frames < 8 || frames % 4 != 0 ||
            eval_fraction <= 0.0 || eval_fraction >= 1.0)
            throw std::invalid_argument("train config: invalid");
        if (precision != "float" && precision != "double")
            throw std::invalid_argument("train config: precision must be float or double");
        for (int e : decay_epochs)
            if (e < 0 || e >= epochs)
                throw std::invalid_argument("train config: decay epoch out of range");
        backbone.validate();
        head.validate();
    }
};

// Linear warmup to base_lr over warmup_epochs, then a decay_factor drop at
// each decay epoch (inclusive).
inline double lr_at(const TrainConfig& cfg, int epoch) {
    if (cfg.warmup_epochs > 0 && epoch < cfg.warmup_epochs)
        return cfg.base_lr * static_cast<double>(epoch + 1) /
               static_cast<double>(cfg.warmup_epochs);
    double lr = cfg.base_lr;
    for (int e : cfg.decay_epochs)
        if (epoch >= e) lr *= cfg.decay_factor;
    return lr;
}

// ---- run log -------------------------------------------------------------------

struct StepRecord {
    int epoch = 0, step = 0;
    double ce = 0, weighted_cl = 0, total = 0;
    std::array<double, 4> stage_cl = {0, 0, 0, 0};
    int skipped = 0;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0;
    double ce = 0, weighted_cl = 0, total = 0;
    std::array<double, 4> stage_cl = {0, 0, 0, 0};
    double train_acc = 0, eval_acc = 0;
    long skipped = 0;
    double seconds = 0;  // 0 when the determinism flag is on
};

struct RunLog {
    std::vector<EpochRecord> epochs;
    std::vector<StepRecord> steps;  // populated when record_steps is on
    double best_eval_acc = 0;
    int best_epoch = -1;
};

// ---- data plumbing ---------------------------------------------------------------

// Per-class shuffle, last eval_fraction of each class held out.
struct DataSplit {
    std::vector<int> train, eval;
};

inline DataSplit stratified_split(const std::vector<int>& labels, int classes,
                                  double eval_fraction, Rng& rng) {
    std::vector<std::vector<int>> per_class(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        per_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    DataSplit split;
    for (auto& idx : per_class) {
        rng.shuffle(idx);
        const auto hold = static_cast<std::size_t>(
            static_cast<double>(idx.size()) * eval_fraction + 0.5);
        const std::size_t cut = idx.size() - std::min(hold, idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < cut ? split.train : split.eval).push_back(idx[i]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.eval.begin(), split.eval.end());
    return split;
}

// Stack the chosen samples into one [N, 3, T, V] batch under the modality.
template <class T>
Tensor<T> make_batch(const SkeletonDataset& data, const std::vector<int>& indices,
                     Modality modality, int frames, std::vector<int>* labels_out) {
    const int v = data.topology.joints;
    const int n = static_cast<int>(indices.size());
    std::vector<T> out(static_cast<std::size_t>(n) * 3 * frames * v);
    if (labels_out) labels_out->clear();
    const std::size_t block = static_cast<std::size_t>(3) * frames * v;
    for (int i = 0; i < n; ++i) {
        const SkeletonSequence& seq = data.samples[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
        const SkeletonSequence resampled =
            seq.frames == frames ? seq : resample_frames(seq, frames);
        auto sample = to_modality<T>(resampled, data.topology, modality);
        std::copy(sample.data().begin(), sample.data().end(),
                  out.begin() + static_cast<std::size_t>(i) * block);
        if (labels_out) labels_out->push_back(seq.label);
    }
    return Tensor<T>::from({n, 3, frames, v}, std::move(out));
}

// ---- evaluation ----------------------------------------------------------------

struct EvalResult {
    double accuracy = 0;
    int classes = 0;
    std::vector<int> labels, pred;
    std::vector<double> scores;      // N x K softmax probabilities
    std::vector<double> embeddings;  // N x 4C pooled features
};

// Eval-mode forward (running BN statistics, no gradient, heads untouched).
template <class T>
EvalResult evaluate(Backbone<T>& model, const SkeletonDataset& data,
                    const std::vector<int>& indices, Modality modality, int frames,
                    int batch_size) {
    const int k = model.config().classes;
    const int emb = model.config().embedding_dim();
    EvalResult res;
    res.classes = k;
    std::size_t correct = 0;
    for (std::size_t at = 0; at < indices.size(); at += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(indices.size(), at + static_cast<std::size_t>(batch_size));
        std::vector<int> chunk(indices.begin() + static_cast<std::ptrdiff_t>(at),
                               indices.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<int> labels;
        auto batch = make_batch<T>(data, chunk, modality, frames, &labels);
        auto fw = model.forward(batch, /*training=*/false, /*want_taps=*/false,
                                /*update_running=*/false);
        const int n = static_cast<int>(chunk.size());
        auto probs = softmax_rows(fw.logits.data(), n, k);
        for (int i = 0; i < n; ++i) {
            const T* row = probs.data() + static_cast<std::size_t>(i) * k;
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            res.pred.push_back(best);
            res.labels.push_back(labels[static_cast<std::size_t>(i)]);
            if (best == labels[static_cast<std::size_t>(i)]) ++correct;
            for (int j = 0; j < k; ++j)
                res.scores.push_back(static_cast<double>(row[j]));
            const T* e = fw.pooled.data().data() + static_cast<std::size_t>(i) * emb;
            for (int j = 0; j < emb; ++j)
                res.embeddings.push_back(static_cast<double>(e[j]));
        }
    }
    res.accuracy = indices.empty() ? 0.0
                                   : static_cast<double>(correct) /
                                         static_cast<double>(indices.size());
    return res;
}

// ---- checkpoint conversion ---------------------------------------------------------

template <class T>
Checkpoint make_checkpoint(Backbone<T>& model, FRHead<T>* head, Sgd<T>* sgd,
                           const std::string& meta_json) {
    Checkpoint ckpt;
    ckpt.config = model.config();
    ckpt.topology = model.topology();
    ckpt.meta_json = meta_json;
    auto push_params = [&](std::vector<NamedParam<T>> params) {
        for (auto& p : params)
            ckpt.params.push_back(to_block(p.name, p.tensor.shape(), p.tensor.data()));
    };
    push_params(model.params());
    if (head) push_params(head->params());
    if (sgd) {
        const auto& params = sgd->params();
        const auto& buffers = sgd->buffers();
        for (std::size_t i = 0; i < params.size(); ++i)
            ckpt.state.push_back(to_block("mom/" + params[i].name,
                                          params[i].tensor.shape(), buffers[i]));
    }
    for (auto& [name, stats] : model.bn_stats())
        ckpt.state.push_back(
            to_block(name, {static_cast<int>(stats->size())}, *stats));
    if (head) {
        const auto& hc = head->config();
        for (int s = 0; s < 4; ++s) {
            if (!hc.enabled_stages[static_cast<std::size_t>(s)]) continue;
            for (int b = 0; b < hc.branches(); ++b) {
                auto& bank = head->bank(s, b);
                const std::string base =
                    "proto/" + std::to_string(s + 1) + "/" + std::to_string(b);
                ckpt.state.push_back(
                    to_block(base, {bank.classes, bank.dim}, bank.protos));
                std::vector<double> init(bank.initialized.begin(), bank.initialized.end());
                NamedBlock ib;
                ib.name = base + "/init";
                ib.shape = {bank.classes};
                ib.data = std::move(init);
                ckpt.state.push_back(std::move(ib));
            }
        }
    }
    return ckpt;
}

template <class T>
void load_into(const Checkpoint& ckpt, Backbone<T>& model, FRHead<T>* head,
               Sgd<T>* sgd) {
    auto find = [](const std::vector<NamedBlock>& blocks,
                   const std::string& name) -> const NamedBlock* {
        for (const auto& b : blocks)
            if (b.name == name) return &b;
        return nullptr;
    };
    auto require = [&](const std::vector<NamedBlock>& blocks, const std::string& name) {
        const NamedBlock* b = find(blocks, name);
        if (!b) throw std::runtime_error("checkpoint: missing block " + name);
        return b;
    };
    auto load_params = [&](std::vector<NamedParam<T>> params) {
        for (auto& p : params)
            block_into(*require(ckpt.params, p.name), p.tensor.data());
    };
    load_params(model.params());
    if (head) load_params(head->params());
    if (sgd) {
        const auto& params = sgd->params();
        auto& buffers = sgd->buffers();
        for (std::size_t i = 0; i < params.size(); ++i)
            block_into(*require(ckpt.state, "mom/" + params[i].name), buffers[i]);
    }
    for (auto& [name, stats] : model.bn_stats())
        block_into(*require(ckpt.state, name), *stats);
    if (head) {
        const auto& hc = head->config();
        for (int s = 0; s < 4; ++s) {
            if (!hc.enabled_stages[static_cast<std::size_t>(s)]) continue;
            for (int b = 0; b < hc.branches(); ++b) {
                auto& bank = head->bank(s, b);
                const std::string base =
                    "proto/" + std::to_string(s + 1) + "/" + std::to_string(b);
                block_into(*require(ckpt.state, base), bank.protos);
                const NamedBlock* ib = require(ckpt.state, base + "/init");
                for (std::size_t i = 0; i < bank.initialized.size(); ++i)
                    bank.initialized[i] = ib->data[i] != 0.0 ? 1 : 0;
            }
        }
    }
}

// ---- training ------------------------------------------------------------------

template <class T>
struct TrainResult {
    std::shared_ptr<Backbone<T>> model;
    std::shared_ptr<FRHead<T>> head;  // null when the contrastive loss is off
    RunLog log;
    Checkpoint best_ckpt;   // highest held-out accuracy epoch
    Checkpoint final_ckpt;  // state after the last epoch
    EvalResult final_eval;  // held-out evaluation of the final state
    DataSplit split;
};

namespace detail {

template <class T>
struct StepOutcome {
    StepRecord record;
    int correct = 0;
};

// One optimizer step on one batch. Partition and ambiguous centers come from
// this step's pre-update forward pass; the EMA bank update runs after the
// parameter step using those same (already computed) feature values.
template <class T>
StepOutcome<T> train_step(Backbone<T>& model, FRHead<T>* head, Sgd<T>& sgd,
                          const Tensor<T>& batch, const std::vector<int>& labels,
                          T lr, T w_cl) {
    StepOutcome<T> out;
    const int n = batch.dim(0);
    const int k = model.config().classes;
    Tape<T> tape;
    auto fw = model.forward(batch, /*training=*/true, /*want_taps=*/head != nullptr);
    auto ce = softmax_cross_entropy(fw.logits, labels);
    Tensor<T> total = ce;

    auto probs = softmax_rows(fw.logits.data(), n, k);
    auto part = partition_batch(probs, n, k, labels);
    for (int i = 0; i < n; ++i)
        if (part.pred[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)])
            ++out.correct;

    std::vector<std::vector<Tensor<T>>> feats;
    if (head) {
        feats = head->decouple(fw.taps);
        auto ctx = head->build_context(feats, part, labels, probs);
        auto hl = head->losses(feats, ctx);
        total = add(ce, scale(hl.weighted_cl, w_cl));
        out.record.weighted_cl = static_cast<double>(hl.weighted_cl.value());
        out.record.stage_cl = hl.stage_values;
        out.record.skipped = hl.skipped_anchors;
    }
    out.record.ce = static_cast<double>(ce.value());
    out.record.total = static_cast<double>(total.value());
    tape.backward(total);
    sgd.step(lr, /*allow_missing=*/true);
    if (head) head->update_banks(feats, part);
    return out;
}

}  // namespace detail

template <class T>
TrainResult<T> train(const SkeletonDataset& data, const TrainConfig& cfg,
                     const std::string& meta_json = "{}",
                     std::ostream* progress = nullptr) {
    cfg.validate();
    BackboneConfig bc = cfg.backbone;
    bc.joints = data.topology.joints;

    std::vector<int> labels(data.samples.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = data.samples[i].label;

    Rng root(cfg.seed);
    Rng split_rng = root.fork(1);
    TrainResult<T> result;
    result.split = stratified_split(labels, bc.classes, cfg.eval_fraction, split_rng);

    result.model = std::make_shared<Backbone<T>>(bc, data.topology, root.fork(2).next_u64());
    if (cfg.use_head())
        result.head = std::make_shared<FRHead<T>>(cfg.effective_head(), bc.stage_channels(),
                                                  bc.classes, root.fork(3).next_u64());

    auto params = result.model->params();
    if (result.head)
        for (auto& p : result.head->params()) params.push_back(p);
    Sgd<T> sgd(std::move(params), static_cast<T>(cfg.momentum),
               static_cast<T>(cfg.weight_decay));

    const T w_cl = static_cast<T>(cfg.head.w_cl);
    Rng shuffle_rng = root.fork(4);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg, epoch);
        std::vector<int> order = result.split.train;
        shuffle_rng.shuffle(order);

        EpochRecord er;
        er.epoch = epoch;
        er.lr = lr;
        int steps = 0;
        std::size_t correct = 0, seen = 0;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
            if (end - at < 2) continue;  // batch norm needs at least two samples
            std::vector<int> chunk(order.begin() + static_cast<std::ptrdiff_t>(at),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
            std::vector<int> batch_labels;
            auto batch = make_batch<T>(data, chunk, cfg.modality, cfg.frames, &batch_labels);
            detail::StepOutcome<T> so;
            try {
                so = detail::train_step(*result.model, result.head.get(), sgd, batch,
                                        batch_labels, static_cast<T>(lr), w_cl);
            } catch (const numeric_error& e) {
                std::ostringstream msg;
                msg << "training aborted at epoch " << epoch << " step " << steps << ": "
                    << e.what();
                throw numeric_error(msg.str());
            }
            so.record.epoch = epoch;
            so.record.step = steps;
            if (cfg.record_steps) result.log.steps.push_back(so.record);
            er.ce += so.record.ce;
            er.weighted_cl += so.record.weighted_cl;
            er.total += so.record.total;
            for (int s = 0; s < 4; ++s)
                er.stage_cl[static_cast<std::size_t>(s)] +=
                    so.record.stage_cl[static_cast<std::size_t>(s)];
            er.skipped += so.record.skipped;
            correct += static_cast<std::size_t>(so.correct);
            seen += chunk.size();
            ++steps;
        }
        if (steps > 0) {
            const double inv = 1.0 / static_cast<double>(steps);
            er.ce *= inv;
            er.weighted_cl *= inv;
            er.total *= inv;
            for (double& v : er.stage_cl) v *= inv;
        }
        er.train_acc = seen == 0 ? 0.0
                                 : static_cast<double>(correct) / static_cast<double>(seen);

        auto eval = evaluate(*result.model, data, result.split.eval, cfg.modality,
                             cfg.frames, cfg.batch_size);
        er.eval_acc = eval.accuracy;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!cfg.determinism) er.seconds = secs;
        result.log.epochs.push_back(er);
        if (eval.accuracy > result.log.best_eval_acc || result.log.best_epoch < 0) {
            result.log.best_eval_acc = eval.accuracy;
            result.log.best_epoch = epoch;
            result.best_ckpt =
                make_checkpoint(*result.model, result.head.get(), &sgd, meta_json);
        }
        if (progress) {
            (*progress) << "epoch " << epoch << " lr " << lr << " loss " << er.total
                        << " train_acc " << er.train_acc << " eval_acc " << er.eval_acc
                        << " (" << secs << "s)\n";
        }
    }
    result.final_ckpt = make_checkpoint(*result.model, result.head.get(), &sgd, meta_json);
    result.final_eval = evaluate(*result.model, data, result.split.eval, cfg.modality,
                                 cfg.frames, cfg.batch_size);
    return result;
}

}  // namespace frh
