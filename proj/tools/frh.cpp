// Command-line workbench: synthetic data generation, training, evaluation,
// gradient checking, ablation batteries, score fusion and report generation.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 runtime or numerical
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "frh/config_io.hpp"
#include "frh/gradcheck.hpp"
#include "frh/metrics.hpp"
#include "frh/report.hpp"
#include "frh/trainer.hpp"

namespace {

using namespace frh;

struct TrainOverrides {
    CLI::App* cmd = nullptr;
    std::string config_path, modality, precision, ablation, stages, decay_epochs;
    std::uint64_t seed = 0;
    int epochs = 0, batch = 0, frames = 0, hidden = 0, base_channels = 0, warmup = 0;
    double lr = 0, tau = 0, wcl = 0, ema = 0, eval_fraction = 0, decay_factor = 0;
    std::array<double, 4> lambdas = {0, 0, 0, 0};
    bool record_steps = false, no_determinism = false;

    void attach(CLI::App* c) {
        cmd = c;
        c->add_option("--config", config_path, "configuration file (key = value sections)");
        c->add_option("--seed", seed, "training seed");
        c->add_option("--modality", modality, "joint|bone|joint-motion|bone-motion");
        c->add_option("--precision", precision, "float|double");
        c->add_option("--epochs", epochs, "training epochs");
        c->add_option("--batch", batch, "mini-batch size");
        c->add_option("--lr", lr, "base learning rate");
        c->add_option("--warmup", warmup, "warmup epochs");
        c->add_option("--decay-epochs", decay_epochs,
                      "comma-separated decay epochs ('' for none)");
        c->add_option("--decay-factor", decay_factor, "learning-rate decay factor");
        c->add_option("--frames", frames, "canonical sequence length");
        c->add_option("--eval-fraction", eval_fraction, "held-out share");
        c->add_option("--hidden", hidden, "head hidden width C_h");
        c->add_option("--base-channels", base_channels, "backbone base channels");
        c->add_option("--tau", tau, "contrastive temperature");
        c->add_option("--wcl", wcl, "contrastive loss weight w_cl");
        c->add_option("--ema", ema, "prototype EMA momentum");
        c->add_option("--lambda1", lambdas[0], "stage 1 weight");
        c->add_option("--lambda2", lambdas[1], "stage 2 weight");
        c->add_option("--lambda3", lambdas[2], "stage 3 weight");
        c->add_option("--lambda4", lambdas[3], "stage 4 weight");
        c->add_option("--stages", stages, "enabled stages, e.g. 1,2,3,4");
        c->add_option("--ablation", ablation, "baseline|cl|st|ml|full");
        c->add_flag("--record-steps", record_steps, "log every optimizer step");
        c->add_flag("--no-determinism", no_determinism, "log real wall time per epoch");
    }

    TrainConfig resolve() const {
        TrainConfig cfg;
        if (cmd->count("--config")) cfg = read_config(config_path);
        auto set = [&](const char* flag, auto& dst, const auto& src) {
            if (cmd->count(flag)) dst = src;
        };
        set("--seed", cfg.seed, seed);
        if (cmd->count("--modality")) cfg.modality = modality_from_string(modality);
        set("--precision", cfg.precision, precision);
        set("--epochs", cfg.epochs, epochs);
        set("--batch", cfg.batch_size, batch);
        set("--lr", cfg.base_lr, lr);
        set("--warmup", cfg.warmup_epochs, warmup);
        if (cmd->count("--decay-epochs")) {
            cfg.decay_epochs.clear();
            std::istringstream is(decay_epochs);
            std::string cell;
            while (std::getline(is, cell, ','))
                if (!cell.empty()) cfg.decay_epochs.push_back(std::stoi(cell));
        }
        set("--decay-factor", cfg.decay_factor, decay_factor);
        set("--frames", cfg.frames, frames);
        set("--eval-fraction", cfg.eval_fraction, eval_fraction);
        set("--hidden", cfg.head.hidden, hidden);
        set("--base-channels", cfg.backbone.base_channels, base_channels);
        set("--tau", cfg.head.temperature, tau);
        set("--wcl", cfg.head.w_cl, wcl);
        set("--ema", cfg.head.ema_alpha, ema);
        for (int i = 0; i < 4; ++i) {
            const std::string flag = "--lambda" + std::to_string(i + 1);
            if (cmd->count(flag))
                cfg.head.lambdas[static_cast<std::size_t>(i)] =
                    lambdas[static_cast<std::size_t>(i)];
        }
        if (cmd->count("--stages")) {
            cfg.head.enabled_stages = {false, false, false, false};
            std::istringstream is(stages);
            std::string cell;
            while (std::getline(is, cell, ',')) {
                const int s = std::stoi(cell);
                if (s < 1 || s > 4)
                    throw std::invalid_argument("--stages: index out of range");
                cfg.head.enabled_stages[static_cast<std::size_t>(s - 1)] = true;
            }
        }
        if (cmd->count("--ablation")) cfg.ablation = ablation_by_name(ablation);
        if (record_steps) cfg.record_steps = true;
        if (no_determinism) cfg.determinism = false;
        return cfg;
    }

    static AblationSwitches ablation_by_name(const std::string& name) {
        AblationSwitches a;
        if (name == "baseline") {
            a.cl_loss = false;
        } else if (name == "cl") {
            a = {true, false, false};
        } else if (name == "st") {
            a = {true, true, false};
        } else if (name == "ml") {
            a = {true, false, true};
        } else if (name == "full") {
            a = {true, true, true};
        } else {
            throw std::invalid_argument("--ablation: unknown variant '" + name + "'");
        }
        return a;
    }
};

ReportMetrics metrics_from_eval(const EvalResult& eval) {
    ReportMetrics m;
    m.final_accuracy = eval.accuracy;
    if (!eval.labels.empty()) {
        auto cm = confusion(eval.labels, eval.pred, eval.classes);
        m.per_class_accuracy = cm.per_class_accuracy();
        std::vector<int> anchors;
        for (int kc = 0; kc < eval.classes; ++kc) anchors.push_back(kc);
        m.groups = ambiguous_groups(cm, anchors);
        std::vector<double> defined = m.per_class_accuracy;
        for (double& a : defined)
            if (a < 0) a = 0;
        m.difficulty = difficulty_split(defined, defined);
        m.has_difficulty = true;
    }
    return m;
}

double subset_accuracy(const EvalResult& eval, const std::set<int>& classes) {
    std::size_t n = 0, correct = 0;
    for (std::size_t i = 0; i < eval.labels.size(); ++i) {
        if (!classes.count(eval.labels[i])) continue;
        ++n;
        if (eval.labels[i] == eval.pred[i]) ++correct;
    }
    return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

template <class T>
int run_train(TrainConfig cfg, const std::string& data_path, const std::string& out_dir) {
    DatasetManifest manifest;
    SkeletonDataset data = read_dataset(data_path, &manifest);
    cfg.backbone.joints = manifest.joints;
    cfg.backbone.classes = manifest.classes;

    std::filesystem::create_directories(out_dir);
    const std::string config_text = config_to_string(cfg);
    std::cout << "resolved configuration:\n" << config_text << "\n";
    write_config(out_dir + "/config.ini", cfg);

    nlohmann::ordered_json meta;
    meta["config"] = config_text;
    meta["data"] = data_path;

    auto result = train<T>(data, cfg, meta.dump(), &std::cout);

    write_runlog_csv(out_dir + "/runlog.csv", result.log);
    save_checkpoint(out_dir + "/best.ckpt", result.best_ckpt);
    save_checkpoint(out_dir + "/final.ckpt", result.final_ckpt);
    write_scores(out_dir + "/scores.csv", result.final_eval.scores,
                 result.final_eval.labels, result.final_eval.classes);
    export_embeddings(out_dir + "/embeddings.csv", result.final_eval.embeddings,
                      result.final_eval.labels, cfg.backbone.base_channels * 4);
    write_report(result.log, metrics_from_eval(result.final_eval), out_dir);
    std::cout << "final eval accuracy " << result.final_eval.accuracy
              << ", best eval accuracy " << result.log.best_eval_acc << " (epoch "
              << result.log.best_epoch << ")\n";
    return 0;
}

template <class T>
int run_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& split_name, const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    auto meta = nlohmann::json::parse(ckpt.meta_json);
    TrainConfig cfg = parse_config(meta.at("config").get<std::string>());
    cfg.backbone = ckpt.config;

    DatasetManifest manifest;
    SkeletonDataset data = read_dataset(data_path, &manifest);
    if (manifest.joints != ckpt.config.joints || manifest.classes != ckpt.config.classes)
        throw std::runtime_error("eval: dataset does not match checkpoint dimensions");

    Backbone<T> model(ckpt.config, ckpt.topology, 0);
    load_into<T>(ckpt, model, nullptr, nullptr);

    std::vector<int> labels(data.samples.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = data.samples[i].label;
    Rng split_rng = Rng(cfg.seed).fork(1);
    auto split = stratified_split(labels, cfg.backbone.classes, cfg.eval_fraction, split_rng);
    std::vector<int> indices;
    if (split_name == "train") {
        indices = split.train;
    } else if (split_name == "eval") {
        indices = split.eval;
    } else if (split_name == "all") {
        indices.resize(labels.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
    } else {
        throw std::invalid_argument("--split must be train, eval or all");
    }

    auto eval = evaluate(model, data, indices, cfg.modality, cfg.frames, cfg.batch_size);
    std::filesystem::create_directories(out_dir);
    write_scores(out_dir + "/scores.csv", eval.scores, eval.labels, eval.classes);
    export_embeddings(out_dir + "/embeddings.csv", eval.embeddings, eval.labels,
                      ckpt.config.base_channels * 4);
    {
        std::ofstream os(out_dir + "/metrics.json");
        os << report_json(RunLog{}, metrics_from_eval(eval));
    }
    std::cout << "split " << split_name << " (" << indices.size() << " samples): accuracy "
              << eval.accuracy << "\n";
    return 0;
}

template <class T>
int run_ablate(TrainConfig base, const std::string& data_path, const std::string& out_dir,
               int n_seeds, std::uint64_t first_seed) {
    DatasetManifest manifest;
    SkeletonDataset data = read_dataset(data_path, &manifest);
    base.backbone.joints = manifest.joints;
    base.backbone.classes = manifest.classes;
    std::set<int> ambiguous;
    for (const auto& p : manifest.ambiguity_map) {
        ambiguous.insert(p.class_a);
        ambiguous.insert(p.class_b);
    }
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir + "/ablation.csv");
    csv << "variant,seed,eval_acc,ambiguous_acc\n";

    const char* variants[] = {"baseline", "cl", "st", "ml", "full"};
    std::cout << "variant means over " << n_seeds << " seeds (overall / ambiguous-class):\n";
    for (const char* variant : variants) {
        double acc_sum = 0, amb_sum = 0;
        for (int s = 0; s < n_seeds; ++s) {
            TrainConfig cfg = base;
            cfg.ablation = TrainOverrides::ablation_by_name(variant);
            cfg.seed = first_seed + static_cast<std::uint64_t>(s);
            auto result = train<T>(data, cfg);
            const double amb = subset_accuracy(result.final_eval, ambiguous);
            csv << variant << ',' << cfg.seed << ',' << result.final_eval.accuracy << ','
                << amb << "\n";
            csv.flush();
            acc_sum += result.final_eval.accuracy;
            amb_sum += amb;
        }
        std::printf("  %-8s %.4f / %.4f\n", variant, acc_sum / n_seeds, amb_sum / n_seeds);
    }
    std::cout << "wrote " << out_dir << "/ablation.csv\n";
    return 0;
}

int run_fuse(const std::vector<std::string>& score_paths, std::vector<double> weights,
             const std::string& out_path) {
    std::vector<std::vector<double>> streams;
    std::vector<int> labels;
    int k = 0;
    for (const auto& path : score_paths) {
        std::vector<double> scores;
        std::vector<int> l;
        int kk = 0;
        read_scores(path, scores, l, kk);
        if (!streams.empty() && (kk != k || l != labels))
            throw std::runtime_error("fuse: score matrices disagree on labels/classes");
        k = kk;
        labels = l;
        streams.push_back(std::move(scores));
    }
    if (weights.empty()) weights.assign(streams.size(), 1.0);
    const int n = static_cast<int>(labels.size());
    auto fused = fuse_streams(streams, weights, n, k);
    auto pred = argmax_rows(fused, n, k);
    std::size_t correct = 0;
    for (int i = 0; i < n; ++i)
        if (pred[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)])
            ++correct;
    write_scores(out_path, fused, labels, k);
    std::cout << "fused " << streams.size() << " streams: accuracy "
              << (n == 0 ? 0.0 : static_cast<double>(correct) / n) << "\n";
    return 0;
}

int run_report(const std::string& runlog_path, const std::string& out_dir,
               const std::string& scores_path, const std::string& ref_scores_path) {
    RunLog log = read_runlog_csv(runlog_path);
    ReportMetrics metrics;
    if (!scores_path.empty()) {
        std::vector<double> scores;
        std::vector<int> labels;
        int k = 0;
        read_scores(scores_path, scores, labels, k);
        const int n = static_cast<int>(labels.size());
        auto pred = argmax_rows(scores, n, k);
        auto cm = confusion(labels, pred, k);
        metrics.final_accuracy = cm.accuracy();
        metrics.per_class_accuracy = cm.per_class_accuracy();
        std::vector<int> anchors;
        for (int kc = 0; kc < k; ++kc) anchors.push_back(kc);
        metrics.groups = ambiguous_groups(cm, anchors);
        std::vector<double> reference = metrics.per_class_accuracy;
        if (!ref_scores_path.empty()) {
            std::vector<double> rs;
            std::vector<int> rl;
            int rk = 0;
            read_scores(ref_scores_path, rs, rl, rk);
            if (rk != k) throw std::runtime_error("report: reference class count mismatch");
            auto rcm = confusion(rl, argmax_rows(rs, static_cast<int>(rl.size()), rk), rk);
            reference = rcm.per_class_accuracy();
        }
        std::vector<double> evald = metrics.per_class_accuracy;
        for (double& a : reference)
            if (a < 0) a = 0;
        for (double& a : evald)
            if (a < 0) a = 0;
        metrics.difficulty = difficulty_split(reference, evald);
        metrics.has_difficulty = true;
    } else if (!log.epochs.empty()) {
        metrics.final_accuracy = log.epochs.back().eval_acc;
    }
    std::filesystem::create_directories(out_dir);
    write_report(log, metrics, out_dir);
    std::cout << "wrote report to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skeleton action recognition workbench"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic skeleton dataset");
    SyntheticConfig sc;
    std::uint64_t gen_seed = 1;
    std::string gen_out = "dataset.skl";
    gen->add_option("--out", gen_out, "output dataset path");
    gen->add_option("--classes", sc.classes, "number of classes");
    gen->add_option("--joints", sc.joints, "number of joints");
    gen->add_option("--frames", sc.frames, "frames per sequence");
    gen->add_option("--per-class", sc.samples_per_class, "samples per class");
    gen->add_option("--spatial-pairs", sc.spatial_pairs, "spatially ambiguous class pairs");
    gen->add_option("--temporal-pairs", sc.temporal_pairs, "temporally ambiguous class pairs");
    gen->add_option("--noise", sc.noise_std, "per-sample Gaussian noise stddev");
    gen->add_option("--seed", gen_seed, "generation seed");

    // train
    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_data, tr_out = "run";
    tr->add_option("--data", tr_data, "dataset path")->required();
    tr->add_option("--out", tr_out, "output directory");
    TrainOverrides tr_over;
    tr_over.attach(tr);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string ev_ckpt, ev_data, ev_split = "eval", ev_out = "eval_out";
    ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--data", ev_data, "dataset path")->required();
    ev->add_option("--split", ev_split, "train|eval|all");
    ev->add_option("--out", ev_out, "output directory");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the objective");
    std::uint64_t gc_seed = 1;
    double gc_tol = 1e-4, gc_eps = 1e-5;
    gc->add_option("--seed", gc_seed, "model/data seed");
    gc->add_option("--tolerance", gc_tol, "max allowed relative error");
    gc->add_option("--eps", gc_eps, "finite-difference step");

    // ablate
    auto* ab = app.add_subcommand("ablate", "run the ablation battery over seeds");
    std::string ab_data, ab_out = "ablation";
    int ab_seeds = 5;
    std::uint64_t ab_first_seed = 1;
    ab->add_option("--data", ab_data, "dataset path")->required();
    ab->add_option("--out", ab_out, "output directory");
    ab->add_option("--seeds", ab_seeds, "number of seeds");
    ab->add_option("--first-seed", ab_first_seed, "first seed value");
    TrainOverrides ab_over;
    ab_over.attach(ab);

    // fuse
    auto* fu = app.add_subcommand("fuse", "fuse saved score matrices");
    std::vector<std::string> fu_scores;
    std::string fu_weights, fu_out = "fused.csv";
    fu->add_option("--scores", fu_scores, "score matrix CSV (repeatable)")->required();
    fu->add_option("--weights", fu_weights, "comma-separated stream weights");
    fu->add_option("--out", fu_out, "fused score matrix path");

    // report
    auto* rp = app.add_subcommand("report", "regenerate report documents from logs");
    std::string rp_runlog, rp_out = "report", rp_scores, rp_ref;
    rp->add_option("--runlog", rp_runlog, "runlog CSV path")->required();
    rp->add_option("--out", rp_out, "output directory");
    rp->add_option("--scores", rp_scores, "score matrix for metrics");
    rp->add_option("--ref-scores", rp_ref, "reference score matrix for the difficulty split");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            std::cout << "gen-data: classes " << sc.classes << " joints " << sc.joints
                      << " frames " << sc.frames << " per-class " << sc.samples_per_class
                      << " spatial-pairs " << sc.spatial_pairs << " temporal-pairs "
                      << sc.temporal_pairs << " noise " << sc.noise_std << " seed "
                      << gen_seed << "\n";
            DatasetManifest manifest;
            SkeletonDataset data = generate_synthetic(sc, gen_seed, &manifest);
            write_dataset(gen_out, data, manifest);
            std::cout << "wrote " << data.samples.size() << " samples to " << gen_out
                      << " (" << manifest.ambiguity_map.size() << " ambiguous pairs)\n";
            return 0;
        }
        if (tr->parsed()) {
            TrainConfig cfg = tr_over.resolve();
            return cfg.precision == "float" ? run_train<float>(cfg, tr_data, tr_out)
                                            : run_train<double>(cfg, tr_data, tr_out);
        }
        if (ev->parsed()) {
            // precision comes from the checkpoint's embedded config
            Checkpoint ckpt = load_checkpoint(ev_ckpt);
            auto meta = nlohmann::json::parse(ckpt.meta_json);
            TrainConfig cfg = parse_config(meta.at("config").get<std::string>());
            return cfg.precision == "float"
                       ? run_eval<float>(ev_ckpt, ev_data, ev_split, ev_out)
                       : run_eval<double>(ev_ckpt, ev_data, ev_split, ev_out);
        }
        if (gc->parsed()) {
            auto res = full_objective_gradcheck<double>(gc_seed, gc_eps);
            std::printf(
                "gradcheck: max relative error %.3e over %zu parameters "
                "(%zu kink-straddling coordinates skipped, tolerance %.3e)\n",
                res.max_rel_error, res.param_count, res.skipped_coords, gc_tol);
            return res.max_rel_error < gc_tol ? 0 : 2;
        }
        if (ab->parsed()) {
            if (ab_seeds < 1) throw std::invalid_argument("--seeds must be positive");
            TrainConfig cfg = ab_over.resolve();
            return cfg.precision == "float"
                       ? run_ablate<float>(cfg, ab_data, ab_out, ab_seeds, ab_first_seed)
                       : run_ablate<double>(cfg, ab_data, ab_out, ab_seeds, ab_first_seed);
        }
        if (fu->parsed()) {
            std::vector<double> weights;
            if (!fu_weights.empty()) {
                std::istringstream is(fu_weights);
                std::string cell;
                while (std::getline(is, cell, ',')) weights.push_back(std::stod(cell));
            }
            return run_fuse(fu_scores, weights, fu_out);
        }
        if (rp->parsed()) return run_report(rp_runlog, rp_out, rp_scores, rp_ref);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
