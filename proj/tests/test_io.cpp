// Serialization formats: the INI-style training config, the run-log CSV, the
// binary checkpoint container, and the JSON/SVG report artifacts.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "frh/checkpoint.hpp"
#include "frh/config_io.hpp"
#include "frh/report.hpp"

using namespace frh;

namespace {

std::string temp_path(const char* name) {
    return std::string("/tmp/frh_io_") + name;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary);
    REQUIRE(os);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TrainConfig nondefault_config() {
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.batch_size = 16;
    cfg.base_lr = 0.0375;
    cfg.decay_epochs = {6, 9};
    cfg.decay_factor = 0.2;
    cfg.warmup_epochs = 2;
    cfg.momentum = 0.85;
    cfg.weight_decay = 1e-3;
    cfg.seed = 424242;
    cfg.frames = 32;
    cfg.eval_fraction = 0.25;
    cfg.modality = Modality::kBone;
    cfg.precision = "float";
    cfg.determinism = false;
    cfg.record_steps = true;
    cfg.ablation.st_decouple = false;
    cfg.backbone.joints = 17;
    cfg.backbone.classes = 30;
    cfg.backbone.base_channels = 16;
    cfg.head.hidden = 96;
    cfg.head.temperature = 0.2;
    cfg.head.ema_alpha = 0.95;
    cfg.head.lambdas = {0.0, 0.3, 0.6, 1.0};
    cfg.head.w_cl = 0.25;
    cfg.head.enabled_stages = {false, true, true, true};
    cfg.head.tp_only_anchors = true;
    return cfg;
}

}  // namespace

TEST_CASE("training config round trip") {
    const auto cfg = nondefault_config();
    const auto path = temp_path("cfg.ini");
    write_config(path, cfg);
    const auto got = read_config(path);
    std::remove(path.c_str());

    CHECK(got.epochs == cfg.epochs);
    CHECK(got.batch_size == cfg.batch_size);
    CHECK(got.base_lr == cfg.base_lr);  // %.17g preserves doubles exactly
    CHECK(got.decay_epochs == cfg.decay_epochs);
    CHECK(got.decay_factor == cfg.decay_factor);
    CHECK(got.warmup_epochs == cfg.warmup_epochs);
    CHECK(got.momentum == cfg.momentum);
    CHECK(got.weight_decay == cfg.weight_decay);
    CHECK(got.seed == cfg.seed);
    CHECK(got.frames == cfg.frames);
    CHECK(got.eval_fraction == cfg.eval_fraction);
    CHECK(got.modality == cfg.modality);
    CHECK(got.precision == cfg.precision);
    CHECK(got.determinism == cfg.determinism);
    CHECK(got.record_steps == cfg.record_steps);
    CHECK(got.ablation.st_decouple == cfg.ablation.st_decouple);
    CHECK(got.backbone.joints == cfg.backbone.joints);
    CHECK(got.backbone.classes == cfg.backbone.classes);
    CHECK(got.backbone.base_channels == cfg.backbone.base_channels);
    CHECK(got.head.hidden == cfg.head.hidden);
    CHECK(got.head.temperature == cfg.head.temperature);
    CHECK(got.head.ema_alpha == cfg.head.ema_alpha);
    CHECK(got.head.lambdas == cfg.head.lambdas);
    CHECK(got.head.w_cl == cfg.head.w_cl);
    CHECK(got.head.enabled_stages == cfg.head.enabled_stages);
    CHECK(got.head.tp_only_anchors == cfg.head.tp_only_anchors);
}

TEST_CASE("config parse errors name the line") {
    using doctest::Contains;
    CHECK_THROWS_WITH_AS(parse_config("[trainer]\nepochs = twelve\n"),
                         Contains("line 2"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("[trainer]\nepochs = twelve\n"),
                         Contains("bad integer"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("epochs = 3\n"),
                         Contains("outside any section"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("[rocket]\n"), Contains("unknown section"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("[trainer\n"), Contains("unterminated"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("[trainer]\nno_such_key = 1\n"),
                         Contains("unknown trainer key"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("[trainer]\njust some words\n"),
                         Contains("expected key = value"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("[head]\nstages = 5\n"),
                         Contains("stage index out of range"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("[trainer]\ndeterminism = maybe\n"),
                         Contains("bad boolean"), std::runtime_error);
    CHECK_THROWS_AS(read_config("/tmp/frh_io_missing.ini"), std::runtime_error);

    SUBCASE("comments and blank lines are skipped") {
        const auto cfg = parse_config("# comment\n\n[trainer]\n; also comment\nepochs = 9\n");
        CHECK(cfg.epochs == 9);
    }
    SUBCASE("absent keys keep defaults") {
        const auto cfg = parse_config("[head]\nw_cl = 0.5\n");
        CHECK(cfg.head.w_cl == 0.5);
        CHECK(cfg.epochs == TrainConfig{}.epochs);
    }
}

TEST_CASE("run log CSV round trip") {
    RunLog log;
    for (int e = 0; e < 3; ++e) {
        EpochRecord r;
        r.epoch = e;
        r.lr = 0.1 / (e + 1);
        r.ce = 2.0 - 0.3 * e;
        r.stage_cl = {0.1 * e, 0.2 * e, 0.3 * e, 0.4 * e};
        r.weighted_cl = 0.05 * e;
        r.total = r.ce + 0.1 * r.weighted_cl;
        r.train_acc = 0.3 + 0.2 * e;
        r.eval_acc = 0.25 + 0.2 * e;
        r.skipped = 7 - e;
        r.seconds = 0.0;
        log.epochs.push_back(r);
    }
    log.best_eval_acc = log.epochs.back().eval_acc;
    log.best_epoch = 2;

    const auto path = temp_path("runlog.csv");
    write_runlog_csv(path, log);
    const auto got = read_runlog_csv(path);
    std::remove(path.c_str());

    REQUIRE(got.epochs.size() == log.epochs.size());
    for (std::size_t i = 0; i < log.epochs.size(); ++i) {
        CHECK(got.epochs[i].epoch == log.epochs[i].epoch);
        CHECK(got.epochs[i].lr == log.epochs[i].lr);
        CHECK(got.epochs[i].ce == log.epochs[i].ce);
        CHECK(got.epochs[i].stage_cl == log.epochs[i].stage_cl);
        CHECK(got.epochs[i].weighted_cl == log.epochs[i].weighted_cl);
        CHECK(got.epochs[i].total == log.epochs[i].total);
        CHECK(got.epochs[i].train_acc == log.epochs[i].train_acc);
        CHECK(got.epochs[i].eval_acc == log.epochs[i].eval_acc);
        CHECK(got.epochs[i].skipped == log.epochs[i].skipped);
        CHECK(got.epochs[i].seconds == log.epochs[i].seconds);
    }
    CHECK(got.best_eval_acc == log.best_eval_acc);
    CHECK(got.best_epoch == log.best_epoch);
}

TEST_CASE("run log CSV structured errors") {
    using doctest::Contains;
    const auto path = temp_path("badlog.csv");

    SUBCASE("missing header column is named") {
        spit(path, "epoch,lr,ce\n");
        CHECK_THROWS_WITH_AS(read_runlog_csv(path), Contains("missing column 'cl1'"),
                             std::runtime_error);
    }
    SUBCASE("renamed header column is named") {
        spit(path,
             "epoch,lr,crossentropy,cl1,cl2,cl3,cl4,weighted_cl,total,train_acc,"
             "eval_acc,skipped,seconds\n");
        CHECK_THROWS_WITH_AS(read_runlog_csv(path), Contains("expected column 'ce'"),
                             std::runtime_error);
    }
    SUBCASE("truncated row names the first missing field") {
        spit(path,
             "epoch,lr,ce,cl1,cl2,cl3,cl4,weighted_cl,total,train_acc,eval_acc,"
             "skipped,seconds\n0,0.1,2.0\n");
        CHECK_THROWS_WITH_AS(read_runlog_csv(path),
                             Contains("row 2: missing field 'cl1'"), std::runtime_error);
    }
    SUBCASE("malformed numeric field") {
        spit(path,
             "epoch,lr,ce,cl1,cl2,cl3,cl4,weighted_cl,total,train_acc,eval_acc,"
             "skipped,seconds\n0,xyz,2,0,0,0,0,0,2,0.5,0.5,0,0\n");
        CHECK_THROWS_WITH_AS(read_runlog_csv(path), Contains("malformed numeric"),
                             std::runtime_error);
    }
    SUBCASE("non-monotone epoch index") {
        const char* header =
            "epoch,lr,ce,cl1,cl2,cl3,cl4,weighted_cl,total,train_acc,eval_acc,"
            "skipped,seconds\n";
        spit(path, std::string(header) + "1,0.1,2,0,0,0,0,0,2,0.5,0.5,0,0\n" +
                       "1,0.1,2,0,0,0,0,0,2,0.5,0.5,0,0\n");
        CHECK_THROWS_WITH_AS(read_runlog_csv(path), Contains("non-monotone"),
                             std::runtime_error);
    }
    std::remove(path.c_str());
}

TEST_CASE("checkpoint round trip") {
    Checkpoint ckpt;
    ckpt.config.joints = 5;
    ckpt.config.classes = 3;
    ckpt.config.base_channels = 4;
    ckpt.topology.joints = 5;
    ckpt.topology.parent = {0, 0, 1, 2, 3};
    ckpt.meta_json = "{\"run\":\"unit-test\"}";
    ckpt.params.push_back(to_block("fc/w", {2, 3},
                                   std::vector<double>{0.1, -0.25, 1e-300, 3.5, 0.0, -7.0}));
    ckpt.state.push_back(to_block("unit1/gcn/bn_mean", {4},
                                  std::vector<double>{1.0, 2.0, 3.0, 4.0}));

    const auto path = temp_path("model.ckpt");
    save_checkpoint(path, ckpt);
    const auto got = load_checkpoint(path);

    CHECK(got.config.joints == 5);
    CHECK(got.config.classes == 3);
    CHECK(got.config.base_channels == 4);
    CHECK(got.topology.parent == ckpt.topology.parent);
    CHECK(got.meta_json == ckpt.meta_json);
    REQUIRE(got.params.size() == 1);
    CHECK(got.params[0].name == "fc/w");
    CHECK(got.params[0].shape == std::vector<int>{2, 3});
    CHECK(got.params[0].data == ckpt.params[0].data);  // float64 blocks: bit exact
    REQUIRE(got.state.size() == 1);
    CHECK(got.state[0].data == ckpt.state[0].data);

    SUBCASE("bad magic") {
        auto bytes = slurp(path);
        bytes[0] = 'X';
        spit(path, bytes);
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"),
                             std::runtime_error);
    }
    SUBCASE("version mismatch") {
        auto bytes = slurp(path);
        bytes[4] = 9;
        spit(path, bytes);
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version mismatch"),
                             std::runtime_error);
    }
    SUBCASE("truncated file") {
        auto bytes = slurp(path);
        spit(path, bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"),
                             std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_WITH_AS(load_checkpoint("/tmp/frh_io_nope.ckpt"),
                             doctest::Contains("cannot open"), std::runtime_error);
    }
    SUBCASE("shape/data mismatch rejected on save") {
        Checkpoint bad = ckpt;
        bad.params[0].shape = {4, 4};
        CHECK_THROWS_WITH_AS(save_checkpoint(path, bad), doctest::Contains("mismatch"),
                             std::runtime_error);
    }
    std::remove(path.c_str());
}

TEST_CASE("block conversion") {
    auto b = to_block("x", {2, 2}, std::vector<float>{1.5f, 2.5f, -3.0f, 0.25f});
    std::vector<double> out(4);
    block_into(b, out);
    CHECK(out == std::vector<double>{1.5, 2.5, -3.0, 0.25});

    SUBCASE("size mismatch names the block") {
        std::vector<double> wrong(3);
        CHECK_THROWS_WITH_AS(block_into(b, wrong), doctest::Contains("x"),
                             std::runtime_error);
    }
}

TEST_CASE("report artifacts") {
    RunLog log;
    for (int e = 0; e < 2; ++e) {
        EpochRecord r;
        r.epoch = e;
        r.total = 2.0 - e;
        r.train_acc = 0.4 + 0.3 * e;
        r.eval_acc = 0.35 + 0.3 * e;
        log.epochs.push_back(r);
    }
    log.best_eval_acc = 0.65;
    log.best_epoch = 1;

    ReportMetrics metrics;
    metrics.final_accuracy = 0.65;
    metrics.per_class_accuracy = {0.5, 0.8};
    metrics.has_difficulty = true;
    metrics.difficulty = difficulty_split({0.6, 0.95}, {0.5, 0.8});
    metrics.groups = [] {
        ConfusionMatrix cm(2);
        cm.at(0, 0) = 1;
        cm.at(0, 1) = 1;
        cm.at(1, 1) = 2;
        return ambiguous_groups(cm, {0});
    }();
    metrics.has_fusion = true;
    metrics.fused_accuracy = 0.7;

    SUBCASE("JSON summary carries the metric fields") {
        const auto json = report_json(log, metrics);
        CHECK(json.find("\"final_accuracy\": 0.65") != std::string::npos);
        CHECK(json.find("\"best_epoch\": 1") != std::string::npos);
        CHECK(json.find("\"difficulty\"") != std::string::npos);
        CHECK(json.find("\"ambiguous_groups\"") != std::string::npos);
        CHECK(json.find("\"fused_accuracy\": 0.7") != std::string::npos);
    }
    SUBCASE("SVG contains one polyline per curve") {
        const auto svg = curves_svg(log);
        CHECK(svg.rfind("<svg", 0) == 0);
        std::size_t count = 0, at = 0;
        while ((at = svg.find("<polyline", at)) != std::string::npos) ++count, ++at;
        CHECK(count == 3);
    }
    SUBCASE("write_report emits all three files") {
        const std::string dir = "/tmp";
        write_report(log, metrics, dir);
        CHECK(!slurp(dir + "/report.json").empty());
        CHECK(!slurp(dir + "/curves.csv").empty());
        CHECK(!slurp(dir + "/curves.svg").empty());
        std::remove((dir + "/report.json").c_str());
        std::remove((dir + "/curves.csv").c_str());
        std::remove((dir + "/curves.svg").c_str());
    }
}
