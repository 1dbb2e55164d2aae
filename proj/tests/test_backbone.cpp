// Backbone structure: parameter budget, stage shapes, adjacency handling,
// joint-permutation equivariance and an end-to-end gradient check of the
// cross-entropy objective on a tiny configuration.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "frh/backbone.hpp"
#include "frh/rng.hpp"

using namespace frh;

namespace {

SkeletonTopology chain_topology(int v) {
    SkeletonTopology topo;
    topo.joints = v;
    topo.parent.resize(static_cast<std::size_t>(v));
    topo.parent[0] = 0;
    for (int j = 1; j < v; ++j) topo.parent[static_cast<std::size_t>(j)] = j - 1;
    return topo;
}

BackboneConfig tiny_config() {
    BackboneConfig cfg;
    cfg.joints = 5;
    cfg.classes = 3;
    cfg.base_channels = 4;
    return cfg;
}

Tensor<double> random_batch(Rng& rng, int n, int t, int v) {
    std::vector<double> d(static_cast<std::size_t>(n) * 3 * t * v);
    for (double& x : d) x = rng.normal();
    return Tensor<double>::from({n, 3, t, v}, std::move(d));
}

}  // namespace

TEST_CASE("parameter count at reference scale") {
    BackboneConfig cfg;
    cfg.joints = 25;
    cfg.classes = 120;
    cfg.base_channels = 64;
    Backbone<float> model(cfg, chain_topology(25), 1);
    const double count = static_cast<double>(model.param_count());
    CHECK(count > 1.46e6 * 0.9);
    CHECK(count < 1.46e6 * 1.1);
}

TEST_CASE("stage tap shapes follow the stride plan") {
    BackboneConfig cfg;
    cfg.joints = 25;
    cfg.classes = 10;
    cfg.base_channels = 64;
    Backbone<float> model(cfg, chain_topology(25), 2);
    Rng rng(3);
    std::vector<float> d(static_cast<std::size_t>(2) * 3 * 64 * 25);
    for (float& x : d) x = static_cast<float>(rng.normal());
    auto batch = Tensor<float>::from({2, 3, 64, 25}, std::move(d));
    auto fw = model.forward(batch, false, true, false);
    REQUIRE(fw.taps.size() == 4);
    CHECK(fw.taps[0].shape() == std::vector<int>{2, 64, 64, 25});
    CHECK(fw.taps[1].shape() == std::vector<int>{2, 128, 32, 25});
    CHECK(fw.taps[2].shape() == std::vector<int>{2, 256, 16, 25});
    CHECK(fw.taps[3].shape() == std::vector<int>{2, 256, 16, 25});
    CHECK(fw.pooled.shape() == std::vector<int>{2, 256});
    CHECK(fw.logits.shape() == std::vector<int>{2, 10});
    for (float v : fw.logits.data()) CHECK(std::isfinite(v));
}

TEST_CASE("initialization contracts") {
    auto cfg = tiny_config();
    SUBCASE("topology residual starts at zero") {
        Backbone<double> model(cfg, chain_topology(5), 7);
        for (auto& p : model.params())
            if (p.name.find("delta_adj") != std::string::npos)
                for (double v : p.tensor.data()) CHECK(v == 0.0);
    }
    SUBCASE("same seed gives identical parameters") {
        Backbone<double> a(cfg, chain_topology(5), 7);
        Backbone<double> b(cfg, chain_topology(5), 7);
        auto pa = a.params(), pb = b.params();
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].tensor.data() == pb[i].tensor.data());
    }
    SUBCASE("different seed gives different parameters") {
        Backbone<double> a(cfg, chain_topology(5), 7);
        Backbone<double> b(cfg, chain_topology(5), 8);
        CHECK(a.params()[1].tensor.data() != b.params()[1].tensor.data());
    }
    SUBCASE("joint count mismatch rejected") {
        CHECK_THROWS_AS(Backbone<double>(cfg, chain_topology(6), 7), std::invalid_argument);
    }
}

TEST_CASE("zero input maps to the classifier bias") {
    // Every convolution is bias-free and feeds batch norm with beta = 0, so a
    // zero batch stays zero through all units and the logits reduce to fc/b.
    auto cfg = tiny_config();
    Backbone<double> model(cfg, chain_topology(5), 9);
    auto batch = Tensor<double>::zeros({2, 3, 8, 5});
    auto fw = model.forward(batch, true, false, false);
    std::vector<double> bias;
    for (auto& p : model.params())
        if (p.name == "fc/b") bias = p.tensor.data();
    REQUIRE(bias.size() == 3);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(fw.logits.data()[static_cast<std::size_t>(i) * 3 + j] ==
                  doctest::Approx(bias[static_cast<std::size_t>(j)]).epsilon(1e-12));
}

TEST_CASE("eval mode is purely functional") {
    auto cfg = tiny_config();
    Backbone<double> model(cfg, chain_topology(5), 11);
    Rng rng(4);
    auto batch = random_batch(rng, 2, 8, 5);
    auto a = model.forward(batch, false);
    auto b = model.forward(batch, false);
    CHECK(a.logits.data() == b.logits.data());
}

TEST_CASE("bad batch shapes rejected") {
    auto cfg = tiny_config();
    Backbone<double> model(cfg, chain_topology(5), 13);
    Rng rng(5);
    CHECK_THROWS_AS(model.forward(random_batch(rng, 2, 10, 5), false), std::invalid_argument);
    CHECK_THROWS_AS(model.forward(random_batch(rng, 2, 8, 6), false), std::invalid_argument);
}

TEST_CASE("joint permutation equivariance") {
    // Permuting the joints of the input and conjugating the (base and
    // residual) adjacency by the same permutation leaves the logits
    // unchanged: all other parameters act per-joint.
    auto cfg = tiny_config();
    Backbone<double> model(cfg, chain_topology(5), 17);
    Rng rng(6);
    // give the topology residuals nonzero values so they participate
    for (auto& unit : model.units())
        for (double& v : unit.delta_adj.data()) v = rng.uniform(-0.2, 0.2);

    auto batch = random_batch(rng, 2, 8, 5);
    auto base = model.forward(batch, false);

    const std::vector<int> perm = {3, 0, 4, 1, 2};  // new index j holds old joint perm[j]
    auto permute_cols = [&](const std::vector<double>& src, std::vector<double>& dst,
                            std::size_t rows) {
        for (std::size_t r = 0; r < rows; ++r)
            for (int j = 0; j < 5; ++j)
                dst[r * 5 + static_cast<std::size_t>(j)] =
                    src[r * 5 + static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
    };
    auto conjugate = [&](std::vector<double>& a) {
        std::vector<double> out(25);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                out[static_cast<std::size_t>(i) * 5 + j] =
                    a[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * 5 +
                      perm[static_cast<std::size_t>(j)]];
        a = out;
    };

    std::vector<double> permuted(batch.numel());
    permute_cols(batch.data(), permuted, batch.numel() / 5);
    auto batch_p = Tensor<double>::from(batch.shape(), std::move(permuted));
    conjugate(model.base_adjacency().data());
    for (auto& unit : model.units()) conjugate(unit.delta_adj.data());

    auto perm_fw = model.forward(batch_p, false);
    for (std::size_t i = 0; i < base.logits.numel(); ++i)
        CHECK(std::abs(base.logits.data()[i] - perm_fw.logits.data()[i]) < 1e-9);
}

TEST_CASE("cross-entropy gradient through the full backbone") {
    auto cfg = tiny_config();
    Backbone<double> model(cfg, chain_topology(5), 19);
    Rng rng(119);
    auto batch = random_batch(rng, 2, 8, 5);
    const std::vector<int> labels = {0, 2};
    auto f = [&] {
        auto fw = model.forward(batch, true, false, false);
        return softmax_cross_entropy(fw.logits, labels);
    };
    std::vector<Tensor<double>> params;
    for (auto& p : model.params()) params.push_back(p.tensor);
    std::size_t skipped = 0;
    const double err = finite_difference_check<double>(f, params, 1e-5, &skipped);
    INFO("skipped kink-straddling coordinates: " << skipped);
    CHECK(err < 1e-4);
}
