// Network-level ops: temporal convolution and graph aggregation through the
// tensor API, batch normalization (values and gradients), the SGD step and
// the finite-difference checker itself.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "frh/nn.hpp"
#include "frh/rng.hpp"

using namespace frh;

namespace {

Tensor<double> rand_leaf(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> d(shape_numel(shape));
    for (double& v : d) v = rng.uniform(lo, hi);
    return Tensor<double>::from(std::move(shape), std::move(d), true);
}

// Reduce through fixed random coefficients so the probe objective is not
// invariant to any input direction (a plain sum is invariant to batch-norm
// input shifts, for example, and would mask gradient bugs).
Tensor<double> probe(const Tensor<double>& y, std::uint64_t coeff_seed = 77) {
    Rng crng(coeff_seed);
    std::vector<double> c(y.numel());
    for (double& v : c) v = crng.uniform(0.5, 1.5);
    return sum_all(mul(y, Tensor<double>::from(y.shape(), std::move(c))));
}

}  // namespace

TEST_CASE("conv1d_temporal values") {
    SUBCASE("identity 1x1 kernel") {
        Rng rng(1);
        auto x = rand_leaf(rng, {2, 4, 3});
        auto w = Tensor<double>::from({2, 2, 1}, {1, 0, 0, 1});
        CHECK(conv1d_temporal(x, w, 1, 0).data() == x.data());
    }
    SUBCASE("zero weights give zero output") {
        Rng rng(2);
        auto x = rand_leaf(rng, {1, 2, 5, 3});
        auto w = Tensor<double>::zeros({4, 2, 3});
        auto y = conv1d_temporal(x, w, 1, 1);
        CHECK(y.shape() == std::vector<int>{1, 4, 5, 3});
        for (double v : y.data()) CHECK(v == 0.0);
    }
    SUBCASE("output length follows the stride formula") {
        Rng rng(3);
        auto x = rand_leaf(rng, {1, 8, 2});
        auto w = rand_leaf(rng, {1, 1, 3});
        CHECK(conv1d_temporal(x, w, 2, 1).dim(1) == conv1d_out_len(8, 3, 2, 1));
        CHECK(conv1d_out_len(8, 3, 2, 1) == 4);
    }
    SUBCASE("invalid configurations rejected") {
        Rng rng(4);
        auto x = rand_leaf(rng, {1, 8, 2});
        auto w_even = rand_leaf(rng, {1, 1, 4});
        CHECK_THROWS_AS(conv1d_temporal(x, w_even, 1, 1), std::invalid_argument);
        auto w = rand_leaf(rng, {1, 1, 3});
        CHECK_THROWS_AS(conv1d_temporal(x, w, 3, 1), std::invalid_argument);
        CHECK_THROWS_AS(conv1d_temporal(x, w, 1, -1), std::invalid_argument);
        auto w_mismatch = rand_leaf(rng, {1, 2, 3});
        CHECK_THROWS_AS(conv1d_temporal(x, w_mismatch, 1, 1), std::invalid_argument);
    }
}

TEST_CASE("conv1d_temporal gradients match finite differences") {
    Rng rng(5);
    auto x = rand_leaf(rng, {2, 3, 6, 4});
    auto w = rand_leaf(rng, {5, 3, 3});
    for (int stride : {1, 2}) {
        auto f = [&] { return probe(conv1d_temporal(x, w, stride, 1)); };
        CHECK(finite_difference_check<double>(f, {x, w}, 1e-5) < 1e-6);
    }
}

TEST_CASE("graph_aggregate values and gradients") {
    Rng rng(6);
    auto x = rand_leaf(rng, {2, 3, 4, 5});
    auto adj = rand_leaf(rng, {5, 5});

    SUBCASE("identity adjacency is a no-op") {
        std::vector<double> id(25, 0.0);
        for (int i = 0; i < 5; ++i) id[static_cast<std::size_t>(i) * 5 + i] = 1.0;
        CHECK(graph_aggregate(x, Tensor<double>::from({5, 5}, id)).data() == x.data());
    }
    SUBCASE("size mismatch rejected") {
        CHECK_THROWS_AS(graph_aggregate(x, rand_leaf(rng, {4, 4})), std::invalid_argument);
    }
    SUBCASE("gradients for both input and adjacency") {
        auto f = [&] { return probe(graph_aggregate(x, adj)); };
        CHECK(finite_difference_check<double>(f, {x, adj}, 1e-5) < 1e-6);
    }
}

TEST_CASE("batch_norm training statistics") {
    Rng rng(7);
    const int n = 4, c = 3, t = 5, v = 2;
    auto x = rand_leaf(rng, {n, c, t, v}, -2.0, 2.0);
    auto gamma = Tensor<double>::from({c}, std::vector<double>(c, 1.0), true);
    auto beta = Tensor<double>::zeros({c}, true);
    BatchNormState<double> state(c);
    auto y = batch_norm(x, gamma, beta, state, true);

    const std::size_t inner = static_cast<std::size_t>(t) * v;
    for (int ch = 0; ch < c; ++ch) {
        double mean = 0, var = 0;
        for (int i = 0; i < n; ++i) {
            const double* row = y.data().data() + (static_cast<std::size_t>(i) * c + ch) * inner;
            for (std::size_t j = 0; j < inner; ++j) mean += row[j];
        }
        mean /= static_cast<double>(n) * inner;
        for (int i = 0; i < n; ++i) {
            const double* row = y.data().data() + (static_cast<std::size_t>(i) * c + ch) * inner;
            for (std::size_t j = 0; j < inner; ++j) var += (row[j] - mean) * (row[j] - mean);
        }
        var /= static_cast<double>(n) * inner;
        CHECK(std::abs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps-regularized
    }
}

TEST_CASE("batch_norm edge cases") {
    auto gamma = Tensor<double>::from({2}, {1.0, 1.0}, true);
    auto beta = Tensor<double>::zeros({2}, true);
    BatchNormState<double> state(2);

    SUBCASE("training needs two samples") {
        auto x1 = Tensor<double>::from({1, 2}, {1.0, 2.0});
        CHECK_THROWS_AS(batch_norm(x1, gamma, beta, state, true), std::invalid_argument);
    }
    SUBCASE("constant channel maps to the shift value") {
        auto x = Tensor<double>::from({2, 2}, {3.0, 3.0, 3.0, 3.0});
        auto b = Tensor<double>::from({2}, {0.5, -0.5}, true);
        auto y = batch_norm(x, gamma, b, state, true, false);
        CHECK(y.data() == std::vector<double>{0.5, -0.5, 0.5, -0.5});
    }
    SUBCASE("eval mode at the running mean returns the shift") {
        BatchNormState<double> s(2);
        s.running_mean = {1.0, 2.0};
        s.running_var = {4.0, 9.0};
        auto b = Tensor<double>::from({2}, {0.25, -0.75}, true);
        auto x = Tensor<double>::from({1, 2}, {1.0, 2.0});
        auto y = batch_norm(x, gamma, b, s, false);
        CHECK(y.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(y.data()[1] == doctest::Approx(-0.75).epsilon(1e-12));
    }
    SUBCASE("running stats fold in with momentum 0.1") {
        BatchNormState<double> s(1);
        auto g1 = Tensor<double>::from({1}, {1.0}, true);
        auto b1 = Tensor<double>::zeros({1}, true);
        auto x = Tensor<double>::from({2, 1}, {0.0, 2.0});  // mean 1, biased var 1
        batch_norm(x, g1, b1, s, true, true);
        CHECK(s.running_mean[0] == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(s.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0).epsilon(1e-12));
    }
}

TEST_CASE("batch_norm gradients match finite differences") {
    Rng rng(8);
    const int n = 3, c = 2, t = 4;
    auto x = rand_leaf(rng, {n, c, t}, -2.0, 2.0);
    auto gamma = rand_leaf(rng, {c}, 0.5, 1.5);
    auto beta = rand_leaf(rng, {c}, -0.5, 0.5);
    BatchNormState<double> state(c);
    // The probe coefficients must vary within each channel: a channel-constant
    // objective is invariant to batch-norm input shifts and would zero out the
    // interesting gradient directions.
    auto f = [&] {
        BatchNormState<double> fresh(c);
        return probe(batch_norm(x, gamma, beta, fresh, true, false));
    };
    CHECK(finite_difference_check<double>(f, {x, gamma, beta}, 1e-5) < 1e-6);
}

TEST_CASE("sgd step") {
    SUBCASE("zero gradient leaves parameters, scales momentum") {
        auto p = Tensor<double>::from({2}, {1.0, -1.0}, true);
        Sgd<double> sgd({{"p", p}}, 0.9, 0.0);
        sgd.buffers()[0] = {1.0, 2.0};
        p.grad();  // zeros
        sgd.step(0.0);
        CHECK(p.data() == std::vector<double>{1.0, -1.0});
        CHECK(sgd.buffers()[0] == std::vector<double>{0.9, 1.8});
    }
    SUBCASE("vanilla step") {
        auto p = Tensor<double>::from({1}, {1.0}, true);
        Sgd<double> sgd({{"p", p}}, 0.0, 0.0);
        p.grad()[0] = 1.0;
        sgd.step(0.1);
        CHECK(p.data()[0] == doctest::Approx(0.9).epsilon(1e-15));
    }
    SUBCASE("two momentum steps with constant gradient") {
        // v1 = 1, p -= 0.1; v2 = 0.9 + 1 = 1.9, p -= 0.19; total -0.29
        auto p = Tensor<double>::from({1}, {0.0}, true);
        Sgd<double> sgd({{"p", p}}, 0.9, 0.0);
        for (int s = 0; s < 2; ++s) {
            p.grad()[0] = 1.0;
            sgd.step(0.1);
        }
        CHECK(p.data()[0] == doctest::Approx(-0.29).epsilon(1e-14));
    }
    SUBCASE("weight decay folds into the gradient") {
        auto p = Tensor<double>::from({1}, {2.0}, true);
        Sgd<double> sgd({{"p", p}}, 0.0, 0.5);
        p.grad()[0] = 1.0;
        sgd.step(0.1);  // v = 1 + 0.5*2 = 2; p = 2 - 0.2
        CHECK(p.data()[0] == doctest::Approx(1.8).epsilon(1e-15));
    }
    SUBCASE("missing gradient is an error unless allowed") {
        auto p = Tensor<double>::from({1}, {1.0}, true);
        Sgd<double> sgd({{"p", p}}, 0.9, 0.0);
        CHECK_THROWS_AS(sgd.step(0.1), std::runtime_error);
        CHECK_NOTHROW(sgd.step(0.1, true));
        CHECK(p.data()[0] == 1.0);  // zero gradient, zero decay
    }
    SUBCASE("gradients cleared after the step") {
        auto p = Tensor<double>::from({1}, {1.0}, true);
        Sgd<double> sgd({{"p", p}}, 0.0, 0.0);
        p.grad()[0] = 1.0;
        sgd.step(0.1);
        CHECK_FALSE(p.has_grad());
    }
}

TEST_CASE("finite_difference_check is near-exact on quadratics") {
    Rng rng(9);
    // Keep coordinates away from zero so no gradient sits at the relative
    // floor of the error metric.
    auto x = rand_leaf(rng, {4}, 0.5, 1.5);
    auto f = [&] { return sum_all(mul(x, x)); };
    CHECK(finite_difference_check<double>(f, {x}, 1e-5) < 1e-9);
}

TEST_CASE("finite_difference_check on a constant objective") {
    auto x = Tensor<double>::from({3}, {1.0, 2.0, 3.0}, true);
    auto f = [&] { return Tensor<double>::scalar(5.0); };
    CHECK(finite_difference_check<double>(f, {x}, 1e-5) == 0.0);
}

TEST_CASE("finite_difference_check skips relu-kink-straddling coordinates") {
    // x = 0 sits exactly on the kink: the two probes land on different sides,
    // so the coordinate must be skipped rather than reported as an error.
    auto x = Tensor<double>::from({2}, {0.0, 1.0}, true);
    auto f = [&] { return sum_all(relu(x)); };
    std::size_t skipped = 0;
    const double err = finite_difference_check<double>(f, {x}, 1e-5, &skipped);
    CHECK(skipped == 1);
    CHECK(err < 1e-9);
}
