// Parallel kernels against their serial references (bit-identical by
// construction: parallel loops split over outputs with serial inner
// reductions) and hand-evaluated oracles for the convolution and graph
// aggregation.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "frh/kernels.hpp"
#include "frh/rng.hpp"

using namespace frh;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

}  // namespace

TEST_CASE("matmul parallel matches serial bit for bit") {
    Rng rng(1);
    const int m = 17, k = 23, n = 19;
    auto a = random_vec(rng, static_cast<std::size_t>(m) * k);
    auto b = random_vec(rng, static_cast<std::size_t>(k) * n);
    std::vector<double> ref(static_cast<std::size_t>(m) * n), par(ref.size());
    kernels::matmul_serial(a.data(), b.data(), ref.data(), m, k, n);
    kernels::matmul(a.data(), b.data(), par.data(), m, k, n);
    CHECK(ref == par);
}

TEST_CASE("matmul backward kernels agree with a naive accumulation") {
    Rng rng(2);
    const int m = 5, k = 7, n = 6;
    auto a = random_vec(rng, static_cast<std::size_t>(m) * k);
    auto b = random_vec(rng, static_cast<std::size_t>(k) * n);
    auto dy = random_vec(rng, static_cast<std::size_t>(m) * n);

    // dA = dY * B^T
    std::vector<double> da(static_cast<std::size_t>(m) * k, 0.0), da_ref = da;
    kernels::matmul_nt_acc(dy.data(), b.data(), da.data(), m, n, k);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p)
            for (int j = 0; j < n; ++j)
                da_ref[static_cast<std::size_t>(i) * k + p] +=
                    dy[static_cast<std::size_t>(i) * n + j] * b[static_cast<std::size_t>(p) * n + j];
    for (std::size_t i = 0; i < da.size(); ++i)
        CHECK(da[i] == doctest::Approx(da_ref[i]).epsilon(1e-13));

    // dB = A^T * dY
    std::vector<double> db(static_cast<std::size_t>(k) * n, 0.0), db_ref = db;
    kernels::matmul_tn_acc(a.data(), dy.data(), db.data(), m, k, n);
    for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                db_ref[static_cast<std::size_t>(p) * n + j] +=
                    a[static_cast<std::size_t>(i) * k + p] * dy[static_cast<std::size_t>(i) * n + j];
    for (std::size_t i = 0; i < db.size(); ++i)
        CHECK(db[i] == doctest::Approx(db_ref[i]).epsilon(1e-13));
}

TEST_CASE("conv1d parallel matches serial bit for bit") {
    Rng rng(3);
    const int c_in = 6, t_in = 16, v = 7, c_out = 9, k = 5, stride = 2, pad = 2;
    const int t_out = (t_in + 2 * pad - k) / stride + 1;
    auto x = random_vec(rng, static_cast<std::size_t>(c_in) * t_in * v);
    auto w = random_vec(rng, static_cast<std::size_t>(c_out) * c_in * k);
    std::vector<double> ref(static_cast<std::size_t>(c_out) * t_out * v), par(ref.size());
    kernels::conv1d_forward_serial(x.data(), w.data(), ref.data(), c_in, t_in, v, c_out, k,
                                   stride, pad, t_out);
    kernels::conv1d_forward(x.data(), w.data(), par.data(), c_in, t_in, v, c_out, k, stride,
                            pad, t_out);
    CHECK(ref == par);
}

TEST_CASE("conv1d hand oracle: box filter over a ramp") {
    // x = [0,1,2,3], w = [1,1,1]/3, stride 1, pad 1 -> [1/3, 1, 2, 5/3]
    std::vector<double> x = {0, 1, 2, 3};
    std::vector<double> w = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::vector<double> y(4);
    kernels::conv1d_forward_serial(x.data(), w.data(), y.data(), 1, 4, 1, 1, 3, 1, 1, 4);
    CHECK(y[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y[2] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(y[3] == doctest::Approx(5.0 / 3).epsilon(1e-15));
}

TEST_CASE("graph aggregation parallel matches serial bit for bit") {
    Rng rng(4);
    const int c = 8, t = 12, v = 9;
    auto x = random_vec(rng, static_cast<std::size_t>(c) * t * v);
    auto adj = random_vec(rng, static_cast<std::size_t>(v) * v);
    std::vector<double> ref(x.size()), par(x.size());
    kernels::graph_agg_forward_serial(x.data(), adj.data(), ref.data(), c, t, v);
    kernels::graph_agg_forward(x.data(), adj.data(), par.data(), c, t, v);
    CHECK(ref == par);
}

TEST_CASE("graph aggregation oracles") {
    const int c = 2, t = 3, v = 2;
    Rng rng(5);
    auto x = random_vec(rng, static_cast<std::size_t>(c) * t * v);

    SUBCASE("identity adjacency") {
        std::vector<double> id = {1, 0, 0, 1};
        std::vector<double> y(x.size());
        kernels::graph_agg_forward_serial(x.data(), id.data(), y.data(), c, t, v);
        CHECK(y == x);
    }
    SUBCASE("swap adjacency permutes joints") {
        std::vector<double> swap = {0, 1, 1, 0};
        std::vector<double> y(x.size());
        kernels::graph_agg_forward_serial(x.data(), swap.data(), y.data(), c, t, v);
        for (int i = 0; i < c * t; ++i) {
            CHECK(y[static_cast<std::size_t>(i) * 2] == x[static_cast<std::size_t>(i) * 2 + 1]);
            CHECK(y[static_cast<std::size_t>(i) * 2 + 1] == x[static_cast<std::size_t>(i) * 2]);
        }
    }
    SUBCASE("uniform adjacency averages joints") {
        std::vector<double> avg = {0.5, 0.5, 0.5, 0.5};
        std::vector<double> y(x.size());
        kernels::graph_agg_forward_serial(x.data(), avg.data(), y.data(), c, t, v);
        for (int i = 0; i < c * t; ++i) {
            const double m = 0.5 * (x[static_cast<std::size_t>(i) * 2] +
                                    x[static_cast<std::size_t>(i) * 2 + 1]);
            CHECK(y[static_cast<std::size_t>(i) * 2] == doctest::Approx(m).epsilon(1e-15));
            CHECK(y[static_cast<std::size_t>(i) * 2 + 1] == doctest::Approx(m).epsilon(1e-15));
        }
    }
}

TEST_CASE("graph aggregation backward kernels agree with naive sums") {
    Rng rng(6);
    const int c = 3, t = 4, v = 5;
    auto x = random_vec(rng, static_cast<std::size_t>(c) * t * v);
    auto adj = random_vec(rng, static_cast<std::size_t>(v) * v);
    auto dy = random_vec(rng, x.size());

    std::vector<double> dx(x.size(), 0.0), dx_ref(x.size(), 0.0);
    kernels::graph_agg_backward_input(dy.data(), adj.data(), dx.data(), c, t, v);
    for (int ct = 0; ct < c * t; ++ct)
        for (int j = 0; j < v; ++j)
            for (int u = 0; u < v; ++u)
                dx_ref[static_cast<std::size_t>(ct) * v + u] +=
                    adj[static_cast<std::size_t>(j) * v + u] * dy[static_cast<std::size_t>(ct) * v + j];
    for (std::size_t i = 0; i < dx.size(); ++i)
        CHECK(dx[i] == doctest::Approx(dx_ref[i]).epsilon(1e-13));

    std::vector<double> da(adj.size(), 0.0), da_ref(adj.size(), 0.0);
    kernels::graph_agg_backward_adj(dy.data(), x.data(), da.data(), c, t, v);
    for (int ct = 0; ct < c * t; ++ct)
        for (int j = 0; j < v; ++j)
            for (int u = 0; u < v; ++u)
                da_ref[static_cast<std::size_t>(j) * v + u] +=
                    dy[static_cast<std::size_t>(ct) * v + j] * x[static_cast<std::size_t>(ct) * v + u];
    for (std::size_t i = 0; i < da.size(); ++i)
        CHECK(da[i] == doctest::Approx(da_ref[i]).epsilon(1e-13));
}
