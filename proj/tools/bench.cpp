// Micro-benchmark comparing the serial reference kernels against their
// OpenMP-parallel counterparts, with a correctness cross-check on each shape.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "frh/kernels.hpp"
#include "frh/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<double> random_vec(frh::Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

void report(const char* name, double serial, double parallel, double diff) {
    std::printf("%-24s serial %8.4f ms   parallel %8.4f ms   speedup %5.2fx   max|diff| %.3g\n",
                name, serial * 1e3, parallel * 1e3, serial / parallel, diff);
}

}  // namespace

int main() {
    frh::Rng rng(7);
    const int reps = 5;

    {
        const int m = 256, k = 256, n = 256;
        auto a = random_vec(rng, static_cast<std::size_t>(m) * k);
        auto b = random_vec(rng, static_cast<std::size_t>(k) * n);
        std::vector<double> y_s(static_cast<std::size_t>(m) * n), y_p(y_s.size());
        const double ts = time_best_of(
            reps, [&] { frh::kernels::matmul_serial(a.data(), b.data(), y_s.data(), m, k, n); });
        const double tp = time_best_of(
            reps, [&] { frh::kernels::matmul(a.data(), b.data(), y_p.data(), m, k, n); });
        report("matmul 256x256x256", ts, tp, max_abs_diff(y_s, y_p));
    }

    {
        const int c_in = 64, t_in = 64, v = 25, c_out = 64, k = 9, stride = 1, pad = 4;
        const int t_out = (t_in + 2 * pad - k) / stride + 1;
        auto x = random_vec(rng, static_cast<std::size_t>(c_in) * t_in * v);
        auto w = random_vec(rng, static_cast<std::size_t>(c_out) * c_in * k);
        std::vector<double> y_s(static_cast<std::size_t>(c_out) * t_out * v), y_p(y_s.size());
        const double ts = time_best_of(reps, [&] {
            frh::kernels::conv1d_forward_serial(x.data(), w.data(), y_s.data(), c_in, t_in, v,
                                                c_out, k, stride, pad, t_out);
        });
        const double tp = time_best_of(reps, [&] {
            frh::kernels::conv1d_forward(x.data(), w.data(), y_p.data(), c_in, t_in, v, c_out,
                                         k, stride, pad, t_out);
        });
        report("conv1d 64ch k9 T64 V25", ts, tp, max_abs_diff(y_s, y_p));
    }

    {
        const int c = 64, t = 64, v = 25;
        auto x = random_vec(rng, static_cast<std::size_t>(c) * t * v);
        auto adj = random_vec(rng, static_cast<std::size_t>(v) * v);
        std::vector<double> y_s(x.size()), y_p(x.size());
        const double ts = time_best_of(reps, [&] {
            frh::kernels::graph_agg_forward_serial(x.data(), adj.data(), y_s.data(), c, t, v);
        });
        const double tp = time_best_of(reps, [&] {
            frh::kernels::graph_agg_forward(x.data(), adj.data(), y_p.data(), c, t, v);
        });
        report("graph_agg 64ch T64 V25", ts, tp, max_abs_diff(y_s, y_p));
    }

    return 0;
}
