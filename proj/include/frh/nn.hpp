#pragma once

// Network-level ops on top of the tensor core: temporal convolution, joint
// graph aggregation, batch normalization, the SGD step and a central
// finite-difference gradient checker.

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "frh/rng.hpp"
#include "frh/tensor.hpp"

namespace frh {

namespace detail {

// Uniform fan-in initialization for a trainable tensor.
template <class T>
Tensor<T> uniform_init(Rng& rng, std::vector<int> shape, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> data(shape_numel(shape));
    for (T& v : data) v = static_cast<T>(rng.uniform(-bound, bound));
    return Tensor<T>::from(std::move(shape), std::move(data), true);
}

}  // namespace detail

inline int conv1d_out_len(int t_in, int k, int stride, int pad) {
    return (t_in + 2 * pad - k) / stride + 1;
}

// x: [C_in, T, V] or [N, C_in, T, V]; w: [C_out, C_in, k]. The convolution
// runs over T independently per joint column.
template <class T>
Tensor<T> conv1d_temporal(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
    if (w.rank() != 3) throw std::invalid_argument("conv1d_temporal: weight must be rank 3");
    const bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3)
        throw std::invalid_argument("conv1d_temporal: input must be rank 3 or 4");
    const int n = batched ? x.dim(0) : 1;
    const int c_in = x.dim(batched ? 1 : 0);
    const int t_in = x.dim(batched ? 2 : 1);
    const int v = x.dim(batched ? 3 : 2);
    const int c_out = w.dim(0), k = w.dim(2);
    if (w.dim(1) != c_in) throw std::invalid_argument("conv1d_temporal: channel mismatch");
    if (k < 1 || k % 2 == 0 || (stride != 1 && stride != 2) || pad < 0 ||
        t_in + 2 * pad < k)
        throw std::invalid_argument("conv1d_temporal: invalid stride/padding/kernel");
    const int t_out = conv1d_out_len(t_in, k, stride, pad);

    std::vector<int> out_shape =
        batched ? std::vector<int>{n, c_out, t_out, v} : std::vector<int>{c_out, t_out, v};
    std::vector<T> out(shape_numel(out_shape));
    const std::size_t in_block = static_cast<std::size_t>(c_in) * t_in * v;
    const std::size_t out_block = static_cast<std::size_t>(c_out) * t_out * v;
    for (int i = 0; i < n; ++i)
        kernels::conv1d_forward(x.data().data() + i * in_block, w.data().data(),
                                out.data() + i * out_block, c_in, t_in, v, c_out, k,
                                stride, pad, t_out);
    auto xi = x.impl(), wi = w.impl();
    return detail::make_op<T>(
        out_shape, std::move(out), {x, w},
        [=](TensorImpl<T>& o) {
            if (xi->requires_grad) {
                xi->ensure_grad();
                for (int i = 0; i < n; ++i)
                    kernels::conv1d_backward_input(
                        o.grad.data() + i * out_block, wi->data.data(),
                        xi->grad.data() + i * in_block, c_in, t_in, v, c_out, k,
                        stride, pad, t_out);
            }
            if (wi->requires_grad) {
                wi->ensure_grad();
                for (int i = 0; i < n; ++i)
                    kernels::conv1d_backward_weight(
                        o.grad.data() + i * out_block, xi->data.data() + i * in_block,
                        wi->grad.data(), c_in, t_in, v, c_out, k, stride, pad, t_out);
            }
        },
        "conv1d_temporal");
}

// out[c,t,v] = sum_u A[v,u] x[c,t,u]; x: [C,T,V] or [N,C,T,V]; A: [V,V].
// A is differentiable (the learnable topology).
template <class T>
Tensor<T> graph_aggregate(const Tensor<T>& x, const Tensor<T>& adj) {
    const bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3)
        throw std::invalid_argument("graph_aggregate: input must be rank 3 or 4");
    const int n = batched ? x.dim(0) : 1;
    const int c = x.dim(batched ? 1 : 0);
    const int t = x.dim(batched ? 2 : 1);
    const int v = x.dim(batched ? 3 : 2);
    if (adj.rank() != 2 || adj.dim(0) != v || adj.dim(1) != v)
        throw std::invalid_argument("graph_aggregate: adjacency size mismatch");
    std::vector<T> out(x.numel());
    const std::size_t block = static_cast<std::size_t>(c) * t * v;
    for (int i = 0; i < n; ++i)
        kernels::graph_agg_forward(x.data().data() + i * block, adj.data().data(),
                                   out.data() + i * block, c, t, v);
    auto xi = x.impl(), ai = adj.impl();
    return detail::make_op<T>(
        x.shape(), std::move(out), {x, adj},
        [=](TensorImpl<T>& o) {
            if (xi->requires_grad) {
                xi->ensure_grad();
                for (int i = 0; i < n; ++i)
                    kernels::graph_agg_backward_input(o.grad.data() + i * block,
                                                      ai->data.data(),
                                                      xi->grad.data() + i * block, c, t, v);
            }
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (int i = 0; i < n; ++i)
                    kernels::graph_agg_backward_adj(o.grad.data() + i * block,
                                                    xi->data.data() + i * block,
                                                    ai->grad.data(), c, t, v);
            }
        },
        "graph_aggregate");
}

// ---- batch norm --------------------------------------------------------------

template <class T>
struct BatchNormState {
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    explicit BatchNormState(int channels = 0)
        : running_mean(static_cast<std::size_t>(channels), T(0)),
          running_var(static_cast<std::size_t>(channels), T(1)) {}
};

// Per-channel standardization of [N, C, ...]; training mode uses biased batch
// statistics and optionally folds them into the running estimates.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormState<T>& state, bool training,
                     bool update_running = true) {
    if (x.rank() < 2) throw std::invalid_argument("batch_norm: input must have batch and channel axes");
    const int n = x.dim(0), c = x.dim(1);
    if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c ||
        static_cast<int>(state.running_mean.size()) != c)
        throw std::invalid_argument("batch_norm: channel mismatch");
    if (training && n < 2)
        throw std::invalid_argument("batch_norm: training requires batch size >= 2");
    const std::size_t inner = x.numel() / (static_cast<std::size_t>(n) * c);
    const std::size_t count = static_cast<std::size_t>(n) * inner;
    const auto& xd = x.data();

    std::vector<T> mean(static_cast<std::size_t>(c)), ivar(static_cast<std::size_t>(c));
    if (training) {
        for (int ch = 0; ch < c; ++ch) {
            T m = T(0);
            for (int i = 0; i < n; ++i) {
                const T* row = xd.data() + (static_cast<std::size_t>(i) * c + ch) * inner;
                for (std::size_t j = 0; j < inner; ++j) m += row[j];
            }
            m /= static_cast<T>(count);
            T var = T(0);
            for (int i = 0; i < n; ++i) {
                const T* row = xd.data() + (static_cast<std::size_t>(i) * c + ch) * inner;
                for (std::size_t j = 0; j < inner; ++j) {
                    const T d = row[j] - m;
                    var += d * d;
                }
            }
            var /= static_cast<T>(count);
            mean[static_cast<std::size_t>(ch)] = m;
            ivar[static_cast<std::size_t>(ch)] = T(1) / std::sqrt(var + state.eps);
            if (update_running) {
                state.running_mean[static_cast<std::size_t>(ch)] =
                    (T(1) - state.momentum) * state.running_mean[static_cast<std::size_t>(ch)] +
                    state.momentum * m;
                state.running_var[static_cast<std::size_t>(ch)] =
                    (T(1) - state.momentum) * state.running_var[static_cast<std::size_t>(ch)] +
                    state.momentum * var;
            }
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[static_cast<std::size_t>(ch)] = state.running_mean[static_cast<std::size_t>(ch)];
            ivar[static_cast<std::size_t>(ch)] =
                T(1) / std::sqrt(state.running_var[static_cast<std::size_t>(ch)] + state.eps);
        }
    }

    auto xhat = std::make_shared<std::vector<T>>(x.numel());
    std::vector<T> out(x.numel());
    const auto &gd = gamma.data(), &bd = beta.data();
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * inner;
            const T m = mean[static_cast<std::size_t>(ch)];
            const T iv = ivar[static_cast<std::size_t>(ch)];
            const T g = gd[static_cast<std::size_t>(ch)], b = bd[static_cast<std::size_t>(ch)];
            for (std::size_t j = 0; j < inner; ++j) {
                const T h = (xd[base + j] - m) * iv;
                (*xhat)[base + j] = h;
                out[base + j] = g * h + b;
            }
        }

    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
    return detail::make_op<T>(
        x.shape(), std::move(out), {x, gamma, beta},
        [xi, gi, bi, xhat, ivar, n, c, inner, count, training](TensorImpl<T>& o) {
            // dgamma / dbeta
            std::vector<T> dgamma(static_cast<std::size_t>(c), T(0));
            std::vector<T> dbeta(static_cast<std::size_t>(c), T(0));
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * inner;
                    T sg = T(0), sb = T(0);
                    for (std::size_t j = 0; j < inner; ++j) {
                        sg += o.grad[base + j] * (*xhat)[base + j];
                        sb += o.grad[base + j];
                    }
                    dgamma[static_cast<std::size_t>(ch)] += sg;
                    dbeta[static_cast<std::size_t>(ch)] += sb;
                }
            if (gi->requires_grad) detail::accum(gi, dgamma);
            if (bi->requires_grad) detail::accum(bi, dbeta);
            if (!xi->requires_grad) return;
            xi->ensure_grad();
            const T invm = T(1) / static_cast<T>(count);
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * inner;
                    const T g = gi->data[static_cast<std::size_t>(ch)];
                    const T iv = ivar[static_cast<std::size_t>(ch)];
                    for (std::size_t j = 0; j < inner; ++j) {
                        const T dxh = o.grad[base + j] * g;
                        if (training) {
                            xi->grad[base + j] +=
                                iv * (dxh - invm * dbeta[static_cast<std::size_t>(ch)] * g -
                                      invm * (*xhat)[base + j] *
                                          dgamma[static_cast<std::size_t>(ch)] * g);
                        } else {
                            xi->grad[base + j] += dxh * iv;
                        }
                    }
                }
        },
        "batch_norm");
}

// ---- optimizer ---------------------------------------------------------------

template <class T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

// SGD with momentum; weight decay folds into the gradient before the buffer:
// v <- m*v + (g + wd*p); p <- p - lr*v. Gradients are cleared after the step.
template <class T>
class Sgd {
  public:
    Sgd(std::vector<NamedParam<T>> params, T momentum, T weight_decay)
        : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
        buffers_.reserve(params_.size());
        for (const auto& p : params_)
            buffers_.emplace_back(p.tensor.numel(), T(0));
    }

    // allow_missing: a parameter with no accumulated gradient this step is
    // treated as zero-gradient (it still decays and keeps momentum).
    void step(T lr, bool allow_missing = false) {
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            Tensor<T>& p = params_[pi].tensor;
            if (!p.has_grad()) {
                if (!allow_missing)
                    throw std::runtime_error("sgd_step: missing gradient on parameter " +
                                             params_[pi].name);
                p.grad();  // allocate zeros
            }
            auto& v = buffers_[pi];
            auto& data = p.data();
            auto& g = p.grad();
            for (std::size_t i = 0; i < data.size(); ++i) {
                v[i] = momentum_ * v[i] + (g[i] + weight_decay_ * data[i]);
                data[i] -= lr * v[i];
            }
            p.zero_grad();
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    const std::vector<NamedParam<T>>& params() const { return params_; }
    std::vector<std::vector<T>>& buffers() { return buffers_; }
    const std::vector<std::vector<T>>& buffers() const { return buffers_; }

  private:
    std::vector<NamedParam<T>> params_;
    std::vector<std::vector<T>> buffers_;
    T momentum_, weight_decay_;
};

// ---- gradient checking ---------------------------------------------------------

// Central differences against the analytic gradients of f. f must evaluate
// the objective purely from the current parameter values (no tape of its
// own). Returns the max over coordinates of |a - n| / max(|a|, |n|, 1e-8);
// a non-finite objective value reports as +inf. Coordinates whose probe
// interval straddles a relu kink (the activation sign pattern differs
// between the two evaluations, where the difference quotient does not
// estimate the derivative) are skipped and counted via skipped_out.
template <class T>
double finite_difference_check(const std::function<Tensor<T>()>& f,
                               std::vector<Tensor<T>> params, T eps,
                               std::size_t* skipped_out = nullptr) {
    for (auto& p : params) p.zero_grad();
    std::vector<std::vector<T>> analytic;
    {
        Tape<T> tape;
        Tensor<T> loss = f();
        tape.backward(loss);
    }
    for (auto& p : params) analytic.push_back(p.grad());
    for (auto& p : params) p.zero_grad();

    if (skipped_out) *skipped_out = 0;
    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& data = params[pi].data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const T orig = data[i];
            data[i] = orig + eps;
            double f_plus;
            std::uint64_t pattern_plus;
            try {
                reset_relu_pattern();
                f_plus = static_cast<double>(f().value());
                pattern_plus = relu_pattern_hash();
            } catch (const numeric_error&) {
                data[i] = orig;
                return std::numeric_limits<double>::infinity();
            }
            data[i] = orig - eps;
            double f_minus;
            std::uint64_t pattern_minus;
            try {
                reset_relu_pattern();
                f_minus = static_cast<double>(f().value());
                pattern_minus = relu_pattern_hash();
            } catch (const numeric_error&) {
                data[i] = orig;
                return std::numeric_limits<double>::infinity();
            }
            data[i] = orig;
            if (pattern_plus != pattern_minus) {
                if (skipped_out) ++*skipped_out;
                continue;
            }
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                return std::numeric_limits<double>::infinity();
            const double numeric = (f_plus - f_minus) / (2.0 * static_cast<double>(eps));
            const double a = static_cast<double>(analytic[pi][i]);
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace frh
