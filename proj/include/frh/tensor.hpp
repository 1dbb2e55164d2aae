#pragma once

// Dense tensors with reverse-mode differentiation. Values are computed
// eagerly; when a Tape is active, every op that depends on a grad-requiring
// input records a node so that Tape::backward can run one reverse sweep.
// Tensors are row-major and either float or double.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "frh/kernels.hpp"

namespace frh {

// NaN/Inf scan after each op. On by default; violation throws numeric_error.
inline bool& finite_checks() {
    static bool enabled = true;
    return enabled;
}

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rolling hash of every relu activation sign since the last reset. Finite
// differences are only valid where the objective is differentiable; a hash
// mismatch between the two probe points reveals a relu kink in the interval.
inline std::uint64_t& relu_pattern_hash() {
    static thread_local std::uint64_t h = 1469598103934665603ull;
    return h;
}
inline void reset_relu_pattern() { relu_pattern_hash() = 1469598103934665603ull; }

inline std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

template <class T>
struct TensorImpl {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl<T>>> parents;
    std::function<void(TensorImpl<T>&)> backprop;  // null for leaves

    std::size_t numel() const { return data.size(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

template <class T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        auto impl = std::make_shared<TensorImpl<T>>();
        impl->data.assign(shape_numel(shape), T(0));
        impl->shape = std::move(shape);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }
    static Tensor from(std::vector<int> shape, std::vector<T> data,
                       bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw std::invalid_argument("tensor: shape does not match data length");
        auto impl = std::make_shared<TensorImpl<T>>();
        impl->shape = std::move(shape);
        impl->data = std::move(data);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }
    static Tensor scalar(T value) { return from({}, {value}); }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::size_t numel() const { return impl_->data.size(); }
    std::vector<T>& data() { return impl_->data; }
    const std::vector<T>& data() const { return impl_->data; }
    std::vector<T>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    bool has_grad() const { return !impl_->grad.empty(); }
    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }
    void zero_grad() { impl_->grad.clear(); }

    T value() const {
        if (numel() != 1) throw std::invalid_argument("value(): tensor is not scalar");
        return impl_->data[0];
    }

    // Same data, cut off from the graph.
    Tensor detach() const {
        auto impl = std::make_shared<TensorImpl<T>>();
        impl->shape = impl_->shape;
        impl->data = impl_->data;
        return Tensor(std::move(impl));
    }

    std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

  private:
    std::shared_ptr<TensorImpl<T>> impl_;
};

// Records grad-requiring nodes in creation order (a topological order by
// construction) and replays them once, in reverse. RAII: constructing a Tape
// makes it the active one for the current thread.
template <class T>
class Tape {
  public:
    Tape() : prev_(current_) { current_ = this; }
    ~Tape() { current_ = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return current_; }

    void record(std::shared_ptr<TensorImpl<T>> node) { nodes_.push_back(std::move(node)); }
    std::size_t size() const { return nodes_.size(); }

    void backward(const Tensor<T>& loss) {
        if (loss.numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar");
        if (consumed_)
            throw std::runtime_error("backward: tape already consumed");
        consumed_ = true;
        loss.impl()->ensure_grad();
        loss.impl()->grad[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            TensorImpl<T>& node = **it;
            if (node.grad.empty() || !node.backprop) continue;
            node.backprop(node);
        }
    }

  private:
    Tape* prev_ = nullptr;
    std::vector<std::shared_ptr<TensorImpl<T>>> nodes_;
    bool consumed_ = false;
    static inline thread_local Tape* current_ = nullptr;
};

namespace detail {

template <class T>
void check_finite(const std::vector<T>& data, const char* op) {
    if (!finite_checks()) return;
    for (const T& v : data) {
        if (!std::isfinite(v))
            throw numeric_error(std::string(op) + ": non-finite value produced");
    }
}

template <class T>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> data,
                  std::initializer_list<Tensor<T>> parents,
                  std::function<void(TensorImpl<T>&)> backprop, const char* op) {
    check_finite(data, op);
    Tensor<T> out = Tensor<T>::from(std::move(shape), std::move(data));
    bool needs = false;
    if (Tape<T>::active()) {
        for (const Tensor<T>& p : parents)
            if (p.requires_grad()) needs = true;
    }
    if (needs) {
        out.set_requires_grad(true);
        auto impl = out.impl();
        for (const Tensor<T>& p : parents) impl->parents.push_back(p.impl());
        impl->backprop = std::move(backprop);
        Tape<T>::active()->record(impl);
    }
    return out;
}

template <class T>
void accum(const std::shared_ptr<TensorImpl<T>>& dst, const std::vector<T>& g) {
    if (!dst->requires_grad) return;
    dst->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst->grad[i] += g[i];
}

inline void check_same_shape(const std::vector<int>& a, const std::vector<int>& b,
                             const char* op) {
    if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "add");
    std::vector<T> out(a.numel());
    const auto &ad = a.data(), &bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    auto ai = a.impl(), bi = b.impl();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a, b},
        [ai, bi](TensorImpl<T>& o) {
            detail::accum(ai, o.grad);
            detail::accum(bi, o.grad);
        },
        "add");
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "sub");
    std::vector<T> out(a.numel());
    const auto &ad = a.data(), &bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
    auto ai = a.impl(), bi = b.impl();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a, b},
        [ai, bi](TensorImpl<T>& o) {
            detail::accum(ai, o.grad);
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] -= o.grad[i];
            }
        },
        "sub");
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "mul");
    std::vector<T> out(a.numel());
    const auto &ad = a.data(), &bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    auto ai = a.impl(), bi = b.impl();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a, b},
        [ai, bi](TensorImpl<T>& o) {
            if (ai->requires_grad) {
                ai->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i)
                    ai->grad[i] += o.grad[i] * bi->data[i];
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i)
                    bi->grad[i] += o.grad[i] * ai->data[i];
            }
        },
        "mul");
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    std::vector<T> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * s;
    auto ai = a.impl();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [ai, s](TensorImpl<T>& o) {
            if (!ai->requires_grad) return;
            ai->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += s * o.grad[i];
        },
        "scale");
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    std::vector<T> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + s;
    auto ai = a.impl();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [ai](TensorImpl<T>& o) { detail::accum(ai, o.grad); }, "add_scalar");
}

// relu subgradient at 0 is 0.
template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    std::vector<T> out(a.numel());
    const auto& ad = a.data();
    std::uint64_t h = relu_pattern_hash();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = ad[i] > T(0) ? ad[i] : T(0);
        h = (h ^ static_cast<std::uint64_t>(ad[i] > T(0))) * 1099511628211ull;
    }
    relu_pattern_hash() = h;
    auto ai = a.impl();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [ai](TensorImpl<T>& o) {
            if (!ai->requires_grad) return;
            ai->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                if (ai->data[i] > T(0)) ai->grad[i] += o.grad[i];
        },
        "relu");
}

template <class T>
Tensor<T> exp(const Tensor<T>& a) {
    std::vector<T> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ad[i]);
    auto ai = a.impl();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [ai](TensorImpl<T>& o) {
            if (!ai->requires_grad) return;
            ai->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                ai->grad[i] += o.grad[i] * o.data[i];
        },
        "exp");
}

template <class T>
Tensor<T> log(const Tensor<T>& a) {
    std::vector<T> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(ad[i] > T(0)))
            throw std::invalid_argument("log: non-positive input");
        out[i] = std::log(ad[i]);
    }
    auto ai = a.impl();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a},
        [ai](TensorImpl<T>& o) {
            if (!ai->requires_grad) return;
            ai->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                ai->grad[i] += o.grad[i] / ai->data[i];
        },
        "log");
}

// ---- matmul ----------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: dimension mismatch");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(static_cast<std::size_t>(m) * n);
    kernels::matmul(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto ai = a.impl(), bi = b.impl();
    return detail::make_op<T>(
        {m, n}, std::move(out), {a, b},
        [ai, bi, m, k, n](TensorImpl<T>& o) {
            if (ai->requires_grad) {
                ai->ensure_grad();
                kernels::matmul_nt_acc(o.grad.data(), bi->data.data(),
                                       ai->grad.data(), m, n, k);
            }
            if (bi->requires_grad) {
                bi->ensure_grad();
                kernels::matmul_tn_acc(ai->data.data(), o.grad.data(),
                                       bi->grad.data(), m, k, n);
            }
        },
        "matmul");
}

// ---- reductions ------------------------------------------------------------

namespace detail {

struct MeanPlan {
    std::vector<int> out_shape;
    std::vector<std::size_t> out_stride_per_axis;  // stride in out for each input axis (0 if reduced)
    std::size_t count = 1;
};

inline MeanPlan mean_plan(const std::vector<int>& shape, const std::vector<int>& axes) {
    const int r = static_cast<int>(shape.size());
    std::vector<bool> reduced(static_cast<std::size_t>(r), false);
    for (int ax : axes) {
        if (ax < 0 || ax >= r) throw std::invalid_argument("reduce_mean: invalid axis");
        if (reduced[static_cast<std::size_t>(ax)])
            throw std::invalid_argument("reduce_mean: duplicate axis");
        reduced[static_cast<std::size_t>(ax)] = true;
    }
    MeanPlan plan;
    for (int d = 0; d < r; ++d) {
        if (reduced[static_cast<std::size_t>(d)])
            plan.count *= static_cast<std::size_t>(shape[static_cast<std::size_t>(d)]);
        else
            plan.out_shape.push_back(shape[static_cast<std::size_t>(d)]);
    }
    plan.out_stride_per_axis.assign(static_cast<std::size_t>(r), 0);
    std::size_t stride = 1;
    for (int d = r - 1; d >= 0; --d) {
        if (!reduced[static_cast<std::size_t>(d)]) {
            plan.out_stride_per_axis[static_cast<std::size_t>(d)] = stride;
            stride *= static_cast<std::size_t>(shape[static_cast<std::size_t>(d)]);
        }
    }
    return plan;
}

// Walk the full index space; fn(input_linear, output_linear).
template <class F>
void mean_walk(const std::vector<int>& shape,
               const std::vector<std::size_t>& out_stride, F&& fn) {
    const int r = static_cast<int>(shape.size());
    std::vector<int> idx(static_cast<std::size_t>(r), 0);
    std::size_t n = shape_numel(shape);
    std::size_t out_off = 0;
    for (std::size_t lin = 0; lin < n; ++lin) {
        fn(lin, out_off);
        for (int d = r - 1; d >= 0; --d) {
            auto ud = static_cast<std::size_t>(d);
            if (++idx[ud] < shape[ud]) {
                out_off += out_stride[ud];
                break;
            }
            idx[ud] = 0;
            out_off -= out_stride[ud] * static_cast<std::size_t>(shape[ud] - 1);
        }
    }
}

}  // namespace detail

// Arithmetic mean over the named axes; reduced axes are removed.
template <class T>
Tensor<T> reduce_mean(const Tensor<T>& x, const std::vector<int>& axes) {
    auto plan = detail::mean_plan(x.shape(), axes);
    std::vector<T> out(shape_numel(plan.out_shape), T(0));
    const auto& xd = x.data();
    detail::mean_walk(x.shape(), plan.out_stride_per_axis,
                      [&](std::size_t in, std::size_t o) { out[o] += xd[in]; });
    const T inv = T(1) / static_cast<T>(plan.count);
    for (T& v : out) v *= inv;
    auto xi = x.impl();
    auto shape = x.shape();
    auto strides = plan.out_stride_per_axis;
    return detail::make_op<T>(
        plan.out_shape, std::move(out), {x},
        [xi, shape, strides, inv](TensorImpl<T>& o) {
            if (!xi->requires_grad) return;
            xi->ensure_grad();
            auto& xg = xi->grad;
            const auto& og = o.grad;
            detail::mean_walk(shape, strides, [&](std::size_t in, std::size_t out_off) {
                xg[in] += og[out_off] * inv;
            });
        },
        "reduce_mean");
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T s = T(0);
    for (const T& v : x.data()) s += v;
    auto xi = x.impl();
    return detail::make_op<T>(
        {}, std::vector<T>{s}, {x},
        [xi](TensorImpl<T>& o) {
            if (!xi->requires_grad) return;
            xi->ensure_grad();
            for (T& g : xi->grad) g += o.grad[0];
        },
        "sum_all");
}

// ---- structural ops --------------------------------------------------------

// Concatenate along the channel axis: rank-3 [C,T,V] axis 0, rank-4 [N,C,T,V]
// axis 1.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != b.rank() || (a.rank() != 3 && a.rank() != 4))
        throw std::invalid_argument("concat_channels: rank mismatch");
    const int axis = a.rank() == 4 ? 1 : 0;
    auto shape = a.shape();
    for (int d = 0; d < a.rank(); ++d) {
        if (d == axis) continue;
        if (a.dim(d) != b.dim(d))
            throw std::invalid_argument("concat_channels: shape mismatch");
    }
    shape[static_cast<std::size_t>(axis)] = a.dim(axis) + b.dim(axis);
    const std::size_t outer = axis == 1 ? static_cast<std::size_t>(a.dim(0)) : 1;
    const std::size_t a_block = a.numel() / outer;
    const std::size_t b_block = b.numel() / outer;
    std::vector<T> out(a.numel() + b.numel());
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(a.data().data() + o * a_block, a_block,
                    out.data() + o * (a_block + b_block));
        std::copy_n(b.data().data() + o * b_block, b_block,
                    out.data() + o * (a_block + b_block) + a_block);
    }
    auto ai = a.impl(), bi = b.impl();
    return detail::make_op<T>(
        shape, std::move(out), {a, b},
        [ai, bi, outer, a_block, b_block](TensorImpl<T>& o) {
            for (std::size_t blk = 0; blk < outer; ++blk) {
                const T* g = o.grad.data() + blk * (a_block + b_block);
                if (ai->requires_grad) {
                    ai->ensure_grad();
                    T* ag = ai->grad.data() + blk * a_block;
                    for (std::size_t i = 0; i < a_block; ++i) ag[i] += g[i];
                }
                if (bi->requires_grad) {
                    bi->ensure_grad();
                    T* bg = bi->grad.data() + blk * b_block;
                    for (std::size_t i = 0; i < b_block; ++i) bg[i] += g[i + a_block];
                }
            }
        },
        "concat_channels");
}

// Same data under a new shape of equal element count.
template <class T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int> shape) {
    if (shape_numel(shape) != x.numel())
        throw std::invalid_argument("reshape: element count mismatch");
    auto xi = x.impl();
    return detail::make_op<T>(
        std::move(shape), x.data(), {x},
        [xi](TensorImpl<T>& o) { detail::accum(xi, o.grad); }, "reshape");
}

// Row i of a [N, M] matrix as a length-M vector.
template <class T>
Tensor<T> select_row(const Tensor<T>& x, int row) {
    if (x.rank() != 2 || row < 0 || row >= x.dim(0))
        throw std::invalid_argument("select_row: bad row");
    const std::size_t m = static_cast<std::size_t>(x.dim(1));
    std::vector<T> out(x.data().begin() + static_cast<std::size_t>(row) * m,
                       x.data().begin() + static_cast<std::size_t>(row + 1) * m);
    auto xi = x.impl();
    return detail::make_op<T>(
        {x.dim(1)}, std::move(out), {x},
        [xi, row, m](TensorImpl<T>& o) {
            if (!xi->requires_grad) return;
            xi->ensure_grad();
            T* g = xi->grad.data() + static_cast<std::size_t>(row) * m;
            for (std::size_t i = 0; i < m; ++i) g[i] += o.grad[i];
        },
        "select_row");
}

// x: [N, C, ...] (or [N, C]); b: [C], broadcast over every other axis.
template <class T>
Tensor<T> add_bias_axis1(const Tensor<T>& x, const Tensor<T>& b) {
    if (x.rank() < 2 || b.rank() != 1 || x.dim(1) != b.dim(0))
        throw std::invalid_argument("add_bias_axis1: shape mismatch");
    const std::size_t n = static_cast<std::size_t>(x.dim(0));
    const std::size_t c = static_cast<std::size_t>(x.dim(1));
    const std::size_t inner = x.numel() / (n * c);
    std::vector<T> out(x.numel());
    const auto &xd = x.data(), &bd = b.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T bv = bd[ch];
            const std::size_t base = (i * c + ch) * inner;
            for (std::size_t j = 0; j < inner; ++j) out[base + j] = xd[base + j] + bv;
        }
    auto xi = x.impl(), bi = b.impl();
    return detail::make_op<T>(
        x.shape(), std::move(out), {x, b},
        [xi, bi, n, c, inner](TensorImpl<T>& o) {
            detail::accum(xi, o.grad);
            if (!bi->requires_grad) return;
            bi->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t base = (i * c + ch) * inner;
                    T s = T(0);
                    for (std::size_t j = 0; j < inner; ++j) s += o.grad[base + j];
                    bi->grad[ch] += s;
                }
        },
        "add_bias_axis1");
}

// ---- losses and similarities -----------------------------------------------

// Stable mean CE over the batch. Backward: (p - y) / N.
template <class T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size())
        throw std::invalid_argument("softmax_cross_entropy: bad shapes");
    const int n = logits.dim(0), k = logits.dim(1);
    for (int lab : labels)
        if (lab < 0 || lab >= k)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const auto& x = logits.data();
    auto probs = std::make_shared<std::vector<T>>(x.size());
    T loss = T(0);
    for (int i = 0; i < n; ++i) {
        const T* row = x.data() + static_cast<std::size_t>(i) * k;
        T m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
        T z = T(0);
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - m);
        const T logz = std::log(z);
        T* prow = probs->data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) prow[j] = std::exp(row[j] - m - logz);
        loss += m + logz - row[labels[static_cast<std::size_t>(i)]];
    }
    loss /= static_cast<T>(n);
    auto li = logits.impl();
    return detail::make_op<T>(
        {}, std::vector<T>{loss}, {logits},
        [li, probs, labels, n, k](TensorImpl<T>& o) {
            if (!li->requires_grad) return;
            li->ensure_grad();
            const T g = o.grad[0] / static_cast<T>(n);
            for (int i = 0; i < n; ++i) {
                const T* prow = probs->data() + static_cast<std::size_t>(i) * k;
                T* grow = li->grad.data() + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) grow[j] += g * prow[j];
                grow[labels[static_cast<std::size_t>(i)]] -= g;
            }
        },
        "softmax_cross_entropy");
}

// Row-wise softmax on plain data (no grad); used for predictions and p_ik.
template <class T>
std::vector<T> softmax_rows(const std::vector<T>& logits, int n, int k) {
    std::vector<T> p(logits.size());
    for (int i = 0; i < n; ++i) {
        const T* row = logits.data() + static_cast<std::size_t>(i) * k;
        T* prow = p.data() + static_cast<std::size_t>(i) * k;
        T m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
        T z = T(0);
        for (int j = 0; j < k; ++j) {
            prow[j] = std::exp(row[j] - m);
            z += prow[j];
        }
        for (int j = 0; j < k; ++j) prow[j] /= z;
    }
    return p;
}

// cos(u, v) in [-1, 1]; zero-norm input yields 0 with zero gradient.
template <class T>
Tensor<T> cosine_distance(const Tensor<T>& u, const Tensor<T>& v) {
    if (u.rank() != 1 || v.rank() != 1 || u.dim(0) != v.dim(0))
        throw std::invalid_argument("cosine_distance: need equal-length vectors");
    const std::size_t d = u.numel();
    const auto &ud = u.data(), &vd = v.data();
    T dot = T(0), nu2 = T(0), nv2 = T(0);
    for (std::size_t i = 0; i < d; ++i) {
        dot += ud[i] * vd[i];
        nu2 += ud[i] * ud[i];
        nv2 += vd[i] * vd[i];
    }
    if (nu2 == T(0) || nv2 == T(0)) {
        // degenerate: constant 0, detached
        return detail::make_op<T>({}, std::vector<T>{T(0)}, {},
                                  [](TensorImpl<T>&) {}, "cosine_distance");
    }
    const T nu = std::sqrt(nu2), nv = std::sqrt(nv2);
    const T c = dot / (nu * nv);
    auto ui = u.impl(), vi = v.impl();
    return detail::make_op<T>(
        {}, std::vector<T>{c}, {u, v},
        [ui, vi, d, nu, nv, c](TensorImpl<T>& o) {
            const T g = o.grad[0];
            if (ui->requires_grad) {
                ui->ensure_grad();
                const T a = T(1) / (nu * nv), b = c / (nu * nu);
                for (std::size_t i = 0; i < d; ++i)
                    ui->grad[i] += g * (a * vi->data[i] - b * ui->data[i]);
            }
            if (vi->requires_grad) {
                vi->ensure_grad();
                const T a = T(1) / (nu * nv), b = c / (nv * nv);
                for (std::size_t i = 0; i < d; ++i)
                    vi->grad[i] += g * (a * ui->data[i] - b * vi->data[i]);
            }
        },
        "cosine_distance");
}

}  // namespace frh
