#pragma once

// Dense numeric kernels. Each hot kernel has an OpenMP-parallel version and a
// serial reference (suffix _serial) used by the tests and the benchmark tool.
// Parallel loops split over independent output elements with serial inner
// reductions, so results are bit-identical to the reference for any thread
// count.

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace frh::kernels {

// out[m x n] = a[m x k] * b[k x n]
template <class T>
void matmul_serial(const T* a, const T* b, T* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        T* orow = out + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) orow[j] = T(0);
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<std::size_t>(i) * k + p];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

template <class T>
void matmul(const T* a, const T* b, T* out, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* orow = out + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) orow[j] = T(0);
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<std::size_t>(i) * k + p];
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[m x n] += a[m x k] * b^T, where bt is b stored transposed as [n x k].
template <class T>
void matmul_nt_acc(const T* a, const T* bt, T* out, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        T* orow = out + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = bt + static_cast<std::size_t>(j) * k;
            T s = T(0);
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            orow[j] += s;
        }
    }
}

// out[k x n] += a^T * b, where a is [m x k] and b is [m x n].
template <class T>
void matmul_tn_acc(const T* a, const T* b, T* out, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < k; ++p) {
        T* orow = out + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const T av = a[static_cast<std::size_t>(i) * k + p];
            const T* brow = b + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// Temporal 1D convolution over the T axis of a [C_in, T, V] map, applied
// independently per joint column v. y: [C_out, T_out, V].
template <class T>
void conv1d_forward_serial(const T* x, const T* w, T* y, int c_in, int t_in,
                           int v, int c_out, int k, int stride, int pad,
                           int t_out) {
    for (int co = 0; co < c_out; ++co) {
        for (int to = 0; to < t_out; ++to) {
            T* yrow = y + (static_cast<std::size_t>(co) * t_out + to) * v;
            for (int j = 0; j < v; ++j) yrow[j] = T(0);
            for (int ci = 0; ci < c_in; ++ci) {
                const T* wrow = w + (static_cast<std::size_t>(co) * c_in + ci) * k;
                for (int kk = 0; kk < k; ++kk) {
                    const int ti = to * stride + kk - pad;
                    if (ti < 0 || ti >= t_in) continue;
                    const T wv = wrow[kk];
                    const T* xrow = x + (static_cast<std::size_t>(ci) * t_in + ti) * v;
                    for (int j = 0; j < v; ++j) yrow[j] += wv * xrow[j];
                }
            }
        }
    }
}

template <class T>
void conv1d_forward(const T* x, const T* w, T* y, int c_in, int t_in, int v,
                    int c_out, int k, int stride, int pad, int t_out) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < c_out; ++co) {
        for (int to = 0; to < t_out; ++to) {
            T* yrow = y + (static_cast<std::size_t>(co) * t_out + to) * v;
            for (int j = 0; j < v; ++j) yrow[j] = T(0);
            for (int ci = 0; ci < c_in; ++ci) {
                const T* wrow = w + (static_cast<std::size_t>(co) * c_in + ci) * k;
                for (int kk = 0; kk < k; ++kk) {
                    const int ti = to * stride + kk - pad;
                    if (ti < 0 || ti >= t_in) continue;
                    const T wv = wrow[kk];
                    const T* xrow = x + (static_cast<std::size_t>(ci) * t_in + ti) * v;
                    for (int j = 0; j < v; ++j) yrow[j] += wv * xrow[j];
                }
            }
        }
    }
}

// dx[c_in, t, v] += sum over (c_out, t_out, k) of dy * w.
template <class T>
void conv1d_backward_input(const T* dy, const T* w, T* dx, int c_in, int t_in,
                           int v, int c_out, int k, int stride, int pad,
                           int t_out) {
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c_in; ++ci) {
        for (int co = 0; co < c_out; ++co) {
            const T* wrow = w + (static_cast<std::size_t>(co) * c_in + ci) * k;
            for (int to = 0; to < t_out; ++to) {
                const T* dyrow = dy + (static_cast<std::size_t>(co) * t_out + to) * v;
                for (int kk = 0; kk < k; ++kk) {
                    const int ti = to * stride + kk - pad;
                    if (ti < 0 || ti >= t_in) continue;
                    const T wv = wrow[kk];
                    T* dxrow = dx + (static_cast<std::size_t>(ci) * t_in + ti) * v;
                    for (int j = 0; j < v; ++j) dxrow[j] += wv * dyrow[j];
                }
            }
        }
    }
}

// dw[c_out, c_in, k] += sum over (t_out, v) of dy * x.
template <class T>
void conv1d_backward_weight(const T* dy, const T* x, T* dw, int c_in, int t_in,
                            int v, int c_out, int k, int stride, int pad,
                            int t_out) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < c_out; ++co) {
        for (int ci = 0; ci < c_in; ++ci) {
            T* dwrow = dw + (static_cast<std::size_t>(co) * c_in + ci) * k;
            for (int kk = 0; kk < k; ++kk) {
                T s = T(0);
                for (int to = 0; to < t_out; ++to) {
                    const int ti = to * stride + kk - pad;
                    if (ti < 0 || ti >= t_in) continue;
                    const T* dyrow = dy + (static_cast<std::size_t>(co) * t_out + to) * v;
                    const T* xrow = x + (static_cast<std::size_t>(ci) * t_in + ti) * v;
                    for (int j = 0; j < v; ++j) s += dyrow[j] * xrow[j];
                }
                dwrow[kk] += s;
            }
        }
    }
}

// y[c,t,v] = sum_u A[v,u] * x[c,t,u] with x,y: [C,T,V], A: [V,V].
template <class T>
void graph_agg_forward_serial(const T* x, const T* adj, T* y, int c, int t,
                              int v) {
    for (int ch = 0; ch < c; ++ch) {
        for (int tt = 0; tt < t; ++tt) {
            const T* xrow = x + (static_cast<std::size_t>(ch) * t + tt) * v;
            T* yrow = y + (static_cast<std::size_t>(ch) * t + tt) * v;
            for (int j = 0; j < v; ++j) {
                const T* arow = adj + static_cast<std::size_t>(j) * v;
                T s = T(0);
                for (int u = 0; u < v; ++u) s += arow[u] * xrow[u];
                yrow[j] = s;
            }
        }
    }
}

template <class T>
void graph_agg_forward(const T* x, const T* adj, T* y, int c, int t, int v) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        for (int tt = 0; tt < t; ++tt) {
            const T* xrow = x + (static_cast<std::size_t>(ch) * t + tt) * v;
            T* yrow = y + (static_cast<std::size_t>(ch) * t + tt) * v;
            for (int j = 0; j < v; ++j) {
                const T* arow = adj + static_cast<std::size_t>(j) * v;
                T s = T(0);
                for (int u = 0; u < v; ++u) s += arow[u] * xrow[u];
                yrow[j] = s;
            }
        }
    }
}

// dx[c,t,u] += sum_v A[v,u] * dy[c,t,v]
template <class T>
void graph_agg_backward_input(const T* dy, const T* adj, T* dx, int c, int t,
                              int v) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        for (int tt = 0; tt < t; ++tt) {
            const T* dyrow = dy + (static_cast<std::size_t>(ch) * t + tt) * v;
            T* dxrow = dx + (static_cast<std::size_t>(ch) * t + tt) * v;
            for (int j = 0; j < v; ++j) {
                const T dv = dyrow[j];
                const T* arow = adj + static_cast<std::size_t>(j) * v;
                for (int u = 0; u < v; ++u) dxrow[u] += arow[u] * dv;
            }
        }
    }
}

// dA[v,u] += sum_{c,t} dy[c,t,v] * x[c,t,u]
template <class T>
void graph_agg_backward_adj(const T* dy, const T* x, T* da, int c, int t,
                            int v) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < v; ++j) {
        T* darow = da + static_cast<std::size_t>(j) * v;
        for (int ch = 0; ch < c; ++ch) {
            for (int tt = 0; tt < t; ++tt) {
                const T* dyrow = dy + (static_cast<std::size_t>(ch) * t + tt) * v;
                const T* xrow = x + (static_cast<std::size_t>(ch) * t + tt) * v;
                const T dv = dyrow[j];
                for (int u = 0; u < v; ++u) darow[u] += dv * xrow[u];
            }
        }
    }
}

}  // namespace frh::kernels
