// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/ops.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace llf::ops {

namespace {

std::atomic<bool> gCheckFinite{false};

void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

std::size_t rows_of(const Shape& s) {
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
    return r;
}

// c[m×n] = a[m×k]·b[k×n], blocked over columns and the inner dim. Within each output
// element the inner index still runs in ascending order, so blocking never changes bits.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    constexpr std::size_t kColBlock = 256;
    constexpr std::size_t kInnerBlock = 128;
    std::fill(c, c + m * n, T(0));
    for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
        const std::size_t j1 = std::min(n, j0 + kColBlock);
        for (std::size_t t0 = 0; t0 < k; t0 += kInnerBlock) {
            const std::size_t t1 = std::min(k, t0 + kInnerBlock);
            for (std::size_t i = 0; i < m; ++i) {
                T* __restrict crow = c + i * n;
                const T* arow = a + i * k;
                for (std::size_t t = t0; t < t1; ++t) {
                    const T av = arow[t];
                    const T* __restrict brow = b + t * n;
                    for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
                }
            }
        }
    }
}

template <typename T>
std::vector<T> transpose(const T* src, std::size_t rows, std::size_t cols) {
    std::vector<T> out(rows * cols);
    constexpr std::size_t kTile = 32;
    for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
        for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
            const std::size_t r1 = std::min(rows, r0 + kTile);
            const std::size_t c1 = std::min(cols, c0 + kTile);
            for (std::size_t r = r0; r < r1; ++r)
                for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = src[r * cols + c];
        }
    }
    return out;
}

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

void set_check_finite(bool on) { gCheckFinite.store(on, std::memory_order_relaxed); }
bool check_finite_enabled() { return gCheckFinite.load(std::memory_order_relaxed); }

template <typename T>
void check_finite(const BasicTensor<T>& t, const char* op) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (!std::isfinite(t[i])) {
            throw NumericError(std::string("non-finite value produced by ") + op + " at flat index " +
                               std::to_string(i));
        }
    }
}

template <typename T>
static void maybe_check(const BasicTensor<T>& t, const char* op) {
    if (check_finite_enabled()) check_finite(t, op);
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require(a.rank() == 2 && b.rank() == 2, "matmul expects 2-D operands");
    require(a.dim(1) == b.dim(0),
            "matmul inner dims differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    BasicTensor<T> c({m, n});
    gemm_nn(a.data(), b.data(), c.data(), m, k, n);
    maybe_check(c, "matmul");
    return c;
}

template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require(a.rank() == 2 && b.rank() == 2, "matmul_nt expects 2-D operands");
    require(a.dim(1) == b.dim(1),
            "matmul_nt inner dims differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    const std::vector<T> bt = transpose(b.data(), n, k);
    BasicTensor<T> c({m, n});
    gemm_nn(a.data(), bt.data(), c.data(), m, k, n);
    maybe_check(c, "matmul_nt");
    return c;
}

template <typename T>
void matmul_tn_acc(const BasicTensor<T>& a, const BasicTensor<T>& b, BasicTensor<T>& out) {
    require(a.rank() == 2 && b.rank() == 2 && out.rank() == 2, "matmul_tn_acc expects 2-D operands");
    require(a.dim(0) == b.dim(0) && out.dim(0) == a.dim(1) && out.dim(1) == b.dim(1),
            "matmul_tn_acc shape mismatch: " + shape_str(a.shape()) + "^T x " + shape_str(b.shape()) + " -> " +
                shape_str(out.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1), k = b.dim(1);
    constexpr std::size_t kRowBlock = 64;
    for (std::size_t o0 = 0; o0 < n; o0 += kRowBlock) {
        const std::size_t o1 = std::min(n, o0 + kRowBlock);
        for (std::size_t r = 0; r < m; ++r) {
            const T* arow = a.data() + r * n;
            const T* __restrict brow = b.data() + r * k;
            for (std::size_t o = o0; o < o1; ++o) {
                const T av = arow[o];
                if (av == T(0)) continue;
                T* __restrict orow = out.data() + o * k;
                for (std::size_t i = 0; i < k; ++i) orow[i] += av * brow[i];
            }
        }
    }
    maybe_check(out, "matmul_tn_acc");
}

template <typename T>
BasicTensor<T> silu(const BasicTensor<T>& x) {
    BasicTensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] * sigmoid(x[i]);
    maybe_check(y, "silu");
    return y;
}

template <typename T>
BasicTensor<T> silu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy) {
    require(x.shape() == dy.shape(), "silu_backward shape mismatch");
    BasicTensor<T> dx(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const T s = sigmoid(x[i]);
        dx[i] = dy[i] * (s + x[i] * s * (T(1) - s));
    }
    maybe_check(dx, "silu_backward");
    return dx;
}

template <typename T>
BasicTensor<T> rmsnorm(const BasicTensor<T>& x, const BasicTensor<T>& w, double eps, std::vector<T>* inv_rms) {
    require(w.rank() == 1 && x.rank() >= 1 && x.dim(-1) == w.dim(0),
            "rmsnorm: last dim of " + shape_str(x.shape()) + " must equal weight " + shape_str(w.shape()));
    const std::size_t d = w.dim(0);
    const std::size_t rows = rows_of(x.shape());
    BasicTensor<T> y(x.shape());
    if (inv_rms) inv_rms->assign(rows, T(0));
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * d;
        T* yr = y.data() + r * d;
        double ss = 0.0;
        for (std::size_t i = 0; i < d; ++i) ss += static_cast<double>(xr[i]) * xr[i];
        const T inv = static_cast<T>(1.0 / std::sqrt(ss / static_cast<double>(d) + eps));
        if (inv_rms) (*inv_rms)[r] = inv;
        for (std::size_t i = 0; i < d; ++i) yr[i] = xr[i] * inv * w[i];
    }
    maybe_check(y, "rmsnorm");
    return y;
}

template <typename T>
BasicTensor<T> rmsnorm_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const std::vector<T>& inv_rms,
                                const BasicTensor<T>& dy, BasicTensor<T>* dw) {
    require(x.shape() == dy.shape(), "rmsnorm_backward shape mismatch");
    const std::size_t d = w.dim(0);
    const std::size_t rows = rows_of(x.shape());
    require(inv_rms.size() == rows, "rmsnorm_backward: inv_rms has wrong length");
    BasicTensor<T> dx(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * d;
        const T* gr = dy.data() + r * d;
        T* dxr = dx.data() + r * d;
        const T inv = inv_rms[r];
        T dot = 0;
        for (std::size_t i = 0; i < d; ++i) dot += gr[i] * w[i] * xr[i];
        const T coef = inv * inv * inv * dot / static_cast<T>(d);
        for (std::size_t i = 0; i < d; ++i) dxr[i] = gr[i] * w[i] * inv - coef * xr[i];
        if (dw) {
            for (std::size_t i = 0; i < d; ++i) (*dw)[i] += gr[i] * xr[i] * inv;
        }
    }
    maybe_check(dx, "rmsnorm_backward");
    return dx;
}

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x) {
    require(x.rank() >= 1, "softmax_rows expects at least 1-D input");
    const std::size_t n = x.dim(-1);
    const std::size_t rows = rows_of(x.shape());
    BasicTensor<T> y(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * n;
        T* yr = y.data() + r * n;
        T mx = xr[0];
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            sum += yr[i];
        }
        const T inv = static_cast<T>(1.0 / sum);
        for (std::size_t i = 0; i < n; ++i) yr[i] *= inv;
    }
    maybe_check(y, "softmax_rows");
    return y;
}

namespace {

template <typename T>
BasicTensor<T> rope_rotate(const BasicTensor<T>& x, std::int64_t start_pos, double base, double sign) {
    require(x.rank() == 4, "rope expects [B x H x T x dh], got " + shape_str(x.shape()));
    const std::size_t dh = x.dim(3);
    require(dh % 2 == 0, "rope requires an even head dim, got " + std::to_string(dh));
    const std::size_t half = dh / 2;
    const std::size_t tlen = x.dim(2);
    const std::size_t slices = x.dim(0) * x.dim(1);

    std::vector<T> cosv(tlen * half), sinv(tlen * half);
    for (std::size_t t = 0; t < tlen; ++t) {
        const double pos = static_cast<double>(start_pos + static_cast<std::int64_t>(t));
        for (std::size_t j = 0; j < half; ++j) {
            const double freq = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(dh));
            const double ang = pos * freq;
            cosv[t * half + j] = static_cast<T>(std::cos(ang));
            sinv[t * half + j] = static_cast<T>(sign * std::sin(ang));
        }
    }

    BasicTensor<T> y(x.shape());
    for (std::size_t s = 0; s < slices; ++s) {
        for (std::size_t t = 0; t < tlen; ++t) {
            const T* xr = x.data() + (s * tlen + t) * dh;
            T* yr = y.data() + (s * tlen + t) * dh;
            const T* c = cosv.data() + t * half;
            const T* sn = sinv.data() + t * half;
            for (std::size_t j = 0; j < half; ++j) {
                const T x1 = xr[j];
                const T x2 = xr[j + half];
                yr[j] = x1 * c[j] - x2 * sn[j];
                yr[j + half] = x1 * sn[j] + x2 * c[j];
            }
        }
    }
    return y;
}

}  // namespace

template <typename T>
BasicTensor<T> rope_apply(const BasicTensor<T>& x, std::int64_t start_pos, double base) {
    auto y = rope_rotate(x, start_pos, base, 1.0);
    maybe_check(y, "rope_apply");
    return y;
}

template <typename T>
BasicTensor<T> rope_backward(const BasicTensor<T>& dy, std::int64_t start_pos, double base) {
    auto dx = rope_rotate(dy, start_pos, base, -1.0);
    maybe_check(dx, "rope_backward");
    return dx;
}

template <typename T>
BasicTensor<T> grouped_causal_attention(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v,
                                        BasicTensor<T>* probs) {
    require(q.rank() == 4 && k.rank() == 4 && v.rank() == 4, "attention expects 4-D q, k, v");
    require(k.shape() == v.shape(), "attention: k and v shapes differ");
    const std::size_t B = q.dim(0), H = q.dim(1), Tq = q.dim(2), dh = q.dim(3);
    const std::size_t K = k.dim(1), Tk = k.dim(2);
    require(k.dim(0) == B && k.dim(3) == dh, "attention: q/k batch or head dim mismatch");
    require(K > 0 && H % K == 0, "attention: query heads " + std::to_string(H) + " not divisible by kv heads " +
                                     std::to_string(K));
    require(Tk >= Tq, "attention: fewer keys than queries");
    const std::size_t group = H / K;
    const std::size_t offset = Tk - Tq;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    BasicTensor<T> out(q.shape());
    if (probs) *probs = BasicTensor<T>({B, H, Tq, Tk});
    std::vector<T> p(Tk);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t kh = h / group;
            const T* kb = k.data() + (b * K + kh) * Tk * dh;
            const T* vb = v.data() + (b * K + kh) * Tk * dh;
            for (std::size_t t = 0; t < Tq; ++t) {
                const T* qr = q.data() + ((b * H + h) * Tq + t) * dh;
                const std::size_t last = offset + t;
                T mx = -std::numeric_limits<T>::infinity();
                for (std::size_t u = 0; u <= last; ++u) {
                    const T* kr = kb + u * dh;
                    T s = 0;
                    for (std::size_t j = 0; j < dh; ++j) s += qr[j] * kr[j];
                    p[u] = s * scale;
                    mx = std::max(mx, p[u]);
                }
                double sum = 0.0;
                for (std::size_t u = 0; u <= last; ++u) {
                    p[u] = std::exp(p[u] - mx);
                    sum += p[u];
                }
                const T inv = static_cast<T>(1.0 / sum);
                T* orow = out.data() + ((b * H + h) * Tq + t) * dh;
                for (std::size_t u = 0; u <= last; ++u) {
                    p[u] *= inv;
                    const T* vr = vb + u * dh;
                    for (std::size_t j = 0; j < dh; ++j) orow[j] += p[u] * vr[j];
                }
                if (probs) {
                    T* pr = probs->data() + ((b * H + h) * Tq + t) * Tk;
                    std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(last + 1), pr);
                }
            }
        }
    }
    maybe_check(out, "grouped_causal_attention");
    return out;
}

template <typename T>
AttentionGrads<T> attention_backward(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v,
                                     const BasicTensor<T>& probs, const BasicTensor<T>& dout) {
    require(dout.shape() == q.shape(), "attention_backward: dout shape mismatch");
    const std::size_t B = q.dim(0), H = q.dim(1), Tq = q.dim(2), dh = q.dim(3);
    const std::size_t K = k.dim(1), Tk = k.dim(2);
    const std::size_t group = H / K;
    const std::size_t offset = Tk - Tq;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    AttentionGrads<T> g{BasicTensor<T>(q.shape()), BasicTensor<T>(k.shape()), BasicTensor<T>(v.shape())};
    std::vector<T> dp(Tk);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t kh = h / group;
            const T* kb = k.data() + (b * K + kh) * Tk * dh;
            const T* vb = v.data() + (b * K + kh) * Tk * dh;
            T* dkb = g.dk.data() + (b * K + kh) * Tk * dh;
            T* dvb = g.dv.data() + (b * K + kh) * Tk * dh;
            for (std::size_t t = 0; t < Tq; ++t) {
                const std::size_t row = (b * H + h) * Tq + t;
                const T* qr = q.data() + row * dh;
                const T* gr = dout.data() + row * dh;
                const T* pr = probs.data() + row * Tk;
                T* dqr = g.dq.data() + row * dh;
                const std::size_t last = offset + t;
                T dot = 0;
                for (std::size_t u = 0; u <= last; ++u) {
                    const T* vr = vb + u * dh;
                    T* dvr = dvb + u * dh;
                    T s = 0;
                    for (std::size_t j = 0; j < dh; ++j) {
                        s += gr[j] * vr[j];
                        dvr[j] += pr[u] * gr[j];
                    }
                    dp[u] = s;
                    dot += pr[u] * s;
                }
                for (std::size_t u = 0; u <= last; ++u) {
                    const T ds = pr[u] * (dp[u] - dot) * scale;
                    const T* kr = kb + u * dh;
                    T* dkr = dkb + u * dh;
                    for (std::size_t j = 0; j < dh; ++j) {
                        dqr[j] += ds * kr[j];
                        dkr[j] += ds * qr[j];
                    }
                }
            }
        }
    }
    maybe_check(g.dq, "attention_backward");
    maybe_check(g.dk, "attention_backward");
    maybe_check(g.dv, "attention_backward");
    return g;
}

template <typename T>
double cross_entropy(const BasicTensor<T>& logits, std::span<const std::int32_t> targets, std::int32_t ignore_id,
                     BasicTensor<T>* dlogits) {
    require(logits.rank() >= 1, "cross_entropy expects logits with a vocab dim");
    const std::size_t V = logits.dim(-1);
    const std::size_t rows = rows_of(logits.shape());
    require(rows == targets.size(), "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                        std::to_string(rows) + " logit rows");
    std::vector<double> lse(rows, 0.0);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::int32_t tgt = targets[r];
        if (tgt == ignore_id) continue;
        require(tgt >= 0 && static_cast<std::size_t>(tgt) < V,
                "cross_entropy: target " + std::to_string(tgt) + " out of range for vocab " + std::to_string(V));
        const T* xr = logits.data() + r * V;
        T mx = xr[0];
        for (std::size_t i = 1; i < V; ++i) mx = std::max(mx, xr[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < V; ++i) sum += std::exp(static_cast<double>(xr[i] - mx));
        lse[r] = static_cast<double>(mx) + std::log(sum);
        total += lse[r] - static_cast<double>(xr[tgt]);
        ++count;
    }
    if (count == 0) throw ConfigError("cross_entropy: every position is ignored");
    if (dlogits) {
        *dlogits = BasicTensor<T>(logits.shape());
        const double inv_count = 1.0 / static_cast<double>(count);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::int32_t tgt = targets[r];
            if (tgt == ignore_id) continue;
            const T* xr = logits.data() + r * V;
            T* dr = dlogits->data() + r * V;
            for (std::size_t i = 0; i < V; ++i) {
                dr[i] = static_cast<T>(std::exp(static_cast<double>(xr[i]) - lse[r]) * inv_count);
            }
            dr[tgt] -= static_cast<T>(inv_count);
        }
    }
    const double loss = total / static_cast<double>(count);
    if (!std::isfinite(loss)) throw NumericError("cross_entropy produced a non-finite loss");
    return loss;
}

template <typename T>
double global_grad_norm(const GradSet<T>& grads) {
    double ss = 0.0;
    for (const auto& [name, g] : grads) {
        for (std::size_t i = 0; i < g.numel(); ++i) ss += static_cast<double>(g[i]) * static_cast<double>(g[i]);
    }
    return std::sqrt(ss);
}

template <typename T>
double clip_gradients(GradSet<T>& grads, double max_norm) {
    const double norm = global_grad_norm(grads);
    if (!(norm > max_norm)) return norm;
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& [name, g] : grads) {
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= scale;
    }
    return norm;
}

GradCheckResult grad_check(const LossFn& loss_fn, const TensorMap<double>& params, const GradSet<double>& analytic,
                           const GradCheckOptions& options) {
    std::size_t total = 0;
    for (const auto& [name, p] : params) {
        auto it = analytic.find(name);
        require(it != analytic.end() && it->second.shape() == p.shape(),
                "grad_check: analytic gradient missing or misshapen for " + name);
        total += p.numel();
    }

    const bool subsample = total > options.full_check_limit;
    std::mt19937_64 rng(options.seed);
    TensorMap<double> work = params;
    GradCheckResult res;

    for (auto& [name, p] : work) {
        const auto& g = analytic.at(name);
        std::vector<std::size_t> idx(p.numel());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (subsample) {
            const double share = static_cast<double>(options.sample_size) * static_cast<double>(p.numel()) /
                                 static_cast<double>(total);
            std::size_t want = std::max<std::size_t>(4, static_cast<std::size_t>(std::ceil(share)));
            want = std::min(want, p.numel());
            for (std::size_t i = 0; i < want; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
                std::swap(idx[i], idx[pick(rng)]);
            }
            idx.resize(want);
            std::sort(idx.begin(), idx.end());
        }
        for (std::size_t i : idx) {
            const double orig = p[i];
            p[i] = orig + options.h;
            const double fp = loss_fn(work);
            p[i] = orig - options.h;
            const double fm = loss_fn(work);
            p[i] = orig;
            const double num = (fp - fm) / (2.0 * options.h);
            const double a = g[i];
            const double rel = std::abs(a - num) / std::max({1.0, std::abs(a), std::abs(num)});
            ++res.checked;
            if (res.worst_name.empty() || rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_name = name;
                res.worst_index = i;
            }
        }
    }
    return res;
}

#define LLF_INSTANTIATE_OPS(T)                                                                                     \
    template void check_finite<T>(const BasicTensor<T>&, const char*);                                             \
    template BasicTensor<T> matmul<T>(const BasicTensor<T>&, const BasicTensor<T>&);                               \
    template BasicTensor<T> matmul_nt<T>(const BasicTensor<T>&, const BasicTensor<T>&);                            \
    template void matmul_tn_acc<T>(const BasicTensor<T>&, const BasicTensor<T>&, BasicTensor<T>&);                 \
    template BasicTensor<T> silu<T>(const BasicTensor<T>&);                                                        \
    template BasicTensor<T> silu_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&);                        \
    template BasicTensor<T> rmsnorm<T>(const BasicTensor<T>&, const BasicTensor<T>&, double, std::vector<T>*);     \
    template BasicTensor<T> rmsnorm_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const std::vector<T>&, \
                                                const BasicTensor<T>&, BasicTensor<T>*);                           \
    template BasicTensor<T> softmax_rows<T>(const BasicTensor<T>&);                                                \
    template BasicTensor<T> rope_apply<T>(const BasicTensor<T>&, std::int64_t, double);                            \
    template BasicTensor<T> rope_backward<T>(const BasicTensor<T>&, std::int64_t, double);                         \
    template BasicTensor<T> grouped_causal_attention<T>(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                                        const BasicTensor<T>&, BasicTensor<T>*);                   \
    template AttentionGrads<T> attention_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                                     const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                                     const BasicTensor<T>&);                                       \
    template double cross_entropy<T>(const BasicTensor<T>&, std::span<const std::int32_t>, std::int32_t,           \
                                     BasicTensor<T>*);                                                             \
    template double global_grad_norm<T>(const GradSet<T>&);                                                        \
    template double clip_gradients<T>(GradSet<T>&, double);

LLF_INSTANTIATE_OPS(float)
LLF_INSTANTIATE_OPS(double)

#undef LLF_INSTANTIATE_OPS

}  // namespace llf::ops
