// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tensor primitives used by the model, each with its vector-Jacobian product.
//
// Every reduction runs in a fixed order (ascending inner index, or sorted
// parameter name then index), so identical inputs give bitwise identical
// outputs. Instantiated for float and double.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "llf/tensor.h"

namespace llf::ops {

/// When on, every op checks its output for NaN/Inf and throws NumericError.
void set_check_finite(bool on);
bool check_finite_enabled();

template <typename T>
void check_finite(const BasicTensor<T>& t, const char* op);

// ---- matrix products ---------------------------------------------------------

/// c[m×n] = a[m×k]·b[k×n]; each c[i][j] accumulates over ascending t.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// c[m×n] = a[m×k]·b[n×k]ᵀ. This is the linear-layer product x·Wᵀ with W stored [out×in].
template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// out[n×k] += a[m×n]ᵀ·b[m×k], accumulating over ascending row m. Weight gradients use this.
template <typename T>
void matmul_tn_acc(const BasicTensor<T>& a, const BasicTensor<T>& b, BasicTensor<T>& out);

// ---- elementwise / normalization --------------------------------------------

template <typename T>
BasicTensor<T> silu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> silu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy);

/// out = x / sqrt(mean(x²) + eps) ⊙ w over the last dim. `inv_rms` receives one value per row.
template <typename T>
BasicTensor<T> rmsnorm(const BasicTensor<T>& x, const BasicTensor<T>& w, double eps,
                       std::vector<T>* inv_rms = nullptr);

/// Returns dx; accumulates into dw when given.
template <typename T>
BasicTensor<T> rmsnorm_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const std::vector<T>& inv_rms,
                                const BasicTensor<T>& dy, BasicTensor<T>* dw);

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x);

// ---- attention ---------------------------------------------------------------

/// Rotary embedding over x[B×H×T×dh], half-split pairing (x[i], x[i+dh/2]).
/// Position of row t is start_pos + t; angle for pair j is pos·base^(−2j/dh).
template <typename T>
BasicTensor<T> rope_apply(const BasicTensor<T>& x, std::int64_t start_pos, double base);

/// VJP of rope_apply (rotation by the negated angle).
template <typename T>
BasicTensor<T> rope_backward(const BasicTensor<T>& dy, std::int64_t start_pos, double base);

/// Causal grouped-query attention. q[B×H×Tq×dh], k,v[B×K×Tk×dh] with Tk ≥ Tq; query row t
/// sits at absolute position (Tk−Tq)+t and sees keys 0..that position. Head h reads kv head
/// h/(H/K). `probs`, when given, receives the [B×H×Tq×Tk] attention weights (masked entries 0).
template <typename T>
BasicTensor<T> grouped_causal_attention(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v,
                                        BasicTensor<T>* probs = nullptr);

template <typename T>
struct AttentionGrads {
    BasicTensor<T> dq;
    BasicTensor<T> dk;
    BasicTensor<T> dv;
};

template <typename T>
AttentionGrads<T> attention_backward(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v,
                                     const BasicTensor<T>& probs, const BasicTensor<T>& dout);

// ---- loss / gradient utilities ----------------------------------------------

/// Mean over non-ignored positions of −log softmax(logits)[target]. Logits are [..×V] with one
/// row per target. When `dlogits` is given it receives d(loss)/d(logits); rows at ignored
/// positions are exactly zero. Throws if every position is ignored.
template <typename T>
double cross_entropy(const BasicTensor<T>& logits, std::span<const std::int32_t> targets, std::int32_t ignore_id,
                     BasicTensor<T>* dlogits = nullptr);

/// sqrt of the sum of squares, summed in sorted-name order then index order.
template <typename T>
double global_grad_norm(const GradSet<T>& grads);

/// Scales every entry by max_norm/norm when norm > max_norm. Returns the pre-clip norm.
template <typename T>
double clip_gradients(GradSet<T>& grads, double max_norm);

// ---- finite-difference verification -----------------------------------------

struct GradCheckOptions {
    double h = 1e-5;
    /// Tensors with more entries than this in total are checked on a seeded subsample.
    std::size_t full_check_limit = 10000;
    /// Entries drawn when subsampling (spread across tensors, at least a few per tensor).
    std::size_t sample_size = 2000;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst_name;
    std::size_t worst_index = 0;
};

using LossFn = std::function<double(const TensorMap<double>&)>;

/// Compares `analytic` against central differences (f(p+h)−f(p−h))/2h. Relative error is
/// |a−n| / max(1, |a|, |n|).
GradCheckResult grad_check(const LossFn& loss_fn, const TensorMap<double>& params, const GradSet<double>& analytic,
                           const GradCheckOptions& options = {});

}  // namespace llf::ops
