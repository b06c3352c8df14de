// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// LLaMa-style decoder: embedding -> L x (RMSNorm, GQA attention with RoPE, residual,
// RMSNorm, SiLU-gated MLP, residual) -> final RMSNorm -> untied LM head.
//
// Parameter names (also the checkpoint contract):
//   embed [V x d], lm_head [V x d], norm_final [d]
//   layer.{i}.attn.{q,o} [d x d], layer.{i}.attn.{k,v} [K*dh x d]
//   layer.{i}.mlp.{gate,up} [f x d], layer.{i}.mlp.down [d x f]
//   layer.{i}.norm_attn [d], layer.{i}.norm_mlp [d]

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "llf/lora.h"
#include "llf/tensor.h"

namespace llf {

struct ModelConfig {
    std::int64_t hidden_size = 2048;
    std::int64_t intermediate_size = 5120;
    std::int64_t n_layers = 36;
    std::int64_t n_heads = 32;
    std::int64_t n_kv_heads = 8;
    std::int64_t vocab_size = 50257;
    std::int64_t max_position = 1024;
    double rope_theta = 500000.0;
    double rms_eps = 1e-5;
    bool attention_bias = false;
    bool mlp_bias = false;
    double attention_dropout = 0.0;

    std::int64_t head_dim() const { return hidden_size / n_heads; }
    std::int64_t kv_dim() const { return head_dim() * n_kv_heads; }

    /// Throws ConfigError on any inconsistency (non-positive sizes, d % H, H % K, odd head dim,
    /// biases or dropout switched on).
    void validate() const;

    nlohmann::json to_json() const;
    /// Unknown keys are rejected; missing keys keep their defaults.
    static ModelConfig from_json(const nlohmann::json& j);

    /// The 1716M configuration.
    static ModelConfig paper_1716m();

    bool operator==(const ModelConfig&) const = default;
};

/// 2·V·d + d + L·(2d² + 2d·dh·K + 3d·f + 2d)
std::uint64_t count_parameters(const ModelConfig& cfg);

/// Canonical (name, shape) list in layer order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg);

template <typename T>
using ModelParams = TensorMap<T>;

/// Matrices ~ Normal(0, 0.02); attn.o and mlp.down additionally scaled by 1/sqrt(2L); norm
/// weights 1. Deterministic in `seed`.
template <typename T>
ModelParams<T> build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Throws ConfigError unless `params` has exactly the names and shapes of `cfg`.
template <typename T>
void check_params(const ModelParams<T>& params, const ModelConfig& cfg);

/// Row-major [rows x cols] integer ids.
struct TokenBatch {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int32_t> ids;

    TokenBatch() = default;
    TokenBatch(std::size_t r, std::size_t c, std::vector<std::int32_t> v);
    static TokenBatch single(std::vector<std::int32_t> v);
};

/// Per-layer keys/values [B x K x t x dh] after RoPE.
template <typename T>
struct KVCache {
    std::vector<BasicTensor<T>> keys;
    std::vector<BasicTensor<T>> values;
    std::size_t length = 0;
};

/// Logits [B x T x V]. With a cache, RoPE starts at the cached length and the cache grows by T.
template <typename T>
BasicTensor<T> forward_logits(const ModelParams<T>& params, const ModelConfig& cfg, const TokenBatch& tokens,
                              KVCache<T>* cache = nullptr, const LoraAdapters<T>* lora = nullptr);

template <typename T>
struct LossAndGrads {
    double loss = 0.0;
    GradSet<T> grads;
};

/// Mean cross-entropy of forward_logits against `targets` plus its exact gradient.
/// With `train_base` the grads cover every model parameter; without it (adapter training)
/// they cover only the adapter tensors, named as in LoraAdapters::as_tensors.
template <typename T>
LossAndGrads<T> loss_and_grads(const ModelParams<T>& params, const ModelConfig& cfg, const TokenBatch& inputs,
                               std::span<const std::int32_t> targets, std::int32_t ignore_id,
                               const LoraAdapters<T>* lora = nullptr, bool train_base = true);

/// Loss only (no activations kept).
template <typename T>
double loss_only(const ModelParams<T>& params, const ModelConfig& cfg, const TokenBatch& inputs,
                 std::span<const std::int32_t> targets, std::int32_t ignore_id,
                 const LoraAdapters<T>* lora = nullptr);

struct SamplingOptions {
    bool greedy = true;
    double temperature = 1.0;
    /// 0 keeps the full distribution.
    std::int64_t top_k = 0;
    std::uint64_t seed = 0;
};

/// Appends up to max_new tokens after `prompt`, stopping early when `eot_id` is produced (the
/// terminator is not returned) or the context reaches max_position. Greedy picks the lowest
/// index among equal maxima. `use_cache` false recomputes the full prefix every step.
template <typename T>
std::vector<std::int32_t> generate(const ModelParams<T>& params, const ModelConfig& cfg,
                                   std::span<const std::int32_t> prompt, std::size_t max_new,
                                   const SamplingOptions& sampling, std::optional<std::int32_t> eot_id,
                                   const LoraAdapters<T>* lora = nullptr, bool use_cache = true);

}  // namespace llf
