// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Low-rank adapters: W′x = Wx + (alpha/r)·B(Ax) on selected projections.

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llf/tensor.h"

namespace llf {

struct LoraConfig {
    std::int64_t rank = 128;
    double alpha = 16.0;
    double dropout = 0.0;
    /// Short projection names: any of q, k, v, o, gate, up, down.
    std::vector<std::string> targets = {"q", "k", "v", "o", "gate", "up", "down"};

    double scaling() const { return alpha / static_cast<double>(rank); }
    void validate() const;

    nlohmann::json to_json() const;
    static LoraConfig from_json(const nlohmann::json& j);
};

/// Factor pair for one host weight W[out×in]: A[r×in], B[out×r].
template <typename T>
struct LoraPair {
    BasicTensor<T> a;
    BasicTensor<T> b;
};

template <typename T>
struct LoraAdapters {
    LoraConfig config;
    /// Keyed by host parameter name, e.g. "layer.0.attn.q".
    std::map<std::string, LoraPair<T>> pairs;

    double scaling() const { return config.scaling(); }
    const LoraPair<T>* find(const std::string& host) const {
        auto it = pairs.find(host);
        return it == pairs.end() ? nullptr : &it->second;
    }

    /// Flattened view keyed "lora.<host>.A" / "lora.<host>.B" (checkpoint and optimizer naming).
    TensorMap<T> as_tensors() const;
    void assign_from(const TensorMap<T>& tensors);
    std::size_t trainable_count() const;
};

/// Maps a short target name to the host parameter suffix ("q" -> "attn.q", "gate" -> "mlp.gate").
std::string lora_target_suffix(const std::string& target);

/// Adapter tensor name for host parameter `host` and factor "A" or "B".
std::string lora_tensor_name(const std::string& host, const char* factor);

/// A ~ Normal(0, 0.02), B = 0 for every targeted projection in every layer.
template <typename T>
LoraAdapters<T> attach_adapters(const TensorMap<T>& params, const LoraConfig& cfg, std::uint64_t seed);

/// Base model plus adapters. Base tensors are frozen while adapters train.
template <typename T>
struct AdaptedModel {
    TensorMap<T> base;
    LoraAdapters<T> adapters;
    bool merged = false;
};

/// W_merged = W + (alpha/r)·B·A per target. Marks the model merged; a second call throws.
template <typename T>
TensorMap<T> merge_adapters(AdaptedModel<T>& model);

}  // namespace llf
