// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// AdamW with decoupled weight decay, and the warmup + decay learning-rate schedule.

#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "llf/tensor.h"

namespace llf {

enum class DecayShape { Cosine, Linear };

std::string to_string(DecayShape s);
DecayShape decay_shape_from_string(const std::string& s);

struct ScheduleConfig {
    double peak_lr = 6e-4;
    std::int64_t warmup_steps = 700;
    std::int64_t total_steps = 40000;
    double min_lr_ratio = 0.1;
    DecayShape shape = DecayShape::Cosine;

    void validate() const;
    nlohmann::json to_json() const;
    static ScheduleConfig from_json(const nlohmann::json& j);
    bool operator==(const ScheduleConfig&) const = default;
};

/// step < W: peak·(step+1)/W. W <= step <= total: decay from peak to peak·min_lr_ratio.
/// step > total: the floor value.
double lr_at_step(const ScheduleConfig& sched, std::int64_t step);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.1;
    /// Global-norm clip threshold; 0 disables clipping.
    double grad_clip = 1.0;

    void validate() const;
    nlohmann::json to_json() const;
    static AdamWConfig from_json(const nlohmann::json& j);
    bool operator==(const AdamWConfig&) const = default;
};

template <typename T>
struct OptimState {
    TensorMap<T> m;
    TensorMap<T> v;
    std::int64_t step_count = 0;

    static OptimState zeros_for(const TensorMap<T>& params);
};

/// Weight decay applies to rank-2 tensors only.
bool decays(const Shape& shape);

/// One AdamW update of every tensor named in `grads`:
///   m <- b1·m + (1-b1)·g,  v <- b2·v + (1-b2)·g²
///   p <- p - lr·m̂/(sqrt(v̂)+eps) - lr·wd·p     (bias correction with step_count+1)
/// Throws ConfigError on missing names or shape mismatch.
template <typename T>
void adamw_step(TensorMap<T>& params, const GradSet<T>& grads, OptimState<T>& state, double lr,
                const AdamWConfig& cfg);

}  // namespace llf
