// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Declarative run configuration. A JSON file is merged over the built-in defaults, command-line
// flags are merged over that, and the merged result is what runs and gets persisted.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "llf/lora.h"
#include "llf/model.h"
#include "llf/optim.h"

namespace llf {

struct DataConfig {
    std::string train_dir = "data/shards";
    /// Directory of val_*.bin shards; empty means the train directory.
    std::string val_dir;
    std::string vocab = "data/gpt2/vocab.json";
    std::string merges = "data/gpt2/merges.txt";
    /// Optional multiple-choice JSONL evaluated at eval time.
    std::string mc_file;
    std::optional<std::uint64_t> shuffle_seed;
    std::int64_t shard_size = std::int64_t{1} << 24;
    double val_fraction = 0.01;
};

struct SftConfig {
    std::string data;
    std::int64_t batch = 32;
    std::int64_t accum = 16;
    std::int64_t max_len = 512;
    std::int64_t steps = 400;
    double peak_lr = 5e-5;
    std::int64_t warmup_steps = 5;
    std::string separator = "\n";
};

struct RunConfig {
    ModelConfig model;
    ScheduleConfig schedule;
    AdamWConfig optimizer;
    DataConfig data;
    std::int64_t batch = 16;
    std::int64_t seq = 1024;
    std::int64_t accum = 32;
    std::int64_t workers = 1;
    std::int64_t steps = 40000;
    std::int64_t checkpoint_every = 100;
    std::int64_t eval_every = 0;
    std::int64_t eval_batches = 4;
    std::int64_t throughput_window = 20;
    std::uint64_t seed = 0;
    bool deterministic = true;
    /// "f32" or "f64".
    std::string precision = "f32";
    std::string out_dir = "runs/default";
    std::optional<LoraConfig> lora;
    SftConfig sft;

    std::uint64_t tokens_per_step() const;
    /// Throws ConfigError describing the first problem found.
    void validate() const;

    nlohmann::json to_json() const;
    /// Strict: unknown keys at any level are rejected.
    static RunConfig from_json(const nlohmann::json& j);
};

/// The default configuration as JSON (the schema that files and flags are checked against).
nlohmann::json default_run_config_json();

struct EffectiveConfig {
    RunConfig config;
    nlohmann::json json;
    /// Same shape as `json`, each leaf "default", "file" or "flag".
    nlohmann::json provenance;
};

/// Merges `file` (if given) and `overrides` over the defaults, validates, and records provenance.
EffectiveConfig resolve_run_config(const std::optional<std::filesystem::path>& file,
                                   const nlohmann::json& overrides = nlohmann::json::object());

/// Same, with an already-parsed file layer (for example the config echoed into a checkpoint).
EffectiveConfig resolve_run_config_json(const nlohmann::json& file_layer,
                                        const nlohmann::json& overrides = nlohmann::json::object());

/// Sets a dotted key ("schedule.peak_lr") in a nested override object.
void set_override(nlohmann::json& overrides, const std::string& dotted_key, nlohmann::json value);

/// Training this config is refused unless explicitly confirmed (more than 1e8 parameters).
bool is_huge(const ModelConfig& cfg);

/// LLF_THREADS if set and positive, otherwise 1.
std::size_t thread_cap();

}  // namespace llf
