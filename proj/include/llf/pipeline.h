// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runs driven by an effective RunConfig: pre-training (fresh or resumed) with metrics
// logging and periodic checkpoints, and LoRA fine-tuning.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "llf/run_config.h"
#include "llf/train.h"

namespace llf {

std::string build_id();

struct TrainRunOptions {
    bool allow_huge = false;
    std::optional<std::filesystem::path> resume_from;
    ResumeOptions resume;
    /// Defaults to <out_dir>/metrics.jsonl, or <out_dir>/metrics_from_step<N>.jsonl when resuming at step N.
    std::optional<std::filesystem::path> metrics_path;
    std::ostream* log = nullptr;  // progress and notices; null means std::cerr
};

struct TrainRunResult {
    std::int64_t final_step = 0;
    std::filesystem::path metrics;
    std::vector<std::filesystem::path> checkpoints;
    double last_loss = 0.0;
};

/// Shards for a run: train_* from data.train_dir and val_* from data.val_dir (or train_dir).
struct RunCorpora {
    Corpus train;
    std::optional<Corpus> val;
};
RunCorpora open_corpora(const RunConfig& cfg);

/// The run-meta header written before step 1.
nlohmann::json run_meta(const EffectiveConfig& eff, const nlohmann::json& extra = nlohmann::json::object());

TrainRunResult run_training(const EffectiveConfig& eff, const TrainRunOptions& options = {});

struct FinetuneRunResult {
    std::filesystem::path adapter;
    std::filesystem::path metrics;
    std::vector<double> losses;
    std::size_t examples = 0;
    std::size_t skipped = 0;
};

/// LoRA SFT over cfg.sft.data on top of the weights in `base_checkpoint`.
FinetuneRunResult run_finetune(const EffectiveConfig& eff, const std::filesystem::path& base_checkpoint,
                               std::ostream* log = nullptr);

}  // namespace llf
