// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//   u64 header_len (LE) | JSON header (header_len bytes) | raw little-endian f32 payloads
// The header maps tensor name -> {"dtype": "F32", "shape": [...], "data_offsets": [begin, end]}
// (offsets relative to the payload start, ascending in name order) and carries a "__meta__" object.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llf/data.h"
#include "llf/lora.h"
#include "llf/model.h"
#include "llf/optim.h"

namespace llf {

inline constexpr std::int64_t kCheckpointVersion = 1;
inline constexpr const char* kMetaKey = "__meta__";

/// Everything needed to continue a run exactly.
template <typename T>
struct TrainState {
    ModelConfig model;
    ModelParams<T> params;
    OptimState<T> optim;
    /// Completed optimizer updates.
    std::int64_t step = 0;
    /// The schedule is evaluated at (step - schedule_offset); nonzero after --restart-schedule.
    std::int64_t schedule_offset = 0;
    ScheduleConfig schedule;
    AdamWConfig optimizer;
    CorpusCursor cursor;
    std::mt19937_64 rng;
    /// Effective run configuration, echoed verbatim (may be null).
    nlohmann::json run_config;

    static TrainState fresh(const ModelConfig& cfg, std::uint64_t seed, const ScheduleConfig& sched,
                            const AdamWConfig& opt);
};

template <typename T, typename U>
TrainState<U> cast_state(const TrainState<T>& s);

enum class ResumeMode { Full, WeightsOnly };

std::string to_string(ResumeMode m);
ResumeMode resume_mode_from_string(const std::string& s);

std::string rng_to_string(const std::mt19937_64& rng);
std::mt19937_64 rng_from_string(const std::string& s);

struct Container {
    nlohmann::json meta;
    TensorMap<float> tensors;
};

std::vector<std::uint8_t> encode_container(const TensorMap<float>& tensors, const nlohmann::json& meta);
Container decode_container(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

/// Writes to `<path>.partial` and renames into place.
void write_container(const std::filesystem::path& path, const TensorMap<float>& tensors, const nlohmann::json& meta);
Container read_container(const std::filesystem::path& path);

/// The parsed JSON header only; the payload is not read.
nlohmann::json read_container_header(const std::filesystem::path& path);

struct SaveOptions {
    /// Test hook: abort the write after this many bytes, leaving only the .partial file.
    std::optional<std::size_t> fail_after_bytes;
};

/// Writes `dir/step{N}.ckpt` (payloads in f32 regardless of T) and returns its path.
template <typename T>
std::filesystem::path save_checkpoint(const TrainState<T>& state, const std::filesystem::path& dir,
                                      const SaveOptions& options = {});

std::vector<std::uint8_t> encode_checkpoint(const TrainState<float>& state);

/// Full: everything restored. WeightsOnly: weights, model config, global step, schedule and
/// cursor restored; moments zeroed and optimizer step_count reset to 0.
TrainState<float> load_checkpoint(const std::filesystem::path& path, ResumeMode mode);

/// Name, dtype, shape and byte count per tensor, plus the meta block.
nlohmann::json inspect_checkpoint(const std::filesystem::path& path);

/// Adapter-only checkpoint: tensors lora.<host>.{A,B}; meta carries the LoraConfig and base ModelConfig.
template <typename T>
void save_adapter(const LoraAdapters<T>& adapters, const ModelConfig& base, const std::filesystem::path& path,
                  const nlohmann::json& extra = nullptr);

struct LoadedAdapter {
    ModelConfig base;
    LoraAdapters<float> adapters;
};

LoadedAdapter load_adapter(const std::filesystem::path& path);

/// `step{N}.ckpt` files in dir, highest step last.
std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& dir);

}  // namespace llf
