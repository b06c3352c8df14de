// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Instruction tuning: Vicuna-1.1 chat rendering, alpaca ingestion and LoRA steps with a loss
// restricted to the assistant response and its terminator.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "llf/lora.h"
#include "llf/model.h"
#include "llf/optim.h"

namespace llf {

class Tokenizer;

inline constexpr const char* kChatSystem =
    "A chat between a curious user and an artificial intelligence assistant. The assistant gives helpful, "
    "detailed, and polite answers to the user's questions.";

inline constexpr std::int32_t kIgnoreIndex = -100;

/// "{system}{sep}USER: {user}{sep}ASSISTANT:" and, with an assistant turn, " {assistant}<|endoftext|>".
/// `trailing_space` appends a single space to the inference rendering.
std::string format_chat(const std::string& user, const std::optional<std::string>& assistant = std::nullopt,
                        bool trailing_space = false, const std::string& separator = "\n");

struct ChatExample {
    std::string user_text;
    std::string assistant_text;
    std::vector<std::int32_t> ids;
    /// True on assistant-response tokens and the terminator (a contiguous suffix).
    std::vector<std::uint8_t> mask;
};

/// ids = encode(prompt) ++ encode(" " + assistant) ++ [eot], equal to encode(format_chat(user, assistant)).
ChatExample render_example(const Tokenizer& tok, const std::string& user, const std::string& assistant,
                           const std::string& separator = "\n");

struct AlpacaData {
    std::vector<ChatExample> examples;  // text fields only
    std::size_t skipped = 0;            // records with a missing or empty output
};

/// JSON array of {instruction, input, output}. user_text = instruction, plus "\n\n" + input when
/// input is non-empty. Malformed JSON raises FormatError with the byte offset.
AlpacaData parse_alpaca(const std::string& json_text, const std::string& origin = "<memory>");
AlpacaData ingest_alpaca(const std::filesystem::path& path);

void render_all(const Tokenizer& tok, std::vector<ChatExample>& examples, const std::string& separator = "\n");

struct SftBatch {
    TokenBatch inputs;
    std::vector<std::int32_t> targets;  // kIgnoreIndex where the mask is false or padded
};

/// Right-pads to the longest example (capped at max_len + 1 tokens) with `pad_id`.
SftBatch make_sft_batch(std::span<const ChatExample* const> examples, std::int32_t pad_id, std::size_t max_len);

/// One adapter update over the given micro-batches (gradients averaged). Base weights are untouched.
/// Returns the mean micro-batch loss and writes the pre-clip gradient norm if requested.
template <typename T>
double sft_step(const ModelParams<T>& base, const ModelConfig& cfg, LoraAdapters<T>& adapters,
                std::span<const SftBatch> micro_batches, OptimState<T>& state, double lr, const AdamWConfig& opt,
                double* grad_norm = nullptr);

struct SftOptions {
    std::size_t batch = 32;
    std::size_t accum = 16;
    std::size_t max_len = 512;
    ScheduleConfig schedule{5e-5, 5, 400, 0.0, DecayShape::Linear};
    AdamWConfig optimizer{0.9, 0.95, 1e-8, 0.0, 1.0};
    std::uint64_t seed = 0;
};

/// Draws examples in a seeded order reshuffled every epoch.
template <typename T>
class SftTrainer {
public:
    SftTrainer(const ModelParams<T>& base, ModelConfig cfg, LoraAdapters<T> adapters,
               std::vector<ChatExample> examples, std::int32_t pad_id, SftOptions options);

    struct Result {
        double loss = 0.0;
        double grad_norm = 0.0;
        double lr = 0.0;
    };
    Result step();

    std::int64_t steps_done() const { return mStep; }
    const LoraAdapters<T>& adapters() const { return mAdapters; }

private:
    const ChatExample* next_example();

    const ModelParams<T>& mBase;
    ModelConfig mConfig;
    LoraAdapters<T> mAdapters;
    std::vector<ChatExample> mExamples;
    std::int32_t mPad;
    SftOptions mOptions;
    OptimState<T> mState;
    std::mt19937_64 mRng;
    std::vector<std::size_t> mOrder;
    std::size_t mPos = 0;
    std::int64_t mStep = 0;
};

}  // namespace llf
