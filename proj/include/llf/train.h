// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training steps over N logical data-parallel workers. N = 1 is plain training.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "llf/checkpoint.h"
#include "llf/data.h"
#include "llf/error.h"
#include "llf/model.h"
#include "llf/optim.h"

namespace llf {

/// Raised when worker replicas stop being bitwise identical.
class DivergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Entrywise mean over workers, summed in ascending worker index.
/// Throws ConfigError on key or shape mismatch.
template <typename T>
GradSet<T> allreduce_mean(std::span<const GradSet<T>> per_worker);

template <typename T>
struct WorkerSet {
    std::vector<ModelParams<T>> params;
    std::vector<OptimState<T>> optim;

    static WorkerSet replicate(const ModelParams<T>& p, const OptimState<T>& o, std::size_t n);
    std::size_t size() const { return params.size(); }
    std::vector<std::uint64_t> param_hashes() const;
    /// Throws DivergenceError naming the first worker whose params differ from worker 0.
    void verify_identical() const;
};

struct StepOptions {
    std::size_t batch_per_worker = 8;
    std::size_t seq = 64;
    std::size_t accum = 1;
    double lr = 0.0;
    AdamWConfig optimizer;
    /// Worker threads; 1 runs workers sequentially. Results do not depend on it.
    std::size_t threads = 1;
    bool verify_hashes = false;
};

struct StepStats {
    double loss = 0.0;
    /// Global gradient norm before clipping.
    double grad_norm = 0.0;
    double lr = 0.0;
    std::uint64_t tokens = 0;
};

/// Each of the `accum` micro-steps reads one global batch of N·B_per_worker rows; worker w takes
/// rows [w·B, (w+1)·B). Worker grads are averaged over micro-steps, all-reduced, clipped, and the
/// same AdamW update is applied to every replica. Reported loss is the mean worker loss.
template <typename T>
StepStats parallel_train_step(WorkerSet<T>& workers, const ModelConfig& cfg, const Corpus& corpus,
                              CorpusCursor& cursor, const StepOptions& options);

/// tokens / seconds; throws ConfigError if seconds <= 0.
double throughput(std::uint64_t tokens, double seconds);

/// Exponential moving average with alpha = 2 / (window + 1), seeded by the first sample.
class ThroughputMeter {
public:
    explicit ThroughputMeter(std::size_t window = 20);
    /// Returns the updated average.
    double update(double tokens_per_sec);
    std::optional<double> value() const { return mValue; }

private:
    double mAlpha;
    std::optional<double> mValue;
};

struct TrainerOptions {
    std::size_t batch = 8;
    std::size_t seq = 64;
    std::size_t accum = 1;
    std::size_t workers = 1;
    std::size_t threads = 1;
    bool verify_hashes = false;
    std::size_t eval_batch = 8;
    std::size_t eval_batches = 4;
};

/// Owns the replicas and advances a TrainState one optimizer update at a time.
template <typename T>
class Trainer {
public:
    Trainer(TrainState<T> state, TrainerOptions options, const Corpus* train, const Corpus* val = nullptr);

    /// One update using lr_at_step(schedule, step - schedule_offset); step increments afterwards.
    StepStats step();
    double validation_loss() const;

    /// Switches the worker count between steps (replicas re-created from worker 0).
    void set_workers(std::size_t n);

    std::int64_t global_step() const { return mState.step; }
    const ModelParams<T>& params() const { return mWorkers.params.front(); }
    const WorkerSet<T>& workers() const { return mWorkers; }
    WorkerSet<T>& workers() { return mWorkers; }
    const TrainerOptions& options() const { return mOptions; }

    /// Current state (worker 0 replica).
    TrainState<T> snapshot() const;

private:
    TrainState<T> mState;  // params/optim live in mWorkers
    TrainerOptions mOptions;
    const Corpus* mTrain;
    const Corpus* mVal;
    WorkerSet<T> mWorkers;
};

/// Mean cross-entropy over the first `max_batches` batches of the validation stream, read from a
/// fresh cursor each call.
template <typename T>
double validation_loss(const ModelParams<T>& params, const ModelConfig& cfg, const Corpus& val, std::size_t B,
                       std::size_t T_, std::size_t max_batches, const LoraAdapters<T>* lora = nullptr);

struct ResumeOptions {
    ResumeMode mode = ResumeMode::Full;
    bool restart_schedule = false;
    bool reset_cursor = false;
};

/// Applies the resume-mode adjustments to a loaded state.
template <typename T>
void prepare_resume(TrainState<T>& state, const ResumeOptions& options);

struct ResumeStep {
    std::int64_t step = 0;
    StepStats stats;
    std::optional<double> val_loss;
};

/// Loads `ckpt`, continues for n_steps and returns the per-step results. With `val` set, the
/// validation loss is measured after every step.
template <typename T>
std::vector<ResumeStep> resume_run(const std::filesystem::path& ckpt, const ResumeOptions& resume,
                                   const Corpus& corpus, std::int64_t n_steps, const TrainerOptions& options,
                                   const Corpus* val = nullptr);

}  // namespace llf
