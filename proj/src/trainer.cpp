// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/train.h"

#include <algorithm>
#include <exception>
#include <thread>

#include "llf/ops.h"

namespace llf {

namespace {

constexpr std::int32_t kNoIgnore = -1;

template <typename T>
void add_into(GradSet<T>& acc, const GradSet<T>& g) {
    for (const auto& [name, t] : g) {
        auto it = acc.find(name);
        if (it == acc.end()) {
            acc.emplace(name, t);
            continue;
        }
        T* a = it->second.data();
        const T* b = t.data();
        for (std::size_t i = 0; i < t.numel(); ++i) a[i] += b[i];
    }
}

template <typename T>
void divide(GradSet<T>& g, std::size_t n) {
    if (n == 1) return;
    const T d = static_cast<T>(n);
    for (auto& [name, t] : g) {
        T* p = t.data();
        for (std::size_t i = 0; i < t.numel(); ++i) p[i] /= d;
    }
}

// Runs fn(w) for every worker, on up to `threads` threads; rethrows the first failure.
template <typename Fn>
void for_each_worker(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t w = 0; w < n; ++w) fn(w);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t w = t; w < n; w += threads) {
                try {
                    fn(w);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

template <typename T>
GradSet<T> allreduce_mean(std::span<const GradSet<T>> per_worker) {
    if (per_worker.empty()) throw ConfigError("allreduce_mean: no workers");
    const auto& first = per_worker.front();
    for (std::size_t w = 1; w < per_worker.size(); ++w) {
        const auto& g = per_worker[w];
        if (g.size() != first.size()) throw ConfigError("allreduce_mean: worker " + std::to_string(w) + " key mismatch");
        for (const auto& [name, t] : first) {
            auto it = g.find(name);
            if (it == g.end()) {
                throw ConfigError("allreduce_mean: worker " + std::to_string(w) + " lacks '" + name + "'");
            }
            if (it->second.shape() != t.shape()) {
                throw ConfigError("allreduce_mean: worker " + std::to_string(w) + " shape mismatch for '" + name + "'");
            }
        }
    }
    GradSet<T> out = first;
    for (std::size_t w = 1; w < per_worker.size(); ++w) add_into(out, per_worker[w]);
    divide(out, per_worker.size());
    return out;
}

template <typename T>
WorkerSet<T> WorkerSet<T>::replicate(const ModelParams<T>& p, const OptimState<T>& o, std::size_t n) {
    if (n == 0) throw ConfigError("worker count must be >= 1");
    WorkerSet<T> ws;
    ws.params.assign(n, p);
    ws.optim.assign(n, o);
    return ws;
}

template <typename T>
std::vector<std::uint64_t> WorkerSet<T>::param_hashes() const {
    std::vector<std::uint64_t> out;
    for (const auto& p : params) out.push_back(hash_tensors(p));
    return out;
}

template <typename T>
void WorkerSet<T>::verify_identical() const {
    const auto hashes = param_hashes();
    for (std::size_t w = 1; w < hashes.size(); ++w) {
        if (hashes[w] != hashes[0]) {
            throw DivergenceError("worker " + std::to_string(w) + " params diverged from worker 0 (hash " +
                                  std::to_string(hashes[w]) + " vs " + std::to_string(hashes[0]) + ")");
        }
    }
}

template <typename T>
StepStats parallel_train_step(WorkerSet<T>& workers, const ModelConfig& cfg, const Corpus& corpus,
                              CorpusCursor& cursor, const StepOptions& o) {
    const std::size_t N = workers.size();
    if (N == 0) throw ConfigError("no workers");
    if (o.accum == 0) throw ConfigError("accumulation steps must be >= 1");
    if (o.verify_hashes) workers.verify_identical();

    const std::size_t B = o.batch_per_worker, T_ = o.seq;
    std::vector<GradSet<T>> grads(N);
    std::vector<double> losses(N, 0.0);
    for (std::size_t a = 0; a < o.accum; ++a) {
        const Batch global = corpus.next_batch(cursor, N * B, T_);
        for_each_worker(N, o.threads, [&](std::size_t w) {
            const auto first = global.inputs.ids.begin() + static_cast<std::ptrdiff_t>(w * B * T_);
            TokenBatch inputs(B, T_, std::vector<std::int32_t>(first, first + static_cast<std::ptrdiff_t>(B * T_)));
            std::span<const std::int32_t> targets(global.targets.data() + w * B * T_, B * T_);
            auto lg = loss_and_grads(workers.params[w], cfg, inputs, targets, kNoIgnore);
            losses[w] += lg.loss;
            if (a == 0) grads[w] = std::move(lg.grads);
            else add_into(grads[w], lg.grads);
        });
    }
    double loss = 0.0;
    for (std::size_t w = 0; w < N; ++w) {
        divide(grads[w], o.accum);
        loss += losses[w] / double(o.accum);
    }
    loss /= double(N);

    GradSet<T> reduced = allreduce_mean<T>(grads);
    StepStats stats;
    stats.loss = loss;
    stats.lr = o.lr;
    stats.tokens = static_cast<std::uint64_t>(N * B * T_ * o.accum);
    stats.grad_norm = o.optimizer.grad_clip > 0.0 ? ops::clip_gradients(reduced, o.optimizer.grad_clip)
                                                  : ops::global_grad_norm(reduced);
    for (std::size_t w = 0; w < N; ++w) adamw_step(workers.params[w], reduced, workers.optim[w], o.lr, o.optimizer);
    if (o.verify_hashes) workers.verify_identical();
    return stats;
}

double throughput(std::uint64_t tokens, double seconds) {
    if (!(seconds > 0.0)) throw ConfigError("throughput: elapsed time must be positive");
    return double(tokens) / seconds;
}

ThroughputMeter::ThroughputMeter(std::size_t window) : mAlpha(2.0 / (double(window) + 1.0)) {
    if (window == 0) throw ConfigError("throughput window must be >= 1");
}

double ThroughputMeter::update(double tokens_per_sec) {
    mValue = mValue ? mAlpha * tokens_per_sec + (1.0 - mAlpha) * *mValue : tokens_per_sec;
    return *mValue;
}

template <typename T>
Trainer<T>::Trainer(TrainState<T> state, TrainerOptions options, const Corpus* train, const Corpus* val)
    : mState(std::move(state)), mOptions(options), mTrain(train), mVal(val) {
    if (!mTrain) throw ConfigError("trainer needs a training corpus");
    if (mOptions.batch == 0 || mOptions.seq == 0 || mOptions.accum == 0) {
        throw ConfigError("batch, seq and accum must be positive");
    }
    if (mOptions.seq > static_cast<std::size_t>(mState.model.max_position)) {
        throw ConfigError("seq exceeds model max_position");
    }
    mState.schedule.validate();
    mState.optimizer.validate();
    mWorkers = WorkerSet<T>::replicate(mState.params, mState.optim, mOptions.workers);
    mState.params.clear();
    mState.optim = {};
}

template <typename T>
StepStats Trainer<T>::step() {
    StepOptions o;
    o.batch_per_worker = mOptions.batch;
    o.seq = mOptions.seq;
    o.accum = mOptions.accum;
    o.optimizer = mState.optimizer;
    o.threads = mOptions.threads;
    o.verify_hashes = mOptions.verify_hashes;
    const std::int64_t sched_step = mState.step - mState.schedule_offset;
    o.lr = lr_at_step(mState.schedule, std::max<std::int64_t>(0, sched_step));
    StepStats s = parallel_train_step(mWorkers, mState.model, *mTrain, mState.cursor, o);
    mState.step += 1;
    return s;
}

template <typename T>
double Trainer<T>::validation_loss() const {
    if (!mVal) throw ConfigError("no validation corpus configured");
    return llf::validation_loss<T>(params(), mState.model, *mVal, mOptions.eval_batch, mOptions.seq,
                                   mOptions.eval_batches);
}

template <typename T>
void Trainer<T>::set_workers(std::size_t n) {
    mWorkers = WorkerSet<T>::replicate(mWorkers.params.front(), mWorkers.optim.front(), n);
    mOptions.workers = n;
}

template <typename T>
TrainState<T> Trainer<T>::snapshot() const {
    TrainState<T> s = mState;
    s.params = mWorkers.params.front();
    s.optim = mWorkers.optim.front();
    return s;
}

template <typename T>
double validation_loss(const ModelParams<T>& params, const ModelConfig& cfg, const Corpus& val, std::size_t B,
                       std::size_t T_, std::size_t max_batches, const LoraAdapters<T>* lora) {
    if (max_batches == 0) throw ConfigError("max_batches must be >= 1");
    CorpusCursor cursor;
    double sum = 0.0;
    for (std::size_t b = 0; b < max_batches; ++b) {
        const Batch batch = val.next_batch(cursor, B, T_);
        sum += loss_only(params, cfg, batch.inputs, batch.targets, kNoIgnore, lora);
    }
    return sum / double(max_batches);
}

template <typename T>
void prepare_resume(TrainState<T>& state, const ResumeOptions& options) {
    if (options.mode == ResumeMode::WeightsOnly) {
        state.optim = OptimState<T>::zeros_for(state.params);
    }
    if (options.restart_schedule) state.schedule_offset = state.step;
    if (options.reset_cursor) state.cursor = {};
}

template <typename T>
std::vector<ResumeStep> resume_run(const std::filesystem::path& ckpt, const ResumeOptions& resume,
                                   const Corpus& corpus, std::int64_t n_steps, const TrainerOptions& options,
                                   const Corpus* val) {
    TrainState<float> loaded = load_checkpoint(ckpt, resume.mode);
    TrainState<T> state;
    if constexpr (std::is_same_v<T, float>) state = std::move(loaded);
    else state = cast_state<float, T>(loaded);
    prepare_resume(state, resume);
    Trainer<T> trainer(std::move(state), options, &corpus, val);
    std::vector<ResumeStep> out;
    for (std::int64_t i = 0; i < n_steps; ++i) {
        ResumeStep r;
        r.stats = trainer.step();
        r.step = trainer.global_step();
        if (val) r.val_loss = trainer.validation_loss();
        out.push_back(r);
    }
    return out;
}

#define LLF_TRAIN_INSTANTIATE(T)                                                                               \
    template GradSet<T> allreduce_mean<T>(std::span<const GradSet<T>>);                                        \
    template struct WorkerSet<T>;                                                                              \
    template StepStats parallel_train_step<T>(WorkerSet<T>&, const ModelConfig&, const Corpus&, CorpusCursor&, \
                                              const StepOptions&);                                             \
    template class Trainer<T>;                                                                                 \
    template double validation_loss<T>(const ModelParams<T>&, const ModelConfig&, const Corpus&, std::size_t,  \
                                       std::size_t, std::size_t, const LoraAdapters<T>*);                      \
    template void prepare_resume<T>(TrainState<T>&, const ResumeOptions&);                                     \
    template std::vector<ResumeStep> resume_run<T>(const std::filesystem::path&, const ResumeOptions&,         \
                                                   const Corpus&, std::int64_t, const TrainerOptions&,         \
                                                   const Corpus*);

LLF_TRAIN_INSTANTIATE(float)
LLF_TRAIN_INSTANTIATE(double)

}  // namespace llf
