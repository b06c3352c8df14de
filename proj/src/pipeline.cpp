// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/pipeline.h"

#include <chrono>
#include <iostream>

#include "llf/eval.h"
#include "llf/sft.h"
#include "llf/tokenizer.h"

#ifndef LLF_VERSION
#define LLF_VERSION "0.0.0"
#endif

namespace llf {

namespace fs = std::filesystem;

namespace {

std::ostream& out_of(std::ostream* log) { return log ? *log : std::cerr; }

std::optional<std::size_t> expected_vocab(const ModelConfig& m) { return static_cast<std::size_t>(m.vocab_size); }

template <typename T>
TrainRunResult train_impl(const EffectiveConfig& eff, const TrainRunOptions& o) {
    std::ostream& log = out_of(o.log);
    const RunConfig& cfg = eff.config;
    if (is_huge(cfg.model) && !o.allow_huge) {
        throw ConfigError("refusing to train a model with " + std::to_string(count_parameters(cfg.model)) +
                          " parameters; pass --i-know-this-is-huge to proceed");
    }
    RunCorpora corpora = open_corpora(cfg);

    TrainState<T> state;
    nlohmann::json extra = nlohmann::json::object();
    if (o.resume_from) {
        TrainState<float> loaded = load_checkpoint(*o.resume_from, o.resume.mode);
        if (!(loaded.model == cfg.model)) throw ConfigError("checkpoint model config differs from the run config");
        if constexpr (std::is_same_v<T, float>) state = std::move(loaded);
        else state = cast_state<float, T>(loaded);
        prepare_resume(state, o.resume);
        state.schedule = cfg.schedule;
        state.optimizer = cfg.optimizer;
        if (o.resume.mode == ResumeMode::WeightsOnly) {
            log << "*** NOTICE: optimizer state discarded. Resuming from weights only: Adam moments are zeroed and "
                   "bias correction restarts at step "
                << state.step << ". Expect a temporary loss spike. ***\n";
        }
        extra["resumed_from"] = o.resume_from->string();
        extra["resume_mode"] = to_string(o.resume.mode);
        extra["restart_schedule"] = o.resume.restart_schedule;
        extra["reset_cursor"] = o.resume.reset_cursor;
    } else {
        state = TrainState<T>::fresh(cfg.model, cfg.seed, cfg.schedule, cfg.optimizer);
    }
    state.run_config = eff.json;

    TrainerOptions to;
    to.batch = static_cast<std::size_t>(cfg.batch);
    to.seq = static_cast<std::size_t>(cfg.seq);
    to.accum = static_cast<std::size_t>(cfg.accum);
    to.workers = static_cast<std::size_t>(cfg.workers);
    to.threads = thread_cap();
    to.verify_hashes = cfg.workers > 1;
    to.eval_batch = static_cast<std::size_t>(cfg.batch);
    to.eval_batches = static_cast<std::size_t>(cfg.eval_batches);
    Trainer<T> trainer(std::move(state), to, &corpora.train, corpora.val ? &*corpora.val : nullptr);

    const fs::path out_dir = cfg.out_dir;
    fs::create_directories(out_dir);
    TrainRunResult result;
    // A resumed segment gets its own log so the original run's metrics survive.
    const std::string metrics_name =
        o.resume_from ? "metrics_from_step" + std::to_string(trainer.global_step()) + ".jsonl" : "metrics.jsonl";
    result.metrics = o.metrics_path.value_or(out_dir / metrics_name);
    MetricsWriter metrics(result.metrics);
    metrics.write_header(run_meta(eff, extra));
    std::optional<MetricsWriter> sidecar;
    if (cfg.deterministic) sidecar.emplace(out_dir / "throughput.jsonl");

    std::optional<Tokenizer> tok;
    std::vector<MultipleChoiceItem> mc_items;
    if (!cfg.data.mc_file.empty()) {
        tok = Tokenizer::load(cfg.data.vocab, cfg.data.merges, expected_vocab(cfg.model));
        mc_items = load_mc_jsonl(cfg.data.mc_file);
    }

    log << "model parameters: " << count_parameters(cfg.model) << "\n"
        << "tokens per step: batch " << cfg.batch << " x seq " << cfg.seq << " x accum " << cfg.accum << " x workers "
        << cfg.workers << " = " << cfg.tokens_per_step() << "\n";

    ThroughputMeter meter(static_cast<std::size_t>(cfg.throughput_window));
    const auto start = std::chrono::steady_clock::now();
    while (trainer.global_step() < cfg.steps) {
        const auto t0 = std::chrono::steady_clock::now();
        const StepStats s = trainer.step();
        const auto t1 = std::chrono::steady_clock::now();
        const std::int64_t step = trainer.global_step();

        MetricsRecord rec;
        rec.step = step;
        rec.train_loss = s.loss;
        rec.lr = s.lr;
        rec.grad_norm = s.grad_norm;
        const bool eval_now = (cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.steps;
        if (eval_now && corpora.val) rec.val_loss = trainer.validation_loss();
        if (eval_now && tok) rec.mc_accuracy = mc_accuracy<T>(trainer.params(), cfg.model, *tok, mc_items);

        const double dt = std::chrono::duration<double>(t1 - t0).count();
        const double wall = std::chrono::duration<double>(t1 - start).count();
        if (dt > 0.0) {
            const double ema = meter.update(throughput(s.tokens, dt));
            if (sidecar) {
                sidecar->write_raw({{"step", step}, {"tokens_per_sec", ema}, {"wall_time", wall}});
            } else {
                rec.tokens_per_sec = ema;
                rec.wall_time = wall;
            }
        }
        metrics.log(rec);
        result.last_loss = s.loss;

        if (step % cfg.checkpoint_every == 0 || step == cfg.steps) {
            result.checkpoints.push_back(save_checkpoint(trainer.snapshot(), out_dir / "checkpoints"));
        }
        if (eval_now || step % cfg.checkpoint_every == 0) {
            log << "step " << step << " loss " << s.loss;
            if (rec.val_loss) log << " val_loss " << *rec.val_loss;
            if (rec.mc_accuracy) log << " mc_acc " << *rec.mc_accuracy;
            log << " lr " << s.lr << "\n";
        }
    }
    result.final_step = trainer.global_step();
    return result;
}

template <typename T>
FinetuneRunResult finetune_impl(const EffectiveConfig& eff, const fs::path& base_checkpoint, std::ostream& log) {
    const RunConfig& cfg = eff.config;
    if (cfg.sft.data.empty()) throw ConfigError("sft.data is not set");
    TrainState<float> base_state = load_checkpoint(base_checkpoint, ResumeMode::WeightsOnly);
    const ModelConfig model = base_state.model;
    ModelParams<T> base = cast_map<float, T>(base_state.params);
    if (cfg.sft.max_len > model.max_position) throw ConfigError("sft.max_len exceeds the base model's max_position");

    const Tokenizer tok = Tokenizer::load(cfg.data.vocab, cfg.data.merges, expected_vocab(model));
    AlpacaData data = ingest_alpaca(cfg.sft.data);
    if (data.skipped) log << "warning: skipped " << data.skipped << " records with an empty output\n";
    if (data.examples.empty()) throw FormatError(cfg.sft.data + ": no usable examples");
    render_all(tok, data.examples, cfg.sft.separator);

    const LoraConfig lcfg = cfg.lora.value_or(LoraConfig{});
    LoraAdapters<T> adapters = attach_adapters(base, lcfg, cfg.seed);
    SftOptions so;
    so.batch = static_cast<std::size_t>(cfg.sft.batch);
    so.accum = static_cast<std::size_t>(cfg.sft.accum);
    so.max_len = static_cast<std::size_t>(cfg.sft.max_len);
    so.schedule = ScheduleConfig{cfg.sft.peak_lr, cfg.sft.warmup_steps, cfg.sft.steps, 0.0, DecayShape::Linear};
    so.optimizer.beta1 = cfg.optimizer.beta1;
    so.optimizer.beta2 = cfg.optimizer.beta2;
    so.optimizer.eps = cfg.optimizer.eps;
    so.optimizer.grad_clip = cfg.optimizer.grad_clip;
    so.seed = cfg.seed;

    FinetuneRunResult result;
    result.examples = data.examples.size();
    result.skipped = data.skipped;
    log << "LoRA rank " << lcfg.rank << ", alpha " << lcfg.alpha << ", trainable parameters "
        << adapters.trainable_count() << ", examples " << result.examples << "\n";
    SftTrainer<T> trainer(base, model, std::move(adapters), std::move(data.examples), tok.eot_id(), so);

    const fs::path out_dir = cfg.out_dir;
    fs::create_directories(out_dir);
    result.metrics = out_dir / "sft_metrics.jsonl";
    MetricsWriter metrics(result.metrics);
    metrics.write_header(run_meta(eff, {{"kind", "finetune"}, {"base_checkpoint", base_checkpoint.string()}}));
    for (std::int64_t i = 0; i < cfg.sft.steps; ++i) {
        const auto r = trainer.step();
        MetricsRecord rec;
        rec.step = trainer.steps_done();
        rec.train_loss = r.loss;
        rec.lr = r.lr;
        rec.grad_norm = r.grad_norm;
        metrics.log(rec);
        result.losses.push_back(r.loss);
        if (rec.step % 50 == 0 || rec.step == cfg.sft.steps) log << "sft step " << rec.step << " loss " << r.loss << "\n";
    }
    result.adapter = out_dir / "adapter.ckpt";
    save_adapter(trainer.adapters(), model, result.adapter, {{"run_config", eff.json}});
    return result;
}

}  // namespace

std::string build_id() {
    return std::string("llf ") + LLF_VERSION + " (" +
#if defined(__clang__)
           "clang " __clang_version__
#elif defined(__GNUC__)
           "gcc " __VERSION__
#else
           "unknown compiler"
#endif
           + ")";
}

RunCorpora open_corpora(const RunConfig& cfg) {
    const auto train_paths = list_shards(cfg.data.train_dir, "train");
    if (train_paths.empty()) throw FormatError("no train_*.bin shards in " + cfg.data.train_dir);
    RunCorpora c{Corpus::open(train_paths, cfg.model.vocab_size, cfg.data.shuffle_seed), std::nullopt};
    const auto val_paths = list_shards(cfg.data.val_dir.empty() ? cfg.data.train_dir : cfg.data.val_dir, "val");
    if (!val_paths.empty()) c.val = Corpus::open(val_paths, cfg.model.vocab_size);
    return c;
}

nlohmann::json run_meta(const EffectiveConfig& eff, const nlohmann::json& extra) {
    nlohmann::json j = {
        {"config", eff.json},
        {"provenance", eff.provenance},
        {"build_id", build_id()},
        {"parameters", count_parameters(eff.config.model)},
        {"tokens_per_step", eff.config.tokens_per_step()},
        {"note",
         "warmup length, decay shape, AdamW betas/eps, weight decay and clip threshold are engine defaults "
         "unless set in the config file or flags (see provenance)"},
    };
    for (const auto& [k, v] : extra.items()) j[k] = v;
    return j;
}

TrainRunResult run_training(const EffectiveConfig& eff, const TrainRunOptions& options) {
    return eff.config.precision == "f64" ? train_impl<double>(eff, options) : train_impl<float>(eff, options);
}

FinetuneRunResult run_finetune(const EffectiveConfig& eff, const fs::path& base_checkpoint, std::ostream* log) {
    return eff.config.precision == "f64" ? finetune_impl<double>(eff, base_checkpoint, out_of(log))
                                         : finetune_impl<float>(eff, base_checkpoint, out_of(log));
}

}  // namespace llf
