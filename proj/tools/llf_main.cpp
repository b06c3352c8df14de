// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// llf: tokenize, train, resume, finetune, generate, eval, report, inspect.
// Exit codes: 0 success, 1 usage/config error, 2 data/format error, 3 numeric failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "llf/checkpoint.h"
#include "llf/data.h"
#include "llf/error.h"
#include "llf/eval.h"
#include "llf/pipeline.h"
#include "llf/run_config.h"
#include "llf/sft.h"
#include "llf/tokenizer.h"
#include "llf/train.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef LLF_SOURCE_DATA_DIR
#define LLF_SOURCE_DATA_DIR "data"
#endif

// Relative tokenizer paths that do not exist under the working directory fall back to the
// directory the project was built from.
std::string resolve_data_path(const std::string& p) {
    if (p.empty() || fs::exists(p) || fs::path(p).is_absolute()) return p;
    const fs::path rel = fs::path(p).lexically_normal();
    auto it = rel.begin();
    if (it != rel.end() && *it == "data") {
        fs::path rest;
        for (++it; it != rel.end(); ++it) rest /= *it;
        const fs::path alt = fs::path(LLF_SOURCE_DATA_DIR) / rest;
        if (fs::exists(alt)) return alt.string();
    }
    return p;
}

llf::Tokenizer load_tokenizer(const std::string& vocab, const std::string& merges) {
    return llf::Tokenizer::load(resolve_data_path(vocab), resolve_data_path(merges));
}

struct ConfigFlags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::int64_t> steps, batch, seq, accum, workers, checkpoint_every, eval_every, eval_batches, warmup,
        total_steps;
    std::optional<double> lr;
    std::optional<std::string> out_dir, precision, train_dir, val_dir, mc_file, vocab, merges, sft_data;

    void add(CLI::App* app) {
        app->add_option("--config", config, "Run-config JSON file");
        app->add_option("--set", sets, "Override any config key: --set schedule.min_lr_ratio=0.2 (value parsed as JSON)");
        app->add_option("--steps", steps, "steps");
        app->add_option("--batch", batch, "batch (per worker)");
        app->add_option("--seq", seq, "seq");
        app->add_option("--accum", accum, "accum");
        app->add_option("--workers", workers, "workers");
        app->add_option("--checkpoint-every", checkpoint_every, "checkpoint_every");
        app->add_option("--eval-every", eval_every, "eval_every");
        app->add_option("--eval-batches", eval_batches, "eval_batches");
        app->add_option("--lr", lr, "schedule.peak_lr");
        app->add_option("--warmup", warmup, "schedule.warmup_steps");
        app->add_option("--total-steps", total_steps, "schedule.total_steps");
        app->add_option("--out-dir", out_dir, "out_dir");
        app->add_option("--precision", precision, "precision (f32 | f64)");
        app->add_option("--train-dir", train_dir, "data.train_dir");
        app->add_option("--val-dir", val_dir, "data.val_dir");
        app->add_option("--mc-file", mc_file, "data.mc_file");
        app->add_option("--vocab", vocab, "data.vocab");
        app->add_option("--merges", merges, "data.merges");
        app->add_option("--sft-data", sft_data, "sft.data");
    }

    json overrides(std::optional<std::uint64_t> seed, std::optional<bool> deterministic) const {
        json o = json::object();
        auto put = [&](const char* key, const auto& v) {
            if (v) llf::set_override(o, key, *v);
        };
        put("steps", steps);
        put("batch", batch);
        put("seq", seq);
        put("accum", accum);
        put("workers", workers);
        put("checkpoint_every", checkpoint_every);
        put("eval_every", eval_every);
        put("eval_batches", eval_batches);
        put("schedule.peak_lr", lr);
        put("schedule.warmup_steps", warmup);
        put("schedule.total_steps", total_steps);
        put("out_dir", out_dir);
        put("precision", precision);
        put("data.train_dir", train_dir);
        put("data.val_dir", val_dir);
        put("data.mc_file", mc_file);
        put("data.vocab", vocab);
        put("data.merges", merges);
        put("sft.data", sft_data);
        put("seed", seed);
        put("deterministic", deterministic);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0) throw llf::ConfigError("--set expects key=value, got '" + s + "'");
            const std::string key = s.substr(0, eq), text = s.substr(eq + 1);
            json value = json::parse(text, nullptr, false);
            if (value.is_discarded()) value = text;  // bare strings
            llf::set_override(o, key, value);
        }
        return o;
    }
};

llf::EffectiveConfig resolve(const ConfigFlags& flags, const json& overrides,
                             const std::optional<json>& fallback_layer = std::nullopt) {
    llf::EffectiveConfig eff;
    if (!flags.config.empty()) eff = llf::resolve_run_config(fs::path(flags.config), overrides);
    else if (fallback_layer) eff = llf::resolve_run_config_json(*fallback_layer, overrides);
    else eff = llf::resolve_run_config(std::nullopt, overrides);
    eff.config.data.vocab = resolve_data_path(eff.config.data.vocab);
    eff.config.data.merges = resolve_data_path(eff.config.data.merges);
    return eff;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

template <typename T>
int do_generate(const llf::ModelParams<T>& params, const llf::ModelConfig& cfg, const llf::Tokenizer& tok,
                const std::vector<std::int32_t>& prompt, std::size_t max_new, const llf::SamplingOptions& sampling,
                const llf::LoraAdapters<T>* lora, bool use_cache) {
    const auto out = llf::generate<T>(params, cfg, prompt, max_new, sampling, tok.eot_id(), lora, use_cache);
    std::cout << tok.decode(out) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"llf: pre-training, resume, LoRA fine-tuning and evaluation of a LLaMa-style model"};
    app.require_subcommand(1);
    app.set_version_flag("--version", llf::build_id());

    std::optional<std::uint64_t> seed;
    bool det_on = false, det_off = false;
    app.add_option("--seed", seed, "seed")->configurable(false);
    app.add_flag("--deterministic", det_on, "deterministic = true");
    app.add_flag("--no-deterministic", det_off, "deterministic = false");

    // tokenize
    auto* tokenize = app.add_subcommand("tokenize", "Encode text/JSONL files into token shards");
    std::vector<std::string> tk_inputs;
    std::string tk_out, tk_vocab = "data/gpt2/vocab.json", tk_merges = "data/gpt2/merges.txt", tk_dtype = "u16";
    std::size_t tk_shard = std::size_t{1} << 24;
    double tk_val = 0.01;
    tokenize->add_option("inputs", tk_inputs, "Input files (.txt: one document; .jsonl: field 'text' per line)")
        ->required();
    tokenize->add_option("--out", tk_out, "Output directory")->required();
    tokenize->add_option("--vocab", tk_vocab, "vocab.json");
    tokenize->add_option("--merges", tk_merges, "merges.txt");
    tokenize->add_option("--shard-size", tk_shard, "Tokens per shard");
    tokenize->add_option("--val-fraction", tk_val, "Fraction of documents held out for validation");
    tokenize->add_option("--dtype", tk_dtype, "u16 or u32")->check(CLI::IsMember({"u16", "u32"}));

    // train
    auto* train = app.add_subcommand("train", "Pre-train from a run config");
    ConfigFlags train_flags;
    train_flags.add(train);
    bool allow_huge = false;
    train->add_flag("--i-know-this-is-huge", allow_huge, "Allow training configs above 1e8 parameters");

    // resume
    auto* resume = app.add_subcommand("resume", "Continue training from a checkpoint");
    ConfigFlags resume_flags;
    resume_flags.add(resume);
    std::string rs_ckpt, rs_mode = "full";
    bool rs_restart = false, rs_reset_cursor = false, rs_allow_huge = false;
    resume->add_option("checkpoint", rs_ckpt, "Checkpoint file")->required();
    resume->add_option("--mode", rs_mode, "full | weights-only")
        ->check(CLI::IsMember({"full", "weights-only", "weights_only"}));
    resume->add_flag("--restart-schedule", rs_restart, "Restart the LR schedule (warmup) at the resume step");
    resume->add_flag("--reset-cursor", rs_reset_cursor, "Restart the data stream from the beginning");
    resume->add_flag("--i-know-this-is-huge", rs_allow_huge, "Allow training configs above 1e8 parameters");

    // finetune
    auto* finetune = app.add_subcommand("finetune", "LoRA instruction tuning on alpaca-format data");
    ConfigFlags ft_flags;
    ft_flags.add(finetune);
    std::string ft_base;
    finetune->add_option("--base", ft_base, "Base model checkpoint")->required();

    // generate
    auto* gen = app.add_subcommand("generate", "Generate text from a checkpoint");
    std::string g_ckpt, g_adapter, g_prompt, g_chat, g_vocab = "data/gpt2/vocab.json",
                                                   g_merges = "data/gpt2/merges.txt";
    std::size_t g_max_new = 64;
    bool g_trailing = false, g_sample = false, g_show = false, g_no_cache = false;
    double g_temp = 1.0;
    std::int64_t g_top_k = 0;
    gen->add_option("--checkpoint", g_ckpt, "Checkpoint file")->required();
    gen->add_option("--adapter", g_adapter, "LoRA adapter checkpoint");
    auto* g_prompt_opt = gen->add_option("--prompt", g_prompt, "Raw prompt text");
    auto* g_chat_opt = gen->add_option("--chat", g_chat, "User message rendered with the chat template");
    g_prompt_opt->excludes(g_chat_opt);
    gen->add_flag("--trailing-space", g_trailing, "Append a space after 'ASSISTANT:' in --chat mode");
    gen->add_option("--max-new", g_max_new, "Maximum new tokens");
    gen->add_flag("--sample", g_sample, "Sample instead of greedy decoding");
    gen->add_option("--temperature", g_temp, "Sampling temperature");
    gen->add_option("--top-k", g_top_k, "Sampling top-k (0 = full distribution)");
    gen->add_flag("--show-tokens", g_show, "Print the prompt's token pieces first");
    gen->add_flag("--no-cache", g_no_cache, "Recompute the full prefix every step");
    gen->add_option("--vocab", g_vocab, "vocab.json");
    gen->add_option("--merges", g_merges, "merges.txt");

    // eval
    auto* ev = app.add_subcommand("eval", "Validation loss or multiple-choice accuracy");
    std::string e_ckpt, e_val, e_mc, e_vocab = "data/gpt2/vocab.json", e_merges = "data/gpt2/merges.txt";
    std::size_t e_batch = 8, e_seq = 64, e_batches = 4;
    bool e_raw = false;
    ev->add_option("--checkpoint", e_ckpt, "Checkpoint file")->required();
    auto* e_val_opt = ev->add_option("--val", e_val, "Directory with val_*.bin shards");
    auto* e_mc_opt = ev->add_option("--mc", e_mc, "Multiple-choice JSONL");
    e_val_opt->excludes(e_mc_opt);
    ev->add_option("--batch", e_batch, "Validation batch size");
    ev->add_option("--seq", e_seq, "Validation sequence length");
    ev->add_option("--batches", e_batches, "Validation batches");
    ev->add_flag("--raw", e_raw, "Raw-sum scoring instead of length-normalized");
    ev->add_option("--vocab", e_vocab, "vocab.json");
    ev->add_option("--merges", e_merges, "merges.txt");

    // report
    auto* rep = app.add_subcommand("report", "Correlation report and metric panels");
    bool r_fixture = false, r_json = false;
    std::string r_metrics, r_plots, r_throughput;
    std::vector<std::string> r_pairs;
    rep->add_flag("--paper-fixture", r_fixture, "Correlations of the embedded training-step evaluation tables");
    rep->add_option("--metrics", r_metrics, "metrics.jsonl");
    rep->add_option("--pair", r_pairs, "Column pair x:y (repeatable)");
    rep->add_option("--plots", r_plots, "Write SVG panels into this directory");
    rep->add_option("--throughput", r_throughput, "throughput.jsonl sidecar for the tokens/sec panel");
    rep->add_flag("--json", r_json, "JSON output");

    // inspect
    auto* insp = app.add_subcommand("inspect", "Print a checkpoint header");
    std::string i_ckpt;
    insp->add_option("checkpoint", i_ckpt, "Checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (det_on && det_off) throw llf::ConfigError("--deterministic and --no-deterministic are exclusive");
        std::optional<bool> deterministic;
        if (det_on) deterministic = true;
        if (det_off) deterministic = false;

        if (*tokenize) {
            const auto tok = load_tokenizer(tk_vocab, tk_merges);
            std::vector<fs::path> inputs(tk_inputs.begin(), tk_inputs.end());
            llf::TokenizeOptions o;
            o.shard_size = tk_shard;
            o.val_fraction = tk_val;
            o.dtype = tk_dtype == "u32" ? llf::ShardDtype::U32 : llf::ShardDtype::U16;
            const auto r = llf::tokenize_corpus(llf::read_documents(inputs), tok, o, tk_out);
            print_json({{"documents", r.documents},
                        {"train_tokens", r.train_tokens},
                        {"val_tokens", r.val_tokens},
                        {"train_shards", r.train_shards.size()},
                        {"val_shards", r.val_shards.size()}});
            return 0;
        }
        if (*train) {
            const auto eff = resolve(train_flags, train_flags.overrides(seed, deterministic));
            llf::TrainRunOptions o;
            o.allow_huge = allow_huge;
            const auto r = llf::run_training(eff, o);
            std::cerr << "done: step " << r.final_step << ", metrics " << r.metrics.string() << "\n";
            return 0;
        }
        if (*resume) {
            const json header = llf::read_container_header(rs_ckpt);
            const json& meta = header.at(llf::kMetaKey);
            std::optional<json> echoed;
            if (meta.contains("run_config")) echoed = meta["run_config"];
            const auto eff = resolve(resume_flags, resume_flags.overrides(seed, deterministic), echoed);
            llf::TrainRunOptions o;
            o.allow_huge = rs_allow_huge;
            o.resume_from = fs::path(rs_ckpt);
            o.resume.mode = llf::resume_mode_from_string(rs_mode);
            o.resume.restart_schedule = rs_restart;
            o.resume.reset_cursor = rs_reset_cursor;
            const auto r = llf::run_training(eff, o);
            std::cerr << "done: step " << r.final_step << ", metrics " << r.metrics.string() << "\n";
            return 0;
        }
        if (*finetune) {
            const auto eff = resolve(ft_flags, ft_flags.overrides(seed, deterministic));
            const auto r = llf::run_finetune(eff, ft_base);
            std::cerr << "done: adapter " << r.adapter.string() << "\n";
            return 0;
        }
        if (*gen) {
            if (g_prompt_opt->count() == 0 && g_chat_opt->count() == 0) {
                throw llf::ConfigError("generate needs --prompt or --chat");
            }
            if (g_trailing && g_chat_opt->count() == 0) throw llf::ConfigError("--trailing-space applies to --chat");
            const auto state = llf::load_checkpoint(g_ckpt, llf::ResumeMode::WeightsOnly);
            const auto tok = load_tokenizer(g_vocab, g_merges);
            if (tok.vocab_size() != static_cast<std::size_t>(state.model.vocab_size)) {
                throw llf::ConfigError("tokenizer vocabulary does not match the model");
            }
            const std::string text = g_chat_opt->count() ? llf::format_chat(g_chat, std::nullopt, g_trailing) : g_prompt;
            const auto prompt = tok.encode(text);
            if (g_show) print_json({{"prompt_tokens", tok.encode_pieces(text)}});
            std::optional<llf::LoadedAdapter> adapter;
            if (!g_adapter.empty()) {
                adapter = llf::load_adapter(g_adapter);
                if (!(adapter->base == state.model)) throw llf::ConfigError("adapter was trained for a different model");
            }
            llf::SamplingOptions s;
            s.greedy = !g_sample;
            s.temperature = g_temp;
            s.top_k = g_top_k;
            s.seed = seed.value_or(0);
            return do_generate<float>(state.params, state.model, tok, prompt, g_max_new, s,
                                      adapter ? &adapter->adapters : nullptr, !g_no_cache);
        }
        if (*ev) {
            if (e_val_opt->count() == 0 && e_mc_opt->count() == 0) throw llf::ConfigError("eval needs --val or --mc");
            const auto state = llf::load_checkpoint(e_ckpt, llf::ResumeMode::WeightsOnly);
            if (!e_val.empty()) {
                const auto shards = llf::list_shards(e_val, "val");
                if (shards.empty()) throw llf::FormatError("no val_*.bin shards in " + e_val);
                const auto corpus = llf::Corpus::open(shards, state.model.vocab_size);
                const double loss =
                    llf::validation_loss<float>(state.params, state.model, corpus, e_batch, e_seq, e_batches);
                print_json({{"step", state.step}, {"val_loss", loss}});
                return 0;
            }
            const auto tok = load_tokenizer(e_vocab, e_merges);
            const auto items = llf::load_mc_jsonl(e_mc);
            const double acc = llf::mc_accuracy<float>(state.params, state.model, tok, items, !e_raw);
            print_json({{"step", state.step},
                        {"items", items.size()},
                        {"mc_accuracy", acc},
                        {"scoring", e_raw ? "sum" : "length-normalized"}});
            return 0;
        }
        if (*rep) {
            if (!r_fixture && r_metrics.empty()) throw llf::ConfigError("report needs --paper-fixture or --metrics");
            std::vector<llf::CorrelationReport> reports;
            if (r_fixture) reports.push_back(llf::paper_fixture_report());
            if (!r_metrics.empty()) {
                const auto records = llf::read_metrics(r_metrics);
                if (records.empty()) throw llf::FormatError(r_metrics + ": metrics file has no records");
                if (!r_pairs.empty()) {
                    std::vector<std::pair<std::string, std::string>> pairs;
                    for (const auto& p : r_pairs) {
                        const auto c = p.find(':');
                        if (c == std::string::npos) throw llf::ConfigError("--pair expects x:y, got '" + p + "'");
                        pairs.emplace_back(p.substr(0, c), p.substr(c + 1));
                    }
                    reports.push_back(llf::report_from_metrics(records, pairs));
                }
                if (!r_plots.empty()) {
                    std::vector<std::pair<double, double>> tps;
                    if (!r_throughput.empty()) tps = llf::read_throughput(r_throughput);
                    for (const auto& p : llf::write_panels(records, r_plots, tps)) std::cerr << "wrote " << p.string() << "\n";
                }
            }
            llf::CorrelationReport all;
            for (const auto& r : reports) all.entries.insert(all.entries.end(), r.entries.begin(), r.entries.end());
            if (r_json) print_json(all.to_json());
            else std::cout << all.to_text();
            return 0;
        }
        if (*insp) {
            print_json(llf::inspect_checkpoint(i_ckpt));
            return 0;
        }
    } catch (const llf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const llf::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const llf::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
