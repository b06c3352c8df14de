// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/run_config.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "llf/error.h"

namespace llf {

namespace {

template <typename V>
V get_as(const nlohmann::json& j, const std::string& key) {
    try {
        return j.get<V>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

nlohmann::json data_to_json(const DataConfig& d) {
    return {{"train_dir", d.train_dir},
            {"val_dir", d.val_dir},
            {"vocab", d.vocab},
            {"merges", d.merges},
            {"mc_file", d.mc_file},
            {"shuffle_seed", d.shuffle_seed ? nlohmann::json(*d.shuffle_seed) : nlohmann::json(nullptr)},
            {"shard_size", d.shard_size},
            {"val_fraction", d.val_fraction}};
}

DataConfig data_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config key 'data' must be an object");
    DataConfig d;
    for (const auto& [key, val] : j.items()) {
        const std::string k = "data." + key;
        if (key == "train_dir") d.train_dir = get_as<std::string>(val, k);
        else if (key == "val_dir") d.val_dir = get_as<std::string>(val, k);
        else if (key == "vocab") d.vocab = get_as<std::string>(val, k);
        else if (key == "merges") d.merges = get_as<std::string>(val, k);
        else if (key == "mc_file") d.mc_file = get_as<std::string>(val, k);
        else if (key == "shuffle_seed") {
            if (!val.is_null()) d.shuffle_seed = get_as<std::uint64_t>(val, k);
        } else if (key == "shard_size") d.shard_size = get_as<std::int64_t>(val, k);
        else if (key == "val_fraction") d.val_fraction = get_as<double>(val, k);
        else throw ConfigError("unknown config key '" + k + "'");
    }
    return d;
}

nlohmann::json sft_to_json(const SftConfig& s) {
    return {{"data", s.data},       {"batch", s.batch},     {"accum", s.accum},
            {"max_len", s.max_len}, {"steps", s.steps},     {"peak_lr", s.peak_lr},
            {"warmup_steps", s.warmup_steps}, {"separator", s.separator}};
}

SftConfig sft_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config key 'sft' must be an object");
    SftConfig s;
    for (const auto& [key, val] : j.items()) {
        const std::string k = "sft." + key;
        if (key == "data") s.data = get_as<std::string>(val, k);
        else if (key == "batch") s.batch = get_as<std::int64_t>(val, k);
        else if (key == "accum") s.accum = get_as<std::int64_t>(val, k);
        else if (key == "max_len") s.max_len = get_as<std::int64_t>(val, k);
        else if (key == "steps") s.steps = get_as<std::int64_t>(val, k);
        else if (key == "peak_lr") s.peak_lr = get_as<double>(val, k);
        else if (key == "warmup_steps") s.warmup_steps = get_as<std::int64_t>(val, k);
        else if (key == "separator") s.separator = get_as<std::string>(val, k);
        else throw ConfigError("unknown config key '" + k + "'");
    }
    return s;
}

void merge_into(nlohmann::json& base, nlohmann::json& prov, const nlohmann::json& patch, const std::string& source,
                const std::string& prefix) {
    if (!patch.is_object()) throw ConfigError("config " + (prefix.empty() ? "root" : "'" + prefix + "'") +
                                              " must be a JSON object");
    for (const auto& [key, val] : patch.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        auto& slot = base[key];
        if (slot.is_object() && !val.is_null()) {
            merge_into(slot, prov[key], val, source, path);
        } else {
            slot = val;
            prov[key] = source;
        }
    }
}

nlohmann::json provenance_of(const nlohmann::json& j, const std::string& tag) {
    if (!j.is_object()) return tag;
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [key, val] : j.items()) out[key] = provenance_of(val, tag);
    return out;
}

}  // namespace

std::uint64_t RunConfig::tokens_per_step() const {
    return static_cast<std::uint64_t>(batch) * static_cast<std::uint64_t>(seq) * static_cast<std::uint64_t>(accum) *
           static_cast<std::uint64_t>(workers);
}

void RunConfig::validate() const {
    model.validate();
    schedule.validate();
    optimizer.validate();
    if (lora) lora->validate();
    auto positive = [](std::int64_t v, const char* name) {
        if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
    };
    positive(batch, "batch");
    positive(seq, "seq");
    positive(accum, "accum");
    positive(workers, "workers");
    positive(steps, "steps");
    positive(checkpoint_every, "checkpoint_every");
    positive(eval_batches, "eval_batches");
    positive(throughput_window, "throughput_window");
    positive(data.shard_size, "data.shard_size");
    positive(sft.batch, "sft.batch");
    positive(sft.accum, "sft.accum");
    positive(sft.max_len, "sft.max_len");
    positive(sft.steps, "sft.steps");
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
    if (seq > model.max_position) throw ConfigError("seq exceeds model.max_position");
    if (!sft.data.empty() && sft.max_len > model.max_position) {
        throw ConfigError("sft.max_len exceeds model.max_position");
    }
    if (!(data.val_fraction >= 0.0 && data.val_fraction < 1.0)) throw ConfigError("data.val_fraction must be in [0, 1)");
    if (precision != "f32" && precision != "f64") throw ConfigError("precision must be f32 or f64");
    if (!(sft.peak_lr > 0.0)) throw ConfigError("sft.peak_lr must be positive");
    if (sft.warmup_steps < 1 || sft.warmup_steps >= sft.steps) {
        throw ConfigError("sft.warmup_steps must be in [1, sft.steps)");
    }
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

nlohmann::json RunConfig::to_json() const {
    return {{"model", model.to_json()},
            {"schedule", schedule.to_json()},
            {"optimizer", optimizer.to_json()},
            {"data", data_to_json(data)},
            {"batch", batch},
            {"seq", seq},
            {"accum", accum},
            {"workers", workers},
            {"steps", steps},
            {"checkpoint_every", checkpoint_every},
            {"eval_every", eval_every},
            {"eval_batches", eval_batches},
            {"throughput_window", throughput_window},
            {"seed", seed},
            {"deterministic", deterministic},
            {"precision", precision},
            {"out_dir", out_dir},
            {"lora", lora ? lora->to_json() : nlohmann::json(nullptr)},
            {"sft", sft_to_json(sft)}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig c;
    for (const auto& [key, val] : j.items()) {
        if (key == "model") c.model = ModelConfig::from_json(val);
        else if (key == "schedule") c.schedule = ScheduleConfig::from_json(val);
        else if (key == "optimizer") c.optimizer = AdamWConfig::from_json(val);
        else if (key == "data") c.data = data_from_json(val);
        else if (key == "batch") c.batch = get_as<std::int64_t>(val, key);
        else if (key == "seq") c.seq = get_as<std::int64_t>(val, key);
        else if (key == "accum") c.accum = get_as<std::int64_t>(val, key);
        else if (key == "workers") c.workers = get_as<std::int64_t>(val, key);
        else if (key == "steps") c.steps = get_as<std::int64_t>(val, key);
        else if (key == "checkpoint_every") c.checkpoint_every = get_as<std::int64_t>(val, key);
        else if (key == "eval_every") c.eval_every = get_as<std::int64_t>(val, key);
        else if (key == "eval_batches") c.eval_batches = get_as<std::int64_t>(val, key);
        else if (key == "throughput_window") c.throughput_window = get_as<std::int64_t>(val, key);
        else if (key == "seed") c.seed = get_as<std::uint64_t>(val, key);
        else if (key == "deterministic") c.deterministic = get_as<bool>(val, key);
        else if (key == "precision") c.precision = get_as<std::string>(val, key);
        else if (key == "out_dir") c.out_dir = get_as<std::string>(val, key);
        else if (key == "lora") {
            if (!val.is_null()) c.lora = LoraConfig::from_json(val);
        } else if (key == "sft") c.sft = sft_from_json(val);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return c;
}

nlohmann::json default_run_config_json() { return RunConfig{}.to_json(); }

namespace {

EffectiveConfig resolve_layers(const nlohmann::json* file_layer, const nlohmann::json& overrides) {
    nlohmann::json merged = default_run_config_json();
    nlohmann::json prov = provenance_of(merged, "default");
    if (file_layer) merge_into(merged, prov, *file_layer, "file", "");
    merge_into(merged, prov, overrides, "flag", "");
    EffectiveConfig out;
    out.config = RunConfig::from_json(merged);
    out.config.validate();
    out.json = out.config.to_json();
    out.provenance = prov;
    return out;
}

}  // namespace

EffectiveConfig resolve_run_config(const std::optional<std::filesystem::path>& file, const nlohmann::json& overrides) {
    if (!file) return resolve_layers(nullptr, overrides);
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file->string() + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    return resolve_layers(&j, overrides);
}

EffectiveConfig resolve_run_config_json(const nlohmann::json& file_layer, const nlohmann::json& overrides) {
    return resolve_layers(&file_layer, overrides);
}

void set_override(nlohmann::json& overrides, const std::string& dotted_key, nlohmann::json value) {
    nlohmann::json* node = &overrides;
    std::stringstream ss(dotted_key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) (*node)[parts[i]] = nlohmann::json::object();
        node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = std::move(value);
}

bool is_huge(const ModelConfig& cfg) { return count_parameters(cfg) > 100'000'000ULL; }

std::size_t thread_cap() {
    const char* env = std::getenv("LLF_THREADS");
    if (!env) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError(std::string("LLF_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<std::size_t>(v);
}

}  // namespace llf
