// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/lora.h"

#include <random>

namespace llf {

namespace {

const std::map<std::string, std::string>& target_suffixes() {
    static const std::map<std::string, std::string> kSuffixes = {
        {"q", "attn.q"},       {"k", "attn.k"},   {"v", "attn.v"},    {"o", "attn.o"},
        {"gate", "mlp.gate"}, {"up", "mlp.up"}, {"down", "mlp.down"},
    };
    return kSuffixes;
}

}  // namespace

std::string lora_target_suffix(const std::string& target) {
    const auto& m = target_suffixes();
    auto it = m.find(target);
    if (it == m.end()) {
        throw ConfigError("unknown LoRA target '" + target + "' (expected one of q, k, v, o, gate, up, down)");
    }
    return it->second;
}

std::string lora_tensor_name(const std::string& host, const char* factor) { return "lora." + host + "." + factor; }

void LoraConfig::validate() const {
    if (rank < 1) throw ConfigError("lora.rank must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("lora.alpha must be positive");
    if (dropout != 0.0) throw ConfigError("lora.dropout must be 0 (dropout is not supported)");
    if (targets.empty()) throw ConfigError("lora.targets must not be empty");
    std::set<std::string> seen;
    for (const auto& t : targets) {
        lora_target_suffix(t);
        if (!seen.insert(t).second) throw ConfigError("duplicate LoRA target '" + t + "'");
    }
}

nlohmann::json LoraConfig::to_json() const {
    return {{"rank", rank}, {"alpha", alpha}, {"dropout", dropout}, {"targets", targets}};
}

LoraConfig LoraConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("lora config must be a JSON object");
    LoraConfig c;
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "rank") c.rank = val.get<std::int64_t>();
            else if (key == "alpha") c.alpha = val.get<double>();
            else if (key == "dropout") c.dropout = val.get<double>();
            else if (key == "targets") c.targets = val.get<std::vector<std::string>>();
            else throw ConfigError("unknown lora config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("lora config key '" + key + "': " + e.what());
        }
    }
    return c;
}

template <typename T>
TensorMap<T> LoraAdapters<T>::as_tensors() const {
    TensorMap<T> out;
    for (const auto& [host, pair] : pairs) {
        out.emplace(lora_tensor_name(host, "A"), pair.a);
        out.emplace(lora_tensor_name(host, "B"), pair.b);
    }
    return out;
}

template <typename T>
void LoraAdapters<T>::assign_from(const TensorMap<T>& tensors) {
    for (auto& [host, pair] : pairs) {
        const auto ia = tensors.find(lora_tensor_name(host, "A"));
        const auto ib = tensors.find(lora_tensor_name(host, "B"));
        if (ia == tensors.end() || ib == tensors.end()) throw ConfigError("adapter tensors missing for " + host);
        if (ia->second.shape() != pair.a.shape() || ib->second.shape() != pair.b.shape()) {
            throw ConfigError("adapter shape mismatch for " + host);
        }
        pair.a = ia->second;
        pair.b = ib->second;
    }
}

template <typename T>
std::size_t LoraAdapters<T>::trainable_count() const {
    std::size_t n = 0;
    for (const auto& [host, pair] : pairs) n += pair.a.numel() + pair.b.numel();
    return n;
}

template <typename T>
LoraAdapters<T> attach_adapters(const TensorMap<T>& params, const LoraConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    LoraAdapters<T> out;
    out.config = cfg;
    std::vector<std::string> suffixes;
    for (const auto& t : cfg.targets) suffixes.push_back(lora_target_suffix(t));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    const std::size_t r = static_cast<std::size_t>(cfg.rank);
    // Sorted host-name order keeps the draw sequence independent of target listing order.
    for (const auto& [name, w] : params) {
        if (!name.starts_with("layer.")) continue;
        bool hit = false;
        for (const auto& s : suffixes) hit = hit || name.ends_with("." + s);
        if (!hit) continue;
        if (w.rank() != 2) throw ConfigError("LoRA host '" + name + "' is not a matrix");
        LoraPair<T> pair{BasicTensor<T>({r, w.dim(1)}), BasicTensor<T>({w.dim(0), r})};
        for (std::size_t i = 0; i < pair.a.numel(); ++i) pair.a[i] = static_cast<T>(dist(rng));
        out.pairs.emplace(name, std::move(pair));
    }
    if (out.pairs.empty()) throw ConfigError("LoRA targets matched no parameters");
    return out;
}

template <typename T>
TensorMap<T> merge_adapters(AdaptedModel<T>& model) {
    if (model.merged) throw ConfigError("adapters already merged");
    TensorMap<T> merged = model.base;
    const T scale = static_cast<T>(model.adapters.scaling());
    for (const auto& [host, pair] : model.adapters.pairs) {
        auto& w = merged.at(host);
        const std::size_t out = pair.b.dim(0), r = pair.b.dim(1), in = pair.a.dim(1);
        for (std::size_t i = 0; i < out; ++i) {
            for (std::size_t j = 0; j < in; ++j) {
                T acc = 0;
                for (std::size_t t = 0; t < r; ++t) acc += pair.b[i * r + t] * pair.a[t * in + j];
                w[i * in + j] += scale * acc;
            }
        }
    }
    model.merged = true;
    return merged;
}

template struct LoraAdapters<float>;
template struct LoraAdapters<double>;
template LoraAdapters<float> attach_adapters<float>(const TensorMap<float>&, const LoraConfig&, std::uint64_t);
template LoraAdapters<double> attach_adapters<double>(const TensorMap<double>&, const LoraConfig&, std::uint64_t);
template TensorMap<float> merge_adapters<float>(AdaptedModel<float>&);
template TensorMap<double> merge_adapters<double>(AdaptedModel<double>&);

}  // namespace llf
