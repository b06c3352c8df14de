// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/model.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "llf/ops.h"

namespace llf {

namespace {

std::string layer_name(std::int64_t i, const char* suffix) { return "layer." + std::to_string(i) + "." + suffix; }

template <typename T>
const BasicTensor<T>& param(const ModelParams<T>& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
}

std::size_t usize(std::int64_t v) { return static_cast<std::size_t>(v); }

}  // namespace

// ---- config ------------------------------------------------------------------

void ModelConfig::validate() const {
    auto positive = [](std::int64_t v, const char* what) {
        if (v <= 0) throw ConfigError(std::string("model.") + what + " must be positive, got " + std::to_string(v));
    };
    positive(hidden_size, "hidden_size");
    positive(intermediate_size, "intermediate_size");
    positive(n_layers, "n_layers");
    positive(n_heads, "n_heads");
    positive(n_kv_heads, "n_kv_heads");
    positive(vocab_size, "vocab_size");
    positive(max_position, "max_position");
    if (hidden_size % n_heads != 0) throw ConfigError("model.hidden_size must be divisible by n_heads");
    if (n_heads % n_kv_heads != 0) throw ConfigError("model.n_heads must be divisible by n_kv_heads");
    if (head_dim() % 2 != 0) throw ConfigError("model head dim (hidden_size / n_heads) must be even for RoPE");
    if (!(rope_theta > 0.0)) throw ConfigError("model.rope_theta must be positive");
    if (!(rms_eps >= 0.0)) throw ConfigError("model.rms_eps must be non-negative");
    if (attention_bias || mlp_bias) throw ConfigError("attention/mlp biases are not supported (architecture has none)");
    if (attention_dropout != 0.0) throw ConfigError("model.attention_dropout must be 0");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"hidden_size", hidden_size},   {"intermediate_size", intermediate_size},
            {"n_layers", n_layers},         {"n_heads", n_heads},
            {"n_kv_heads", n_kv_heads},     {"vocab_size", vocab_size},
            {"max_position", max_position}, {"rope_theta", rope_theta},
            {"rms_eps", rms_eps},           {"attention_bias", attention_bias},
            {"mlp_bias", mlp_bias},         {"attention_dropout", attention_dropout}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    ModelConfig c;
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "hidden_size") c.hidden_size = val.get<std::int64_t>();
            else if (key == "intermediate_size") c.intermediate_size = val.get<std::int64_t>();
            else if (key == "n_layers") c.n_layers = val.get<std::int64_t>();
            else if (key == "n_heads") c.n_heads = val.get<std::int64_t>();
            else if (key == "n_kv_heads") c.n_kv_heads = val.get<std::int64_t>();
            else if (key == "vocab_size") c.vocab_size = val.get<std::int64_t>();
            else if (key == "max_position") c.max_position = val.get<std::int64_t>();
            else if (key == "rope_theta") c.rope_theta = val.get<double>();
            else if (key == "rms_eps") c.rms_eps = val.get<double>();
            else if (key == "attention_bias") c.attention_bias = val.get<bool>();
            else if (key == "mlp_bias") c.mlp_bias = val.get<bool>();
            else if (key == "attention_dropout") c.attention_dropout = val.get<double>();
            else throw ConfigError("unknown model config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("model config key '" + key + "': " + e.what());
        }
    }
    return c;
}

ModelConfig ModelConfig::paper_1716m() { return ModelConfig{}; }

std::uint64_t count_parameters(const ModelConfig& cfg) {
    cfg.validate();
    const auto V = static_cast<std::uint64_t>(cfg.vocab_size);
    const auto d = static_cast<std::uint64_t>(cfg.hidden_size);
    const auto f = static_cast<std::uint64_t>(cfg.intermediate_size);
    const auto L = static_cast<std::uint64_t>(cfg.n_layers);
    const auto kv = static_cast<std::uint64_t>(cfg.kv_dim());
    return 2 * V * d + d + L * (2 * d * d + 2 * d * kv + 3 * d * f + 2 * d);
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t V = usize(cfg.vocab_size), d = usize(cfg.hidden_size), f = usize(cfg.intermediate_size);
    const std::size_t kv = usize(cfg.kv_dim());
    std::vector<std::pair<std::string, Shape>> out;
    out.emplace_back("embed", Shape{V, d});
    for (std::int64_t i = 0; i < cfg.n_layers; ++i) {
        out.emplace_back(layer_name(i, "norm_attn"), Shape{d});
        out.emplace_back(layer_name(i, "attn.q"), Shape{d, d});
        out.emplace_back(layer_name(i, "attn.k"), Shape{kv, d});
        out.emplace_back(layer_name(i, "attn.v"), Shape{kv, d});
        out.emplace_back(layer_name(i, "attn.o"), Shape{d, d});
        out.emplace_back(layer_name(i, "norm_mlp"), Shape{d});
        out.emplace_back(layer_name(i, "mlp.gate"), Shape{f, d});
        out.emplace_back(layer_name(i, "mlp.up"), Shape{f, d});
        out.emplace_back(layer_name(i, "mlp.down"), Shape{d, f});
    }
    out.emplace_back("norm_final", Shape{d});
    out.emplace_back("lm_head", Shape{V, d});
    return out;
}

template <typename T>
ModelParams<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    const auto layout = parameter_layout(cfg);
    std::mt19937_64 rng(seed);
    const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.n_layers));
    ModelParams<T> params;
    for (const auto& [name, shape] : layout) {
        BasicTensor<T> t(shape);
        if (shape.size() == 1) {
            t.fill(T(1));
        } else {
            const bool residual_out = name.ends_with("attn.o") || name.ends_with("mlp.down");
            const double std_dev = 0.02 * (residual_out ? residual_scale : 1.0);
            std::normal_distribution<double> dist(0.0, std_dev);
            for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
        }
        params.emplace(name, std::move(t));
    }
    return params;
}

template <typename T>
void check_params(const ModelParams<T>& params, const ModelConfig& cfg) {
    const auto layout = parameter_layout(cfg);
    if (layout.size() != params.size()) {
        throw ConfigError("parameter set has " + std::to_string(params.size()) + " tensors, config expects " +
                          std::to_string(layout.size()));
    }
    for (const auto& [name, shape] : layout) {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("missing parameter '" + name + "'");
        if (it->second.shape() != shape) {
            throw ConfigError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) +
                              ", config expects " + shape_str(shape));
        }
    }
}

TokenBatch::TokenBatch(std::size_t r, std::size_t c, std::vector<std::int32_t> v) : rows(r), cols(c), ids(std::move(v)) {
    if (ids.size() != rows * cols) throw ConfigError("token batch size does not match its shape");
}

TokenBatch TokenBatch::single(std::vector<std::int32_t> v) {
    const std::size_t n = v.size();
    return TokenBatch(1, n, std::move(v));
}

// ---- forward / backward ---------------------------------------------------------

namespace {

// x[B*T x heads*dh] -> [B x heads x T x dh]
template <typename T>
BasicTensor<T> split_heads(const BasicTensor<T>& x, std::size_t B, std::size_t Tn, std::size_t heads, std::size_t dh) {
    BasicTensor<T> out({B, heads, Tn, dh});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < Tn; ++t)
            for (std::size_t h = 0; h < heads; ++h) {
                const T* src = x.data() + (b * Tn + t) * heads * dh + h * dh;
                T* dst = out.data() + ((b * heads + h) * Tn + t) * dh;
                std::copy(src, src + dh, dst);
            }
    return out;
}

template <typename T>
BasicTensor<T> merge_heads(const BasicTensor<T>& x) {
    const std::size_t B = x.dim(0), heads = x.dim(1), Tn = x.dim(2), dh = x.dim(3);
    BasicTensor<T> out({B * Tn, heads * dh});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t t = 0; t < Tn; ++t) {
                const T* src = x.data() + ((b * heads + h) * Tn + t) * dh;
                T* dst = out.data() + (b * Tn + t) * heads * dh + h * dh;
                std::copy(src, src + dh, dst);
            }
    return out;
}

// Concatenate along the time axis of [B x K x t x dh] tensors.
template <typename T>
BasicTensor<T> concat_time(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    const std::size_t B = b.dim(0), K = b.dim(1), tb = b.dim(2), dh = b.dim(3);
    const std::size_t ta = a.empty() ? 0 : a.dim(2);
    BasicTensor<T> out({B, K, ta + tb, dh});
    for (std::size_t s = 0; s < B * K; ++s) {
        T* dst = out.data() + s * (ta + tb) * dh;
        if (ta) std::copy(a.data() + s * ta * dh, a.data() + (s + 1) * ta * dh, dst);
        std::copy(b.data() + s * tb * dh, b.data() + (s + 1) * tb * dh, dst + ta * dh);
    }
    return out;
}

template <typename T>
void add_inplace(BasicTensor<T>& y, const BasicTensor<T>& x) {
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += x[i];
}

// y = x·Wᵀ (+ s·(x·Aᵀ)·Bᵀ). `xa` receives x·Aᵀ when an adapter is present.
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const LoraPair<T>* lp, T scale,
                      BasicTensor<T>* xa) {
    BasicTensor<T> y = ops::matmul_nt(x, w);
    if (lp) {
        BasicTensor<T> h = ops::matmul_nt(x, lp->a);
        const BasicTensor<T> z = ops::matmul_nt(h, lp->b);
        for (std::size_t i = 0; i < y.numel(); ++i) y[i] += scale * z[i];
        if (xa) *xa = std::move(h);
    }
    return y;
}

template <typename T>
struct LinearGradSinks {
    BasicTensor<T>* dw = nullptr;
    BasicTensor<T>* da = nullptr;
    BasicTensor<T>* db = nullptr;
};

template <typename T>
BasicTensor<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const LoraPair<T>* lp, T scale,
                               const BasicTensor<T>& xa, const BasicTensor<T>& dy, const LinearGradSinks<T>& sinks) {
    BasicTensor<T> dx = ops::matmul(dy, w);
    if (sinks.dw) ops::matmul_tn_acc(dy, x, *sinks.dw);
    if (lp) {
        BasicTensor<T> dys(dy.shape());
        for (std::size_t i = 0; i < dy.numel(); ++i) dys[i] = scale * dy[i];
        if (sinks.db) ops::matmul_tn_acc(dys, xa, *sinks.db);
        const BasicTensor<T> dxa = ops::matmul(dys, lp->b);
        if (sinks.da) ops::matmul_tn_acc(dxa, x, *sinks.da);
        add_inplace(dx, ops::matmul(dxa, lp->a));
    }
    return dx;
}

template <typename T>
struct LayerActs {
    BasicTensor<T> x_in;
    BasicTensor<T> a;
    std::vector<T> inv_attn;
    BasicTensor<T> xa_q, xa_k, xa_v, xa_o;
    BasicTensor<T> q, k, v;  // q, k after RoPE; all [B x heads x T x dh]
    BasicTensor<T> probs;
    BasicTensor<T> att;  // [N x d], input to attn.o
    BasicTensor<T> x_mid;
    BasicTensor<T> m;
    std::vector<T> inv_mlp;
    BasicTensor<T> xa_gate, xa_up, xa_down;
    BasicTensor<T> g, u, sg, hmid;
};

template <typename T>
struct Activations {
    std::vector<LayerActs<T>> layers;
    BasicTensor<T> x_final;
    BasicTensor<T> xf;
    std::vector<T> inv_final;
};

struct LayerNames {
    std::string norm_attn, q, k, v, o, norm_mlp, gate, up, down;
    explicit LayerNames(std::int64_t i)
        : norm_attn(layer_name(i, "norm_attn")),
          q(layer_name(i, "attn.q")),
          k(layer_name(i, "attn.k")),
          v(layer_name(i, "attn.v")),
          o(layer_name(i, "attn.o")),
          norm_mlp(layer_name(i, "norm_mlp")),
          gate(layer_name(i, "mlp.gate")),
          up(layer_name(i, "mlp.up")),
          down(layer_name(i, "mlp.down")) {}
};

template <typename T>
const LoraPair<T>* adapter_for(const LoraAdapters<T>* lora, const std::string& host) {
    return lora ? lora->find(host) : nullptr;
}

template <typename T>
BasicTensor<T> run_forward(const ModelParams<T>& p, const ModelConfig& cfg, const TokenBatch& tokens,
                           KVCache<T>* cache, const LoraAdapters<T>* lora, Activations<T>* acts) {
    const std::size_t B = tokens.rows, Tn = tokens.cols;
    if (B == 0 || Tn == 0) throw ConfigError("forward: empty token batch");
    const std::size_t past = cache ? cache->length : 0;
    if (past + Tn > usize(cfg.max_position)) {
        throw ConfigError("sequence length " + std::to_string(past + Tn) + " exceeds max_position " +
                          std::to_string(cfg.max_position));
    }
    const std::size_t d = usize(cfg.hidden_size), H = usize(cfg.n_heads), K = usize(cfg.n_kv_heads);
    const std::size_t dh = usize(cfg.head_dim()), V = usize(cfg.vocab_size);
    const std::size_t N = B * Tn;
    const T scale = lora ? static_cast<T>(lora->scaling()) : T(0);

    const auto& embed = param(p, "embed");
    BasicTensor<T> x({N, d});
    for (std::size_t n = 0; n < N; ++n) {
        const std::int32_t id = tokens.ids[n];
        if (id < 0 || static_cast<std::size_t>(id) >= V) {
            throw FormatError("token id " + std::to_string(id) + " out of range for vocab " + std::to_string(V));
        }
        std::copy(embed.data() + static_cast<std::size_t>(id) * d, embed.data() + (static_cast<std::size_t>(id) + 1) * d,
                  x.data() + n * d);
    }

    if (cache && cache->keys.empty()) {
        cache->keys.resize(usize(cfg.n_layers));
        cache->values.resize(usize(cfg.n_layers));
    }
    if (acts) acts->layers.resize(usize(cfg.n_layers));

    for (std::int64_t li = 0; li < cfg.n_layers; ++li) {
        const LayerNames nm(li);
        LayerActs<T> local;
        LayerActs<T>& la = acts ? acts->layers[usize(li)] : local;
        const bool keep = acts != nullptr;

        std::vector<T> inv_attn;
        BasicTensor<T> a = ops::rmsnorm(x, param(p, nm.norm_attn), cfg.rms_eps, &inv_attn);
        const auto* lq = adapter_for(lora, nm.q);
        const auto* lk = adapter_for(lora, nm.k);
        const auto* lv = adapter_for(lora, nm.v);
        const auto* lo = adapter_for(lora, nm.o);
        BasicTensor<T> q = linear(a, param(p, nm.q), lq, scale, keep ? &la.xa_q : nullptr);
        BasicTensor<T> k = linear(a, param(p, nm.k), lk, scale, keep ? &la.xa_k : nullptr);
        BasicTensor<T> v = linear(a, param(p, nm.v), lv, scale, keep ? &la.xa_v : nullptr);

        BasicTensor<T> qh = ops::rope_apply(split_heads(q, B, Tn, H, dh), static_cast<std::int64_t>(past), cfg.rope_theta);
        BasicTensor<T> kh = ops::rope_apply(split_heads(k, B, Tn, K, dh), static_cast<std::int64_t>(past), cfg.rope_theta);
        BasicTensor<T> vh = split_heads(v, B, Tn, K, dh);

        BasicTensor<T> att_h;
        if (cache) {
            auto& ck = cache->keys[usize(li)];
            auto& cv = cache->values[usize(li)];
            ck = concat_time(ck, kh);
            cv = concat_time(cv, vh);
            att_h = ops::grouped_causal_attention(qh, ck, cv, keep ? &la.probs : nullptr);
        } else {
            att_h = ops::grouped_causal_attention(qh, kh, vh, keep ? &la.probs : nullptr);
        }
        BasicTensor<T> att = merge_heads(att_h);
        BasicTensor<T> o = linear(att, param(p, nm.o), lo, scale, keep ? &la.xa_o : nullptr);

        if (keep) {
            la.x_in = x;
            la.a = std::move(a);
            la.inv_attn = std::move(inv_attn);
            la.q = std::move(qh);
            la.k = std::move(kh);
            la.v = std::move(vh);
            la.att = std::move(att);
        }
        add_inplace(x, o);

        std::vector<T> inv_mlp;
        BasicTensor<T> m = ops::rmsnorm(x, param(p, nm.norm_mlp), cfg.rms_eps, &inv_mlp);
        BasicTensor<T> g = linear(m, param(p, nm.gate), adapter_for(lora, nm.gate), scale, keep ? &la.xa_gate : nullptr);
        BasicTensor<T> u = linear(m, param(p, nm.up), adapter_for(lora, nm.up), scale, keep ? &la.xa_up : nullptr);
        BasicTensor<T> sg = ops::silu(g);
        BasicTensor<T> hmid(sg.shape());
        for (std::size_t i = 0; i < hmid.numel(); ++i) hmid[i] = sg[i] * u[i];
        BasicTensor<T> dn =
            linear(hmid, param(p, nm.down), adapter_for(lora, nm.down), scale, keep ? &la.xa_down : nullptr);
        if (keep) {
            la.x_mid = x;
            la.m = std::move(m);
            la.inv_mlp = std::move(inv_mlp);
            la.g = std::move(g);
            la.u = std::move(u);
            la.sg = std::move(sg);
            la.hmid = std::move(hmid);
        }
        add_inplace(x, dn);
    }
    if (cache) cache->length = past + Tn;

    std::vector<T> inv_final;
    BasicTensor<T> xf = ops::rmsnorm(x, param(p, "norm_final"), cfg.rms_eps, &inv_final);
    BasicTensor<T> logits = ops::matmul_nt(xf, param(p, "lm_head"));
    if (acts) {
        acts->x_final = std::move(x);
        acts->xf = std::move(xf);
        acts->inv_final = std::move(inv_final);
    }
    return logits.reshaped({B, Tn, V});
}

}  // namespace

template <typename T>
BasicTensor<T> forward_logits(const ModelParams<T>& params, const ModelConfig& cfg, const TokenBatch& tokens,
                              KVCache<T>* cache, const LoraAdapters<T>* lora) {
    return run_forward(params, cfg, tokens, cache, lora, static_cast<Activations<T>*>(nullptr));
}

template <typename T>
double loss_only(const ModelParams<T>& params, const ModelConfig& cfg, const TokenBatch& inputs,
                 std::span<const std::int32_t> targets, std::int32_t ignore_id, const LoraAdapters<T>* lora) {
    const auto logits = run_forward(params, cfg, inputs, static_cast<KVCache<T>*>(nullptr), lora,
                                    static_cast<Activations<T>*>(nullptr));
    return ops::cross_entropy(logits, targets, ignore_id);
}

template <typename T>
LossAndGrads<T> loss_and_grads(const ModelParams<T>& p, const ModelConfig& cfg, const TokenBatch& inputs,
                               std::span<const std::int32_t> targets, std::int32_t ignore_id,
                               const LoraAdapters<T>* lora, bool train_base) {
    if (!train_base && !lora) throw ConfigError("loss_and_grads: nothing to train (no base grads, no adapters)");
    Activations<T> acts;
    const BasicTensor<T> logits =
        run_forward(p, cfg, inputs, static_cast<KVCache<T>*>(nullptr), lora, &acts);
    BasicTensor<T> dlogits;
    LossAndGrads<T> out;
    out.loss = ops::cross_entropy(logits, targets, ignore_id, &dlogits);

    const std::size_t B = inputs.rows, Tn = inputs.cols, N = B * Tn;
    const std::size_t d = usize(cfg.hidden_size), H = usize(cfg.n_heads);
    const std::size_t dh = usize(cfg.head_dim()), V = usize(cfg.vocab_size);
    const T scale = lora ? static_cast<T>(lora->scaling()) : T(0);

    GradSet<T>& grads = out.grads;
    if (train_base) grads = zeros_like(p);
    if (lora) {
        for (const auto& [host, pair] : lora->pairs) {
            grads.emplace(lora_tensor_name(host, "A"), BasicTensor<T>(pair.a.shape()));
            grads.emplace(lora_tensor_name(host, "B"), BasicTensor<T>(pair.b.shape()));
        }
    }
    auto sink = [&](const std::string& name) -> BasicTensor<T>* {
        if (!train_base) return nullptr;
        return &grads.at(name);
    };
    auto sinks_for = [&](const std::string& host) {
        LinearGradSinks<T> s;
        s.dw = sink(host);
        if (lora && lora->find(host)) {
            s.da = &grads.at(lora_tensor_name(host, "A"));
            s.db = &grads.at(lora_tensor_name(host, "B"));
        }
        return s;
    };

    dlogits = dlogits.reshaped({N, V});
    const auto& lm_head = param(p, "lm_head");
    BasicTensor<T> dxf = ops::matmul(dlogits, lm_head);
    if (train_base) ops::matmul_tn_acc(dlogits, acts.xf, grads.at("lm_head"));
    BasicTensor<T> dx = ops::rmsnorm_backward(acts.x_final, param(p, "norm_final"), acts.inv_final, dxf, sink("norm_final"));

    for (std::int64_t li = cfg.n_layers - 1; li >= 0; --li) {
        const LayerNames nm(li);
        LayerActs<T>& la = acts.layers[usize(li)];

        // MLP branch: x_out = x_mid + down(silu(gate(m)) * up(m))
        const BasicTensor<T> dh_mid = linear_backward(la.hmid, param(p, nm.down), adapter_for(lora, nm.down), scale,
                                                      la.xa_down, dx, sinks_for(nm.down));
        BasicTensor<T> dsg(dh_mid.shape()), du(dh_mid.shape());
        for (std::size_t i = 0; i < dh_mid.numel(); ++i) {
            dsg[i] = dh_mid[i] * la.u[i];
            du[i] = dh_mid[i] * la.sg[i];
        }
        const BasicTensor<T> dg = ops::silu_backward(la.g, dsg);
        BasicTensor<T> dm =
            linear_backward(la.m, param(p, nm.gate), adapter_for(lora, nm.gate), scale, la.xa_gate, dg, sinks_for(nm.gate));
        add_inplace(dm, linear_backward(la.m, param(p, nm.up), adapter_for(lora, nm.up), scale, la.xa_up, du,
                                        sinks_for(nm.up)));
        BasicTensor<T> dx_mid = dx;
        add_inplace(dx_mid, ops::rmsnorm_backward(la.x_mid, param(p, nm.norm_mlp), la.inv_mlp, dm, sink(nm.norm_mlp)));

        // Attention branch: x_mid = x_in + o(attn(rope(q(a)), rope(k(a)), v(a)))
        const BasicTensor<T> datt =
            linear_backward(la.att, param(p, nm.o), adapter_for(lora, nm.o), scale, la.xa_o, dx_mid, sinks_for(nm.o));
        const auto ag = ops::attention_backward(la.q, la.k, la.v, la.probs, split_heads(datt, B, Tn, H, dh));
        const BasicTensor<T> dq = merge_heads(ops::rope_backward(ag.dq, 0, cfg.rope_theta));
        const BasicTensor<T> dk = merge_heads(ops::rope_backward(ag.dk, 0, cfg.rope_theta));
        const BasicTensor<T> dv = merge_heads(ag.dv);
        BasicTensor<T> da =
            linear_backward(la.a, param(p, nm.q), adapter_for(lora, nm.q), scale, la.xa_q, dq, sinks_for(nm.q));
        add_inplace(da, linear_backward(la.a, param(p, nm.k), adapter_for(lora, nm.k), scale, la.xa_k, dk, sinks_for(nm.k)));
        add_inplace(da, linear_backward(la.a, param(p, nm.v), adapter_for(lora, nm.v), scale, la.xa_v, dv, sinks_for(nm.v)));
        dx = std::move(dx_mid);
        add_inplace(dx, ops::rmsnorm_backward(la.x_in, param(p, nm.norm_attn), la.inv_attn, da, sink(nm.norm_attn)));
        la = LayerActs<T>{};
    }

    if (train_base) {
        auto& dembed = grads.at("embed");
        for (std::size_t n = 0; n < N; ++n) {
            T* row = dembed.data() + static_cast<std::size_t>(inputs.ids[n]) * d;
            const T* src = dx.data() + n * d;
            for (std::size_t i = 0; i < d; ++i) row[i] += src[i];
        }
    }
    return out;
}

template <typename T>
std::vector<std::int32_t> generate(const ModelParams<T>& params, const ModelConfig& cfg,
                                   std::span<const std::int32_t> prompt, std::size_t max_new,
                                   const SamplingOptions& sampling, std::optional<std::int32_t> eot_id,
                                   const LoraAdapters<T>* lora, bool use_cache) {
    if (prompt.empty()) throw ConfigError("generate: prompt must be non-empty");
    if (!sampling.greedy && !(sampling.temperature > 0.0)) throw ConfigError("generate: temperature must be positive");
    const std::size_t V = usize(cfg.vocab_size);
    std::mt19937_64 rng(sampling.seed);
    std::vector<std::int32_t> context(prompt.begin(), prompt.end());
    std::vector<std::int32_t> out;
    KVCache<T> cache;
    std::vector<std::int32_t> pending = context;

    while (out.size() < max_new && context.size() < usize(cfg.max_position)) {
        BasicTensor<T> logits;
        if (use_cache) {
            logits = forward_logits(params, cfg, TokenBatch::single(pending), &cache, lora);
        } else {
            logits = forward_logits(params, cfg, TokenBatch::single(context), static_cast<KVCache<T>*>(nullptr), lora);
        }
        const std::size_t rows = logits.numel() / V;
        const T* last = logits.data() + (rows - 1) * V;

        std::int32_t next = 0;
        if (sampling.greedy) {
            for (std::size_t i = 1; i < V; ++i) {
                if (last[i] > last[static_cast<std::size_t>(next)]) next = static_cast<std::int32_t>(i);
            }
        } else {
            std::vector<std::size_t> order(V);
            for (std::size_t i = 0; i < V; ++i) order[i] = i;
            std::size_t keep = V;
            if (sampling.top_k > 0 && usize(sampling.top_k) < V) {
                keep = usize(sampling.top_k);
                std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                                  [&](std::size_t a, std::size_t b) { return last[a] > last[b] || (last[a] == last[b] && a < b); });
                order.resize(keep);
            }
            double mx = -1e300;
            for (std::size_t i : order) mx = std::max(mx, static_cast<double>(last[i]));
            std::vector<double> w(order.size());
            for (std::size_t j = 0; j < order.size(); ++j) {
                w[j] = std::exp((static_cast<double>(last[order[j]]) - mx) / sampling.temperature);
            }
            std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
            next = static_cast<std::int32_t>(order[pick(rng)]);
        }
        if (eot_id && next == *eot_id) break;
        out.push_back(next);
        context.push_back(next);
        pending.assign(1, next);
    }
    return out;
}

#define LLF_INSTANTIATE_MODEL(T)                                                                                      \
    template ModelParams<T> build_model<T>(const ModelConfig&, std::uint64_t);                                       \
    template void check_params<T>(const ModelParams<T>&, const ModelConfig&);                                         \
    template BasicTensor<T> forward_logits<T>(const ModelParams<T>&, const ModelConfig&, const TokenBatch&,            \
                                              KVCache<T>*, const LoraAdapters<T>*);                                   \
    template double loss_only<T>(const ModelParams<T>&, const ModelConfig&, const TokenBatch&,                        \
                                 std::span<const std::int32_t>, std::int32_t, const LoraAdapters<T>*);                \
    template LossAndGrads<T> loss_and_grads<T>(const ModelParams<T>&, const ModelConfig&, const TokenBatch&,          \
                                               std::span<const std::int32_t>, std::int32_t, const LoraAdapters<T>*,   \
                                               bool);                                                                 \
    template std::vector<std::int32_t> generate<T>(const ModelParams<T>&, const ModelConfig&,                         \
                                                   std::span<const std::int32_t>, std::size_t,                        \
                                                   const SamplingOptions&, std::optional<std::int32_t>,               \
                                                   const LoraAdapters<T>*, bool);

LLF_INSTANTIATE_MODEL(float)
LLF_INSTANTIATE_MODEL(double)

#undef LLF_INSTANTIATE_MODEL

}  // namespace llf
