// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/sft.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "llf/error.h"
#include "llf/ops.h"
#include "llf/tokenizer.h"

namespace llf {

std::string format_chat(const std::string& user, const std::optional<std::string>& assistant, bool trailing_space,
                        const std::string& separator) {
    std::string out = std::string(kChatSystem) + separator + "USER: " + user + separator + "ASSISTANT:";
    if (assistant) return out + " " + *assistant + std::string(kEndOfText);
    if (trailing_space) out += " ";
    return out;
}

ChatExample render_example(const Tokenizer& tok, const std::string& user, const std::string& assistant,
                           const std::string& separator) {
    ChatExample ex;
    ex.user_text = user;
    ex.assistant_text = assistant;
    ex.ids = tok.encode(format_chat(user, std::nullopt, false, separator));
    const std::size_t prompt_len = ex.ids.size();
    const auto response = tok.encode(" " + assistant);
    ex.ids.insert(ex.ids.end(), response.begin(), response.end());
    ex.ids.push_back(tok.eot_id());
    ex.mask.assign(ex.ids.size(), 0);
    std::fill(ex.mask.begin() + static_cast<std::ptrdiff_t>(prompt_len), ex.mask.end(), 1);
    return ex;
}

AlpacaData parse_alpaca(const std::string& text, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(origin + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!j.is_array()) throw FormatError(origin + ": expected a JSON array of alpaca records");
    AlpacaData out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& r = j[i];
        if (!r.is_object()) throw FormatError(origin + ": record " + std::to_string(i) + " is not an object");
        auto field = [&](const char* key) -> std::string {
            if (!r.contains(key) || r[key].is_null()) return {};
            if (!r[key].is_string()) {
                throw FormatError(origin + ": record " + std::to_string(i) + " field '" + key + "' is not a string");
            }
            return r[key].get<std::string>();
        };
        const std::string instruction = field("instruction");
        const std::string input = field("input");
        const std::string output = field("output");
        if (output.empty()) {
            ++out.skipped;
            continue;
        }
        ChatExample ex;
        ex.user_text = input.empty() ? instruction : instruction + "\n\n" + input;
        ex.assistant_text = output;
        out.examples.push_back(std::move(ex));
    }
    return out;
}

AlpacaData ingest_alpaca(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_alpaca(ss.str(), path.string());
}

void render_all(const Tokenizer& tok, std::vector<ChatExample>& examples, const std::string& separator) {
    for (auto& ex : examples) {
        auto r = render_example(tok, ex.user_text, ex.assistant_text, separator);
        ex.ids = std::move(r.ids);
        ex.mask = std::move(r.mask);
    }
}

SftBatch make_sft_batch(std::span<const ChatExample* const> examples, std::int32_t pad_id, std::size_t max_len) {
    if (examples.empty()) throw ConfigError("empty SFT batch");
    std::size_t width = 0;
    for (const auto* ex : examples) {
        if (ex->ids.size() < 2 || ex->mask.size() != ex->ids.size()) throw ConfigError("SFT example is not rendered");
        width = std::max(width, std::min(ex->ids.size(), max_len + 1) - 1);
    }
    const std::size_t B = examples.size();
    SftBatch b;
    b.inputs = TokenBatch(B, width, std::vector<std::int32_t>(B * width, pad_id));
    b.targets.assign(B * width, kIgnoreIndex);
    for (std::size_t r = 0; r < B; ++r) {
        const auto& ex = *examples[r];
        const std::size_t n = std::min(ex.ids.size(), max_len + 1) - 1;
        for (std::size_t t = 0; t < n; ++t) {
            b.inputs.ids[r * width + t] = ex.ids[t];
            if (ex.mask[t + 1]) b.targets[r * width + t] = ex.ids[t + 1];
        }
    }
    return b;
}

template <typename T>
double sft_step(const ModelParams<T>& base, const ModelConfig& cfg, LoraAdapters<T>& adapters,
                std::span<const SftBatch> micro_batches, OptimState<T>& state, double lr, const AdamWConfig& opt,
                double* grad_norm) {
    if (micro_batches.empty()) throw ConfigError("sft_step needs at least one micro-batch");
    GradSet<T> acc;
    double loss = 0.0;
    for (const auto& mb : micro_batches) {
        auto lg = loss_and_grads(base, cfg, mb.inputs, mb.targets, kIgnoreIndex, &adapters, false);
        loss += lg.loss;
        if (acc.empty()) {
            acc = std::move(lg.grads);
            continue;
        }
        for (auto& [name, g] : acc) {
            const auto& other = lg.grads.at(name);
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] += other[i];
        }
    }
    const std::size_t n = micro_batches.size();
    if (n > 1) {
        for (auto& [name, g] : acc) {
            for (std::size_t i = 0; i < g.numel(); ++i) g[i] /= static_cast<T>(n);
        }
    }
    const double norm = opt.grad_clip > 0.0 ? ops::clip_gradients(acc, opt.grad_clip) : ops::global_grad_norm(acc);
    if (grad_norm) *grad_norm = norm;
    TensorMap<T> params = adapters.as_tensors();
    if (state.m.empty()) state = OptimState<T>::zeros_for(params);
    adamw_step(params, acc, state, lr, opt);
    adapters.assign_from(params);
    return loss / double(n);
}

template <typename T>
SftTrainer<T>::SftTrainer(const ModelParams<T>& base, ModelConfig cfg, LoraAdapters<T> adapters,
                          std::vector<ChatExample> examples, std::int32_t pad_id, SftOptions options)
    : mBase(base),
      mConfig(std::move(cfg)),
      mAdapters(std::move(adapters)),
      mExamples(std::move(examples)),
      mPad(pad_id),
      mOptions(std::move(options)),
      mRng(mOptions.seed) {
    if (mExamples.empty()) throw ConfigError("no SFT examples");
    if (mOptions.batch == 0 || mOptions.accum == 0) throw ConfigError("SFT batch and accum must be positive");
    mOptions.schedule.validate();
    mOptions.optimizer.validate();
    mState = OptimState<T>::zeros_for(mAdapters.as_tensors());
    mOrder.resize(mExamples.size());
    std::iota(mOrder.begin(), mOrder.end(), std::size_t{0});
    std::shuffle(mOrder.begin(), mOrder.end(), mRng);
}

template <typename T>
const ChatExample* SftTrainer<T>::next_example() {
    if (mPos == mOrder.size()) {
        std::shuffle(mOrder.begin(), mOrder.end(), mRng);
        mPos = 0;
    }
    return &mExamples[mOrder[mPos++]];
}

template <typename T>
typename SftTrainer<T>::Result SftTrainer<T>::step() {
    std::vector<SftBatch> micro;
    for (std::size_t a = 0; a < mOptions.accum; ++a) {
        std::vector<const ChatExample*> rows;
        for (std::size_t b = 0; b < mOptions.batch; ++b) rows.push_back(next_example());
        micro.push_back(make_sft_batch(rows, mPad, mOptions.max_len));
    }
    Result r;
    r.lr = lr_at_step(mOptions.schedule, mStep);
    r.loss = sft_step<T>(mBase, mConfig, mAdapters, micro, mState, r.lr, mOptions.optimizer, &r.grad_norm);
    ++mStep;
    return r;
}

template double sft_step<float>(const ModelParams<float>&, const ModelConfig&, LoraAdapters<float>&,
                                std::span<const SftBatch>, OptimState<float>&, double, const AdamWConfig&, double*);
template double sft_step<double>(const ModelParams<double>&, const ModelConfig&, LoraAdapters<double>&,
                                 std::span<const SftBatch>, OptimState<double>&, double, const AdamWConfig&,
                                 double*);
template class SftTrainer<float>;
template class SftTrainer<double>;

}  // namespace llf
