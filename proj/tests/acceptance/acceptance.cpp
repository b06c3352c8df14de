// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: `llf_acceptance [N ...]` runs criteria 1..11 (all when none are given) and
// prints one PASS/FAIL line per criterion. `llf_acceptance --write-golden DIR` regenerates the
// golden fixtures. Exit status is 0 only when every requested criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llf/checkpoint.h"
#include "llf/data.h"
#include "llf/eval.h"
#include "llf/lora.h"
#include "llf/model.h"
#include "llf/ops.h"
#include "llf/optim.h"
#include "llf/sft.h"
#include "llf/tokenizer.h"
#include "llf/train.h"
#include "test_support.h"

using namespace llf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- pinned tolerances and limits --------------------------------------------------------

constexpr std::uint64_t kParamCount = 1'715'951'616ULL;
constexpr double kParamCountSeconds = 1e-3;

constexpr double kCorrR[3] = {0.928, -0.945, 0.963};
constexpr double kCorrR2[3] = {0.860, 0.893, 0.927};
constexpr double kCorrRTol = 0.005;
constexpr double kCorrR2Tol = 0.01;
constexpr double kCorrSeconds = 1.0;

constexpr std::size_t kUtf8Cases = 1000;
constexpr double kTokenizerSeconds = 10.0;

constexpr int kGradSeeds = 20;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120.0;

constexpr double kResumeSeconds = 300.0;
constexpr double kWeightsOnlySeconds = 600.0;

constexpr int kDdpSteps = 50;
constexpr double kDdpRelTol = 1e-6;
constexpr double kDdpSeconds = 300.0;

constexpr double kMergeTol = 1e-4;
constexpr double kLoraSeconds = 60.0;

constexpr std::size_t kSftExamples = 600;
constexpr std::int64_t kSftSteps = 400;
constexpr std::size_t kSftSmooth = 50;
constexpr double kSftDrop = 0.30;
constexpr double kSftSeconds = 1200.0;

constexpr std::size_t kPretrainTokens = 1'000'000;
constexpr std::int64_t kPretrainSteps = 2000;
constexpr double kPretrainRatio = 0.8;
constexpr double kPeakLr = 6e-4;
constexpr double kPretrainSeconds = 1800.0;

constexpr double kFormatSeconds = 10.0;

// ---- helpers --------------------------------------------------------------------------------

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

std::string fixed(double v, int prec = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

const Tokenizer& gpt2() {
    static const Tokenizer tok =
        Tokenizer::load(test::data_dir() / "gpt2" / "vocab.json", test::data_dir() / "gpt2" / "merges.txt");
    return tok;
}

json schema_of(const json& j) {
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [k, v] : j.items()) out[k] = schema_of(v);
        return out;
    }
    if (j.is_array()) return j.empty() ? json::array() : json::array({schema_of(j.front())});
    if (j.is_number_integer()) return "integer";
    if (j.is_number()) return "number";
    return j.type_name();
}

// The tiny setup shared by the resume criteria.
struct ResumeSetup {
    ModelConfig cfg = test::tiny_model();
    ScheduleConfig sched{3e-3, 4, 200, 0.1, DecayShape::Cosine};  // warmup 700/40000 of the run
    TrainerOptions opts;
    // One chain, split: the head trains, the tail validates.
    std::vector<std::int32_t> tokens = test::markov_tokens(220'000, 97, 1001);
    Corpus train = Corpus::from_tokens({tokens.begin(), tokens.begin() + 200'000});
    Corpus val = Corpus::from_tokens({tokens.begin() + 200'000, tokens.end()});

    ResumeSetup() {
        opts.batch = 8;
        opts.seq = 32;
        opts.eval_batch = 8;
        opts.eval_batches = 4;
    }
};

// Continuous 200-step run with a checkpoint saved after step 100.
struct ContinuousRun {
    fs::path ckpt;
    std::vector<double> losses;  // steps 101..200
    std::vector<double> val;     // steps 101..200 (when requested)
};

ContinuousRun continuous_run(const ResumeSetup& s, const fs::path& dir, bool with_val) {
    ContinuousRun r;
    Trainer<float> t(TrainState<float>::fresh(s.cfg, 17, s.sched, AdamWConfig{}), s.opts, &s.train, &s.val);
    for (int i = 0; i < 100; ++i) t.step();
    r.ckpt = save_checkpoint(t.snapshot(), dir);
    for (int i = 0; i < 100; ++i) {
        r.losses.push_back(t.step().loss);
        if (with_val) r.val.push_back(t.validation_loss());
    }
    return r;
}

// ---- criteria -------------------------------------------------------------------------------

Outcome criterion_1() {
    const ModelConfig cfg = ModelConfig::paper_1716m();
    const auto t0 = Clock::now();
    const std::uint64_t n = count_parameters(cfg);
    const double dt = seconds_since(t0);
    return {n == kParamCount && dt < kParamCountSeconds,
            "count " + std::to_string(n) + " (want " + std::to_string(kParamCount) + "), " + fmt(dt * 1e3) +
                " ms (limit " + fmt(kParamCountSeconds * 1e3) + " ms)"};
}

Outcome criterion_2() {
    const auto t0 = Clock::now();
    const auto r = test::run_cli({"report", "--paper-fixture", "--json"});
    const double dt = seconds_since(t0);
    if (r.exit_code != 0) return {false, "report exited with " + std::to_string(r.exit_code) + ": " + r.output};
    const auto entries = json::parse(r.output).at("correlations");
    if (entries.size() != 3) return {false, "expected 3 correlations, got " + std::to_string(entries.size())};
    bool ok = dt < kCorrSeconds;
    std::string detail;
    for (std::size_t i = 0; i < 3; ++i) {
        const double rv = entries[i].at("r"), r2 = entries[i].at("r2");
        const bool r_ok = std::abs(rv - kCorrR[i]) <= kCorrRTol;
        const bool r2_ok = std::abs(r2 - kCorrR2[i]) <= kCorrR2Tol;
        ok = ok && r_ok && r2_ok;
        detail += entries[i].at("x").get<std::string>() + ": r " + fixed(rv) + " (want " + fixed(kCorrR[i]) + "±" +
                  fixed(kCorrRTol) + (r_ok ? "" : " MISS") + "), R^2 " + fixed(r2) + " (want " + fixed(kCorrR2[i]) +
                  "±" + fixed(kCorrR2Tol, 2) + (r2_ok ? "" : " MISS") + "); ";
    }
    return {ok, detail + fmt(dt) + " s"};
}

Outcome criterion_3() {
    const auto t0 = Clock::now();
    const Tokenizer& tok = gpt2();
    using Pieces = std::vector<std::string>;
    const std::string G = "\xC4\xA0";
    const bool a = tok.encode_pieces("ASSISTANT:") == Pieces{"ASS", "IST", "ANT", ":"};
    const bool b = tok.encode_pieces("ASSISTANT: ") == Pieces{"ASS", "IST", "ANT", ":", G};
    const bool c = tok.encode_pieces(" Berlin") == Pieces{G + "Berlin"};
    std::mt19937_64 rng(2026);
    std::size_t round_trips = 0;
    for (std::size_t i = 0; i < kUtf8Cases; ++i) {
        const std::string s = test::random_utf8(rng, 32);
        round_trips += tok.decode(tok.encode(s)) == s;
    }
    const double dt = seconds_since(t0);
    return {a && b && c && round_trips == kUtf8Cases && dt < kTokenizerSeconds,
            std::string("ASSISTANT: ") + (a ? "ok" : "MISMATCH") + ", trailing space " + (b ? "ok" : "MISMATCH") +
                ", ' Berlin' " + (c ? "ok" : "MISMATCH") + ", UTF-8 round trip " + std::to_string(round_trips) + "/" +
                std::to_string(kUtf8Cases) + ", " + fmt(dt) + " s"};
}

Outcome criterion_4() {
    const auto t0 = Clock::now();
    const ModelConfig cfg = test::tiny_model(97);
    double worst = 0.0;
    std::string worst_at;
    for (int seed = 0; seed < kGradSeeds; ++seed) {
        const auto params = build_model<double>(cfg, std::uint64_t(seed));
        const auto toks = test::markov_tokens(2 * 9, 97, std::uint64_t(seed) + 100);
        const TokenBatch inputs(2, 8, std::vector<std::int32_t>(toks.begin(), toks.begin() + 16));
        std::vector<std::int32_t> targets(toks.begin() + 2, toks.begin() + 18);
        const auto lg = loss_and_grads(params, cfg, inputs, targets, kIgnoreIndex);
        const auto fn = [&](const ModelParams<double>& p) { return loss_only(p, cfg, inputs, targets, kIgnoreIndex); };
        ops::GradCheckOptions o;
        o.seed = std::uint64_t(seed);
        const auto r = ops::grad_check(fn, params, lg.grads, o);
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_at = r.worst_name + "[" + std::to_string(r.worst_index) + "] seed " + std::to_string(seed);
        }
    }
    const double dt = seconds_since(t0);
    return {worst < kGradTol && dt < kGradSeconds,
            "max rel error " + fmt(worst, 3) + " at " + worst_at + " over " + std::to_string(kGradSeeds) +
                " seeds (limit " + fmt(kGradTol) + "), " + fmt(dt) + " s"};
}

Outcome criterion_5() {
    const auto t0 = Clock::now();
    const ResumeSetup s;
    const auto dir = test::scratch_dir("acceptance_5");
    const auto ref = continuous_run(s, dir, false);
    const auto resumed = resume_run<float>(ref.ckpt, ResumeOptions{}, s.train, 100, s.opts);
    std::size_t equal = 0;
    std::int64_t first_diff = -1;
    for (std::size_t i = 0; i < resumed.size() && i < ref.losses.size(); ++i) {
        const bool same = std::memcmp(&resumed[i].stats.loss, &ref.losses[i], sizeof(double)) == 0 &&
                          resumed[i].step == std::int64_t(101 + i);
        equal += same;
        if (!same && first_diff < 0) first_diff = std::int64_t(101 + i);
    }
    const double dt = seconds_since(t0);
    return {equal == 100 && resumed.size() == 100 && dt < kResumeSeconds,
            std::to_string(equal) + "/100 losses bitwise equal" +
                (first_diff >= 0 ? " (first difference at step " + std::to_string(first_diff) + ")" : "") + ", " +
                fmt(dt) + " s"};
}

Outcome criterion_6() {
    const auto t0 = Clock::now();
    const ResumeSetup s;
    const auto dir = test::scratch_dir("acceptance_6");
    const auto ref = continuous_run(s, dir, true);
    ResumeOptions wo;
    wo.mode = ResumeMode::WeightsOnly;
    const auto resumed = resume_run<float>(ref.ckpt, wo, s.train, 100, s.opts, &s.val);
    if (resumed.size() != 100) return {false, "resume produced " + std::to_string(resumed.size()) + " steps"};
    const auto mean_gap = [&](std::size_t from, std::size_t to, double& cont, double& wonly) {
        cont = wonly = 0.0;
        for (std::size_t i = from; i < to; ++i) {
            cont += ref.val[i];
            wonly += *resumed[i].val_loss;
        }
        cont /= double(to - from);
        wonly /= double(to - from);
        return wonly - cont;
    };
    double c_early, w_early, c_late, w_late;
    const double early = mean_gap(0, 20, c_early, w_early);   // steps 101..120
    const double late = mean_gap(80, 100, c_late, w_late);    // steps 181..200
    const double dt = seconds_since(t0);
    return {w_early > c_early && late < early && dt < kWeightsOnlySeconds,
            "val 101-120: weights-only " + fixed(w_early, 4) + " vs continuous " + fixed(c_early, 4) + " (gap " +
                fmt(early, 3) + "); 181-200 gap " + fmt(late, 3) + "; " + fmt(dt) + " s"};
}

Outcome criterion_7() {
    const auto t0 = Clock::now();
    const ModelConfig cfg = test::tiny_model();
    const Corpus corpus = Corpus::from_tokens(test::markov_tokens(100'000, 97, 77));
    const auto params = build_model<double>(cfg, 7);
    const auto zeros = OptimState<double>::zeros_for(params);
    auto one = WorkerSet<double>::replicate(params, zeros, 1);
    auto two = WorkerSet<double>::replicate(params, zeros, 2);
    StepOptions big, half;
    big.batch_per_worker = 8;
    half.batch_per_worker = 4;
    big.seq = half.seq = 32;
    half.verify_hashes = true;
    const ScheduleConfig sched{1e-3, 5, kDdpSteps, 0.1, DecayShape::Cosine};
    CorpusCursor ca, cb;
    double worst = 0.0;
    int hash_ok = 0;
    for (int step = 0; step < kDdpSteps; ++step) {
        big.lr = half.lr = lr_at_step(sched, step);
        const auto a = parallel_train_step(one, cfg, corpus, ca, big);
        const auto b = parallel_train_step(two, cfg, corpus, cb, half);
        worst = std::max(worst, std::abs(a.loss - b.loss) / std::abs(a.loss));
        const auto h = two.param_hashes();
        hash_ok += h[0] == h[1];
    }
    const double dt = seconds_since(t0);
    return {worst < kDdpRelTol && hash_ok == kDdpSteps && dt < kDdpSeconds,
            "max relative loss difference " + fmt(worst, 3) + " (limit " + fmt(kDdpRelTol) + "), hashes identical " +
                std::to_string(hash_ok) + "/" + std::to_string(kDdpSteps) + " steps, " + fmt(dt) + " s"};
}

Outcome criterion_8() {
    const auto t0 = Clock::now();
    ModelConfig cfg = test::tiny_model(50257);
    cfg.max_position = 128;
    const auto base = build_model<float>(cfg, 8);
    const auto ex = render_example(gpt2(), "Name something that is blue.", "Something that is blue is a blue car.");
    const ChatExample* one[] = {&ex};
    const auto batch = make_sft_batch(one, gpt2().eot_id(), 128);

    // 1. Adapter at init: bitwise identical forward.
    LoraConfig lc;
    lc.rank = 8;
    lc.alpha = 16;
    const auto at_init = attach_adapters(base, lc, 8);
    const auto plain = forward_logits(base, cfg, batch.inputs);
    const bool identity = forward_logits<float>(base, cfg, batch.inputs, nullptr, &at_init).bitwise_equal(plain);

    // 2. Merged vs runtime after perturbing B.
    AdaptedModel<float> m{base, at_init, false};
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 0.05);
    for (auto& [host, pair] : m.adapters.pairs)
        for (auto& x : pair.b.vec()) x = float(nd(rng));
    const auto runtime = forward_logits<float>(base, cfg, batch.inputs, nullptr, &m.adapters);
    const auto merged = forward_logits(merge_adapters(m), cfg, batch.inputs);
    double max_delta = 0.0;
    for (std::size_t i = 0; i < runtime.numel(); ++i)
        max_delta = std::max(max_delta, double(std::abs(runtime[i] - merged[i])));

    // 3. Logit gradients at mask-false positions.
    Tensor dlogits;
    const std::size_t T = batch.inputs.cols, V = std::size_t(cfg.vocab_size);
    ops::cross_entropy(runtime.reshaped({T, V}), batch.targets, kIgnoreIndex, &dlogits);
    std::size_t masked = 0, nonzero_masked = 0;
    for (std::size_t t = 0; t < T; ++t) {
        if (batch.targets[t] != kIgnoreIndex) continue;
        ++masked;
        for (std::size_t v = 0; v < V; ++v) nonzero_masked += dlogits.at2(t, v) != 0.0f;
    }
    const double dt = seconds_since(t0);
    return {identity && max_delta < kMergeTol && masked > 0 && nonzero_masked == 0 && dt < kLoraSeconds,
            std::string("init forward ") + (identity ? "bitwise equal" : "DIFFERS") + ", merged max |dlogit| " +
                fmt(max_delta, 3) + " (limit " + fmt(kMergeTol) + "), " + std::to_string(nonzero_masked) +
                " nonzero grads over " + std::to_string(masked) + " masked positions, " + fmt(dt) + " s"};
}

// Token ids of the pre-training and SFT text, densely renumbered: the tiny base's vocabulary is the
// set of GPT-2 tokens that occur in its data.
struct CompactVocab {
    std::vector<std::int32_t> to_dense;  // GPT-2 id -> dense id or -1
    std::int32_t size = 0;

    std::int32_t add(std::int32_t id) {
        if (to_dense[std::size_t(id)] < 0) to_dense[std::size_t(id)] = size++;
        return to_dense[std::size_t(id)];
    }
    void remap(std::vector<std::int32_t>& ids) {
        for (auto& x : ids) x = add(x);
    }
};

Outcome criterion_9() {
    const auto t0 = Clock::now();
    const Tokenizer& tok = gpt2();
    CompactVocab cv;
    cv.to_dense.assign(tok.vocab_size(), -1);
    const std::int32_t eot = cv.add(tok.eot_id());

    auto data = parse_alpaca(test::synthetic_alpaca_json(kSftExamples, 9));
    render_all(tok, data.examples);
    for (auto& ex : data.examples) cv.remap(ex.ids);

    // Pre-training text: synthetic documents plus the templated answers' vocabulary in prose.
    std::vector<std::int32_t> stream;
    for (const auto& doc : test::synthetic_documents(3000, 10)) {
        auto ids = tok.encode(doc);
        cv.remap(ids);
        stream.insert(stream.end(), ids.begin(), ids.end());
        stream.push_back(eot);
    }
    ModelConfig cfg = test::tiny_model(cv.size);
    cfg.hidden_size = 64;
    cfg.intermediate_size = 128;
    cfg.max_position = 128;
    const Corpus corpus = Corpus::from_tokens(stream);
    TrainerOptions po;
    po.batch = 8;
    po.seq = 64;
    Trainer<float> pre(TrainState<float>::fresh(cfg, 9, ScheduleConfig{3e-3, 20, 400, 0.1, DecayShape::Cosine},
                                                AdamWConfig{}),
                       po, &corpus);
    for (int i = 0; i < 400; ++i) pre.step();
    const ModelParams<float> base = pre.params();

    LoraConfig lc;
    lc.rank = 8;
    lc.alpha = 16;
    SftOptions so;
    so.batch = 8;
    so.accum = 1;
    so.max_len = 128;
    so.schedule = ScheduleConfig{1e-3, 5, kSftSteps, 0.0, DecayShape::Linear};
    so.seed = 9;
    SftTrainer<float> sft(base, cfg, attach_adapters(base, lc, 9), std::move(data.examples), eot, so);
    std::vector<double> losses;
    for (std::int64_t i = 0; i < kSftSteps; ++i) losses.push_back(sft.step().loss);
    const double first = std::accumulate(losses.begin(), losses.begin() + kSftSmooth, 0.0) / double(kSftSmooth);
    const double last = std::accumulate(losses.end() - kSftSmooth, losses.end(), 0.0) / double(kSftSmooth);
    const double drop = 1.0 - last / first;
    const double dt = seconds_since(t0);
    return {drop >= kSftDrop && dt < kSftSeconds,
            std::to_string(kSftExamples) + " examples, vocab " + std::to_string(cv.size) + ", smoothed loss " +
                fixed(first) + " -> " + fixed(last) + " (drop " + fixed(100 * drop, 1) + "%, need " +
                fixed(100 * kSftDrop, 0) + "%), " + fmt(dt) + " s"};
}

Outcome criterion_10() {
    const auto t0 = Clock::now();
    const std::int32_t V = 97;
    const auto tokens = test::markov_tokens(kPretrainTokens + 50'000, V, 10);
    const Corpus train = Corpus::from_tokens({tokens.begin(), tokens.begin() + std::ptrdiff_t(kPretrainTokens)});
    const Corpus val = Corpus::from_tokens({tokens.begin() + std::ptrdiff_t(kPretrainTokens), tokens.end()});
    const ModelConfig cfg = test::tiny_model(V);
    const ScheduleConfig sched{kPeakLr, 35, kPretrainSteps, 0.1, DecayShape::Cosine};  // warmup 700/40000 of the run
    TrainerOptions o;
    o.batch = 8;
    o.seq = 64;
    o.eval_batch = 8;
    o.eval_batches = 8;
    Trainer<float> t(TrainState<float>::fresh(cfg, 10, sched, AdamWConfig{}), o, &train, &val);
    std::size_t lr_mismatch = 0;
    double lr_at_warmup_end = 0.0;
    for (std::int64_t step = 0; step < kPretrainSteps; ++step) {
        const auto s = t.step();
        // Independent closed form of the configured shape.
        double want;
        if (step < sched.warmup_steps) {
            want = kPeakLr * double(step + 1) / double(sched.warmup_steps);
        } else {
            const double p = double(step - sched.warmup_steps) / double(sched.total_steps - sched.warmup_steps);
            const double floor = kPeakLr * sched.min_lr_ratio;
            want = floor + 0.5 * (kPeakLr - floor) * (1.0 + std::cos(M_PI * p));
        }
        if (std::abs(s.lr - want) > 1e-12 * kPeakLr || lr_at_step(sched, step) != s.lr) ++lr_mismatch;
        if (step == sched.warmup_steps - 1) lr_at_warmup_end = s.lr;
    }
    const double loss = t.validation_loss();
    const double limit = kPretrainRatio * std::log(double(V));
    const double dt = seconds_since(t0);
    return {loss < limit && lr_mismatch == 0 && lr_at_warmup_end == kPeakLr && dt < kPretrainSeconds,
            "val loss " + fixed(loss) + " (limit " + fixed(limit) + " = 0.8 ln " + std::to_string(V) + ", chain entropy " +
                fixed(test::markov_entropy()) + "), lr mismatches " + std::to_string(lr_mismatch) + ", lr at warmup end " +
                fmt(lr_at_warmup_end) + ", " + std::to_string(kPretrainTokens) + " train tokens, " + fmt(dt) + " s"};
}

Outcome criterion_11() {
    const auto t0 = Clock::now();
    const fs::path dir = test::fixtures_dir();
    std::vector<std::string> problems;
    json hashes;
    try {
        hashes = json::parse(test::read_file(dir / "golden_hashes.json"));
    } catch (const std::exception& e) {
        return {false, std::string("cannot read golden_hashes.json: ") + e.what()};
    }
    const auto check_hash = [&](const std::string& name, const std::string& bytes) {
        const auto& h = hashes.at(name);
        std::ostringstream hex;
        hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes.data(), bytes.size());
        if (h.at("bytes") != bytes.size() || h.at("fnv1a64") != hex.str()) problems.push_back(name + " hash");
    };
    const std::string shard = test::read_file(dir / "golden_shard.bin");
    const std::string ckpt = test::read_file(dir / "golden_checkpoint.ckpt");
    check_hash("golden_shard.bin", shard);
    check_hash("golden_checkpoint.ckpt", ckpt);

    const std::vector<std::uint8_t> sb(shard.begin(), shard.end()), cb(ckpt.begin(), ckpt.end());
    if (decode_shard(sb) != test::golden_shard_ids()) problems.push_back("shard decode");
    if (encode_shard(decode_shard(sb), ShardDtype::U16) != sb) problems.push_back("shard re-encode");
    if (encode_checkpoint(test::golden_train_state()) != cb) problems.push_back("checkpoint recipe bytes");
    if (encode_checkpoint(load_checkpoint(dir / "golden_checkpoint.ckpt", ResumeMode::Full)) != cb)
        problems.push_back("checkpoint round trip");

    const auto r = test::run_cli({"inspect", (dir / "golden_checkpoint.ckpt").string()});
    if (r.exit_code != 0) {
        problems.push_back("inspect exit " + std::to_string(r.exit_code));
    } else {
        const json want = json::parse(test::read_file(dir / "golden_inspect_schema.json"));
        if (schema_of(json::parse(r.output)) != want) problems.push_back("inspect schema");
    }
    const double dt = seconds_since(t0);
    std::string detail = problems.empty() ? "shard " + std::to_string(shard.size()) + " B and checkpoint " +
                                                std::to_string(ckpt.size()) + " B match hashes and round-trip; " +
                                                "inspect schema stable"
                                          : "problems:";
    for (const auto& p : problems) detail += " " + p + ";";
    return {problems.empty() && dt < kFormatSeconds, detail + " " + fmt(dt) + " s"};
}

int write_golden(const fs::path& dir) {
    test::write_golden_fixtures(dir);
    const auto r = test::run_cli({"inspect", (dir / "golden_checkpoint.ckpt").string()});
    if (r.exit_code != 0) {
        std::cerr << "inspect failed: " << r.output << "\n";
        return 1;
    }
    std::ofstream(dir / "golden_inspect_schema.json") << schema_of(json::parse(r.output)).dump(2) << "\n";
    std::cout << "wrote golden fixtures to " << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc == 3 && std::strcmp(argv[1], "--write-golden") == 0) return write_golden(argv[2]);
    const std::vector<std::function<Outcome()>> criteria = {criterion_1, criterion_2, criterion_3, criterion_4,
                                                            criterion_5, criterion_6, criterion_7, criterion_8,
                                                            criterion_9, criterion_10, criterion_11};
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (n < 1 || n > int(criteria.size())) {
            std::cerr << "usage: llf_acceptance [1..11 ...] | --write-golden DIR\n";
            return 2;
        }
        which.push_back(n);
    }
    if (which.empty()) {
        which.resize(criteria.size());
        std::iota(which.begin(), which.end(), 1);
    }
    bool all = true;
    for (int n : which) {
        Outcome o;
        try {
            o = criteria[std::size_t(n - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    }
    return all ? 0 : 1;
}
