// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "test_support.h"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "llf/data.h"

namespace llf::test {

namespace fs = std::filesystem;

fs::path data_dir() { return LLF_TEST_DATA_DIR; }
fs::path fixtures_dir() { return LLF_TEST_FIXTURES_DIR; }
fs::path cli_path() { return LLF_TEST_CLI; }

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::path(LLF_TEST_SCRATCH_DIR) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ModelConfig tiny_model(std::int64_t vocab) {
    ModelConfig c;
    c.hidden_size = 32;
    c.intermediate_size = 64;
    c.n_layers = 2;
    c.n_heads = 4;
    c.n_kv_heads = 2;
    c.vocab_size = vocab;
    c.max_position = 64;
    return c;
}

namespace {

std::vector<double> successor_probs(std::size_t branching) {
    std::vector<double> p(branching);
    double total = 0.0;
    for (std::size_t i = 0; i < branching; ++i) total += p[i] = std::pow(0.5, double(i));
    for (auto& x : p) x /= total;
    return p;
}

}  // namespace

std::vector<std::int32_t> markov_tokens(std::size_t n, std::int32_t vocab, std::uint64_t seed, std::size_t branching) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int32_t> pick(0, vocab - 1);
    std::vector<std::vector<std::int32_t>> next(static_cast<std::size_t>(vocab));
    for (auto& row : next) {
        for (std::size_t i = 0; i < branching; ++i) row.push_back(pick(rng));
    }
    const auto probs = successor_probs(branching);
    std::discrete_distribution<std::size_t> branch(probs.begin(), probs.end());
    std::vector<std::int32_t> out(n);
    std::int32_t cur = pick(rng);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = cur;
        cur = next[static_cast<std::size_t>(cur)][branch(rng)];
    }
    return out;
}

double markov_entropy(std::size_t branching) {
    double h = 0.0;
    for (double p : successor_probs(branching)) h -= p * std::log(p);
    return h;
}

namespace {

const std::vector<std::string> kSubjects = {"the cat", "a small dog", "the old man", "my sister", "the teacher",
                                            "a bird", "the farmer", "our neighbor", "the child", "a young girl"};
const std::vector<std::string> kVerbs = {"walked to", "looked at", "painted", "found", "cleaned",
                                         "visited", "opened", "carried", "liked", "watched"};
const std::vector<std::string> kObjects = {"the garden", "a red box", "the river", "the market", "a tall tree",
                                           "the kitchen", "an old book", "the window", "the school", "a blue car"};
const std::vector<std::string> kTails = {"in the morning", "after lunch", "with a smile", "every day",
                                         "before dinner", "at night", "in the rain", "on sunday"};

template <typename R>
const std::string& pick_of(const std::vector<std::string>& v, R& rng) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

}  // namespace

std::vector<std::string> synthetic_documents(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> docs;
    for (std::size_t d = 0; d < n; ++d) {
        std::string doc;
        const std::size_t sentences = 3 + rng() % 4;
        for (std::size_t s = 0; s < sentences; ++s) {
            std::string sent = pick_of(kSubjects, rng) + " " + pick_of(kVerbs, rng) + " " + pick_of(kObjects, rng) +
                               " " + pick_of(kTails, rng) + ". ";
            sent[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sent[0])));
            doc += sent;
        }
        doc.pop_back();
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::string synthetic_alpaca_json(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::vector<std::string> colors = {"red", "blue", "green", "yellow", "black", "white"};
    const std::vector<std::string> words = {"cat", "dog", "tree", "house", "river", "book", "apple", "chair"};
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
        nlohmann::json rec = {{"instruction", ""}, {"input", ""}, {"output", ""}};
        switch (i % 5) {
            case 0: {
                const int a = int(rng() % 10), b = int(rng() % 10);
                rec["instruction"] = "Add " + std::to_string(a) + " and " + std::to_string(b) + ".";
                rec["output"] = "The answer is " + std::to_string(a + b) + ".";
                break;
            }
            case 1: {
                const auto& c = pick_of(colors, rng);
                rec["instruction"] = "Name something that is " + c + ".";
                rec["output"] = "Something that is " + c + " is a " + c + " " + pick_of(words, rng) + ".";
                break;
            }
            case 2: {
                const auto& w = pick_of(words, rng);
                rec["instruction"] = "Use the word " + w + " in a sentence.";
                rec["output"] = "Here is a sentence: the " + w + " is here.";
                break;
            }
            case 3: {
                const auto& w = pick_of(words, rng);
                rec["instruction"] = "What is the plural of " + w + "?";
                rec["output"] = "The plural of " + w + " is " + w + "s.";
                break;
            }
            default: {
                const auto& w = pick_of(words, rng);
                rec["instruction"] = "Repeat the input twice.";
                rec["input"] = w;
                rec["output"] = w + " " + w;
                break;
            }
        }
        arr.push_back(std::move(rec));
    }
    return arr.dump(1);
}

namespace {

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

}  // namespace

std::string random_utf8(std::mt19937_64& rng, std::size_t max_codepoints) {
    static const std::array<std::pair<char32_t, char32_t>, 8> kRanges = {{
        {0x20, 0x7E},        // printable ASCII
        {0x00, 0x1F},        // control bytes
        {0x20, 0x20},        // spaces
        {0xA0, 0x24F},       // Latin-1 and extended Latin
        {0x370, 0x3FF},      // Greek
        {0x4E00, 0x9FFF},    // CJK
        {0x1F300, 0x1FAFF},  // emoji
        {0x0E00, 0x0E7F},    // Thai
    }};
    std::string out;
    const std::size_t n = rng() % (max_codepoints + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [lo, hi] = kRanges[rng() % kRanges.size()];
        append_utf8(out, lo + static_cast<char32_t>(rng() % (hi - lo + 1)));
    }
    return out;
}

std::vector<std::int32_t> golden_shard_ids() {
    std::vector<std::int32_t> ids;
    for (std::int32_t i = 0; i < 64; ++i) ids.push_back((i * 7919) % 50257);
    ids.push_back(50256);
    return ids;
}

TrainState<float> golden_train_state() {
    ModelConfig cfg;
    cfg.hidden_size = 8;
    cfg.intermediate_size = 16;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.n_kv_heads = 1;
    cfg.vocab_size = 11;
    cfg.max_position = 16;
    TrainState<float> s;
    s.model = cfg;
    std::size_t k = 0;
    for (const auto& [name, shape] : parameter_layout(cfg)) {
        Tensor t(shape);
        for (auto& x : t.vec()) x = float(int(k++ % 17) - 8) / 16.0f;
        s.params.emplace(name, std::move(t));
    }
    s.optim = OptimState<float>::zeros_for(s.params);
    for (auto& [name, t] : s.optim.m)
        for (auto& x : t.vec()) x = float(int(k++ % 9) - 4) / 64.0f;
    for (auto& [name, t] : s.optim.v)
        for (auto& x : t.vec()) x = float(k++ % 5) / 256.0f;
    s.optim.step_count = 3;
    s.step = 3;
    s.schedule = ScheduleConfig{1e-3, 2, 10, 0.1, DecayShape::Cosine};
    s.optimizer = AdamWConfig{};
    s.cursor = CorpusCursor{1, 42, 0};
    s.rng.seed(7);
    s.run_config = nullptr;
    return s;
}

void write_golden_fixtures(const fs::path& dir) {
    fs::create_directories(dir);
    const auto shard = encode_shard(golden_shard_ids(), ShardDtype::U16);
    std::ofstream(dir / "golden_shard.bin", std::ios::binary)
        .write(reinterpret_cast<const char*>(shard.data()), static_cast<std::streamsize>(shard.size()));
    const auto ckpt = encode_checkpoint(golden_train_state());
    std::ofstream(dir / "golden_checkpoint.ckpt", std::ios::binary)
        .write(reinterpret_cast<const char*>(ckpt.data()), static_cast<std::streamsize>(ckpt.size()));
    auto hex = [](std::uint64_t h) {
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << h;
        return os.str();
    };
    const nlohmann::json hashes = {
        {"golden_shard.bin", {{"bytes", shard.size()}, {"fnv1a64", hex(fnv1a64(shard.data(), shard.size()))}}},
        {"golden_checkpoint.ckpt", {{"bytes", ckpt.size()}, {"fnv1a64", hex(fnv1a64(ckpt.data(), ckpt.size()))}}},
    };
    std::ofstream(dir / "golden_hashes.json") << hashes.dump(2) << "\n";
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

}  // namespace

CliResult run_cli(const std::vector<std::string>& args) {
    std::string cmd = shell_quote(cli_path().string());
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " 2>&1";
    CliResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf;
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), got);
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace llf::test
