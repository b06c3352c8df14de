// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cstring>
#include <fstream>

#include "llf/checkpoint.h"
#include "llf/error.h"
#include "llf/train.h"
#include "test_support.h"

using namespace llf;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::uint64_t header_len(const std::string& bytes) {
    std::uint64_t n = 0;
    for (int i = 7; i >= 0; --i) n = (n << 8) | static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)]);
    return n;
}

TrainState<float> trained_state(std::uint64_t seed) {
    auto s = TrainState<float>::fresh(test::tiny_model(), seed, ScheduleConfig{1e-3, 2, 20, 0.1, DecayShape::Cosine},
                                      AdamWConfig{});
    const Corpus corpus = Corpus::from_tokens(test::markov_tokens(4000, 97, seed));
    TrainerOptions o;
    o.batch = 2;
    o.seq = 16;
    Trainer<float> t(std::move(s), o, &corpus);
    for (int i = 0; i < 3; ++i) t.step();
    return t.snapshot();
}

}  // namespace

TEST_CASE("save, load, save is byte identical", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_roundtrip");
    const auto state = trained_state(1);
    const auto p1 = save_checkpoint(state, dir / "a");
    CHECK(p1.filename() == "step3.ckpt");
    const auto loaded = load_checkpoint(p1, ResumeMode::Full);
    const auto p2 = save_checkpoint(loaded, dir / "b");
    CHECK(test::read_file(p1) == test::read_file(p2));

    CHECK(loaded.step == 3);
    CHECK(loaded.model == state.model);
    CHECK(loaded.schedule == state.schedule);
    CHECK(loaded.optimizer == state.optimizer);
    CHECK(loaded.cursor == state.cursor);
    CHECK(loaded.optim.step_count == 3);
    CHECK(hash_tensors(loaded.params) == hash_tensors(state.params));
    CHECK(hash_tensors(loaded.optim.m) == hash_tensors(state.optim.m));
    CHECK(hash_tensors(loaded.optim.v) == hash_tensors(state.optim.v));
    auto r1 = state.rng, r2 = loaded.rng;
    for (int i = 0; i < 10; ++i) CHECK(r1() == r2());
}

TEST_CASE("f64 state saves as f32 payload", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_f64");
    const auto s64 = cast_state<float, double>(trained_state(2));
    const auto p = save_checkpoint(s64, dir);
    const auto back = load_checkpoint(p, ResumeMode::Full);
    CHECK(hash_tensors(back.params) == hash_tensors(cast_map<double, float>(s64.params)));
    const auto header = read_container_header(p);
    for (const auto& [name, entry] : header.items()) {
        if (name != kMetaKey) CHECK(entry.at("dtype") == "F32");
    }
}

TEST_CASE("weights-only load zeroes the optimizer state", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_weights_only");
    const auto state = trained_state(3);
    const auto p = save_checkpoint(state, dir);
    const auto w = load_checkpoint(p, ResumeMode::WeightsOnly);
    CHECK(w.step == 3);
    CHECK(w.optim.step_count == 0);
    CHECK(w.cursor == state.cursor);
    CHECK(hash_tensors(w.params) == hash_tensors(state.params));
    for (const auto& [name, t] : w.optim.m)
        for (float x : t.vec()) REQUIRE(x == 0.0f);
    for (const auto& [name, t] : w.optim.v)
        for (float x : t.vec()) REQUIRE(x == 0.0f);
    CHECK(resume_mode_from_string("weights-only") == ResumeMode::WeightsOnly);
    CHECK(resume_mode_from_string("weights_only") == ResumeMode::WeightsOnly);
    CHECK(resume_mode_from_string("full") == ResumeMode::Full);
    CHECK_THROWS_AS(resume_mode_from_string("partial"), ConfigError);
}

TEST_CASE("interrupted write leaves no checkpoint", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_interrupted");
    SaveOptions o;
    o.fail_after_bytes = 100;
    CHECK_THROWS_AS(save_checkpoint(trained_state(4), dir, o), FormatError);
    CHECK(list_checkpoints(dir).empty());
    CHECK_FALSE(fs::exists(dir / "step3.ckpt"));
}

TEST_CASE("header is readable without the payload", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_header");
    const auto p = save_checkpoint(trained_state(5), dir);
    const std::string bytes = test::read_file(p);
    write_bytes(dir / "header_only.ckpt", bytes.substr(0, 8 + header_len(bytes)));
    const auto h = read_container_header(dir / "header_only.ckpt");
    CHECK(h.at(kMetaKey).at("step") == 3);
    CHECK(h.contains("embed"));
    CHECK(h.contains("embed.adam_m"));
    CHECK(h.contains("embed.adam_v"));
    CHECK_THROWS_AS(load_checkpoint(dir / "header_only.ckpt", ResumeMode::Full), FormatError);
}

TEST_CASE("corruption is reported with the tensor name", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_corrupt");
    const auto p = save_checkpoint(trained_state(6), dir);
    const std::string bytes = test::read_file(p);
    const std::size_t hl = header_len(bytes);
    auto header = nlohmann::json::parse(bytes.substr(8, hl));

    const auto rewrite = [&](const fs::path& out_path) {
        const std::string h = header.dump();
        std::string out(8, '\0');
        for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<char>((h.size() >> (8 * i)) & 0xFF);
        write_bytes(out_path, out + h + bytes.substr(8 + hl));
    };

    SECTION("byte range inconsistent with shape") {
        auto& range = header["norm_final"]["data_offsets"];
        range[1] = range[1].get<std::uint64_t>() - 4;
        rewrite(dir / "bad.ckpt");
        try {
            load_checkpoint(dir / "bad.ckpt", ResumeMode::Full);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("'norm_final'") != std::string::npos);
        }
    }
    SECTION("truncated payload") {
        write_bytes(dir / "short.ckpt", bytes.substr(0, bytes.size() - 10));
        try {
            load_checkpoint(dir / "short.ckpt", ResumeMode::Full);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("truncated") != std::string::npos);
        }
    }
    SECTION("garbage header") {
        write_bytes(dir / "junk.ckpt", std::string("\x05\0\0\0\0\0\0\0{{{{{", 13));
        CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt", ResumeMode::Full), FormatError);
    }
    SECTION("tensors disagree with the recorded model") {
        header[kMetaKey]["model"]["vocab_size"] = 50;
        rewrite(dir / "mismatch.ckpt");
        CHECK_THROWS_AS(load_checkpoint(dir / "mismatch.ckpt", ResumeMode::Full), FormatError);
    }
}

TEST_CASE("inspect lists tensors and meta", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_inspect");
    const auto p = save_checkpoint(trained_state(7), dir);
    const auto j = inspect_checkpoint(p);
    CHECK(j.at("format_version") == 1);
    CHECK(j.at("kind") == "train_state");
    CHECK(j.at("step") == 3);
    bool saw_embed = false;
    for (const auto& t : j.at("tensors")) {
        if (t.at("name") == "embed") {
            saw_embed = true;
            CHECK(t.at("shape") == nlohmann::json::array({97, 32}));
            CHECK(t.at("bytes") == 97 * 32 * 4);
            CHECK(t.at("dtype") == "F32");
        }
    }
    CHECK(saw_embed);
    CHECK(j.at("meta").contains("rng"));
    CHECK(j.at("meta").contains("cursor"));
}

TEST_CASE("checkpoint listing orders by step", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_list");
    auto s = trained_state(8);
    for (std::int64_t step : {10, 2, 100}) {
        s.step = step;
        save_checkpoint(s, dir);
    }
    const auto list = list_checkpoints(dir);
    REQUIRE(list.size() == 3);
    CHECK(list[0].filename() == "step2.ckpt");
    CHECK(list[1].filename() == "step10.ckpt");
    CHECK(list[2].filename() == "step100.ckpt");
}

TEST_CASE("RNG state serializes exactly", "[checkpoint]") {
    std::mt19937_64 a(99);
    for (int i = 0; i < 1234; ++i) a();
    auto b = rng_from_string(rng_to_string(a));
    for (int i = 0; i < 100; ++i) CHECK(a() == b());
    CHECK_THROWS_AS(rng_from_string("not a state"), FormatError);
}

TEST_CASE("adapter checkpoints round trip", "[checkpoint]") {
    const auto dir = test::scratch_dir("ckpt_adapter");
    const auto cfg = test::tiny_model();
    const auto params = build_model<float>(cfg, 1);
    LoraConfig lc;
    lc.rank = 4;
    lc.targets = {"q", "down"};
    auto ad = attach_adapters(params, lc, 5);
    for (auto& [host, pair] : ad.pairs) pair.b.fill(0.25f);
    save_adapter(ad, cfg, dir / "adapter.ckpt");
    const auto back = load_adapter(dir / "adapter.ckpt");
    CHECK(back.base == cfg);
    CHECK(back.adapters.config.rank == 4);
    CHECK(hash_tensors(back.adapters.as_tensors()) == hash_tensors(ad.as_tensors()));
    CHECK_THROWS_AS(load_checkpoint(dir / "adapter.ckpt", ResumeMode::Full), FormatError);
}

TEST_CASE("golden fixtures decode and re-encode identically", "[checkpoint][golden]") {
    const auto shard = test::read_file(test::fixtures_dir() / "golden_shard.bin");
    const std::vector<std::uint8_t> sb(shard.begin(), shard.end());
    CHECK(decode_shard(sb) == test::golden_shard_ids());
    CHECK(encode_shard(decode_shard(sb)) == sb);

    const auto ckpt = test::read_file(test::fixtures_dir() / "golden_checkpoint.ckpt");
    const std::vector<std::uint8_t> cb(ckpt.begin(), ckpt.end());
    CHECK(encode_checkpoint(test::golden_train_state()) == cb);
    const auto loaded = load_checkpoint(test::fixtures_dir() / "golden_checkpoint.ckpt", ResumeMode::Full);
    CHECK(encode_checkpoint(loaded) == cb);
}
