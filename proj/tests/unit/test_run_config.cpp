// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>

#include "llf/error.h"
#include "llf/run_config.h"
#include "test_support.h"

using namespace llf;
using nlohmann::json;

TEST_CASE("defaults describe the 1716M run", "[config]") {
    const auto eff = resolve_run_config(std::nullopt);
    CHECK(eff.config.model == ModelConfig::paper_1716m());
    CHECK(eff.config.batch == 16);
    CHECK(eff.config.seq == 1024);
    CHECK(eff.config.accum == 32);
    CHECK(eff.config.tokens_per_step() == 16u * 1024u * 32u);
    CHECK(eff.config.schedule.peak_lr == 6e-4);
    CHECK(eff.provenance.at("model").at("hidden_size") == "default");
    CHECK(eff.provenance.at("schedule").at("warmup_steps") == "default");
    CHECK(is_huge(eff.config.model));
    CHECK_FALSE(is_huge(test::tiny_model()));
}

TEST_CASE("file and flag layers with provenance", "[config]") {
    const auto dir = test::scratch_dir("run_config");
    std::ofstream(dir / "c.json") << R"({"batch": 4, "schedule": {"peak_lr": 1e-3}, "model": {"n_layers": 2}})";
    json flags = json::object();
    set_override(flags, "schedule.peak_lr", 2e-3);
    set_override(flags, "seed", 9);
    const auto eff = resolve_run_config(dir / "c.json", flags);
    CHECK(eff.config.batch == 4);
    CHECK(eff.config.schedule.peak_lr == 2e-3);
    CHECK(eff.config.model.n_layers == 2);
    CHECK(eff.config.seed == 9);
    CHECK(eff.provenance.at("batch") == "file");
    CHECK(eff.provenance.at("schedule").at("peak_lr") == "flag");
    CHECK(eff.provenance.at("seed") == "flag");
    CHECK(eff.provenance.at("model").at("n_layers") == "file");
    CHECK(eff.provenance.at("accum") == "default");

    // The echoed JSON resolves to the same config.
    const auto again = resolve_run_config_json(eff.json);
    CHECK(again.json == eff.json);
}

TEST_CASE("configuration errors", "[config]") {
    const auto dir = test::scratch_dir("run_config_errors");
    CHECK_THROWS_AS(resolve_run_config_json(json{{"bacth", 4}}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config_json(json{{"model", {{"hidden", 4}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config_json(json{{"batch", "four"}}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config_json(json{{"batch", 0}}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config_json(json{{"seq", 4096}}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config_json(json{{"precision", "f16"}}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config_json(json{{"model", {{"n_heads", 7}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_run_config(dir / "missing.json"), ConfigError);
    std::ofstream(dir / "bad.json") << "{\"batch\": 4,,}";
    try {
        resolve_run_config(dir / "bad.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
    try {
        resolve_run_config_json(json{{"data", {{"shard_sise", 1}}}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("data.shard_sise") != std::string::npos);
    }
}

TEST_CASE("LoRA and SFT sections", "[config]") {
    const auto eff = resolve_run_config_json(json{{"lora", {{"rank", 8}, {"alpha", 16}}}, {"sft", {{"steps", 10}}}});
    REQUIRE(eff.config.lora.has_value());
    CHECK(eff.config.lora->rank == 8);
    CHECK(eff.config.sft.steps == 10);
    CHECK_THROWS_AS(resolve_run_config_json(json{{"sft", {{"steps", 3}, {"warmup_steps", 5}}}}), ConfigError);
    CHECK(RunConfig::from_json(eff.json).to_json() == eff.json);
}

TEST_CASE("thread cap from the environment", "[config]") {
    ::unsetenv("LLF_THREADS");
    CHECK(thread_cap() == 1);
    ::setenv("LLF_THREADS", "3", 1);
    CHECK(thread_cap() == 3);
    ::setenv("LLF_THREADS", "zero", 1);
    CHECK_THROWS_AS(thread_cap(), ConfigError);
    ::setenv("LLF_THREADS", "0", 1);
    CHECK_THROWS_AS(thread_cap(), ConfigError);
    ::unsetenv("LLF_THREADS");
}

TEST_CASE("shipped configs resolve", "[config]") {
    const auto configs = test::data_dir().parent_path() / "configs";
    const auto full = resolve_run_config(configs / "paper-1716m.json");
    CHECK(full.config.model == ModelConfig::paper_1716m());
    CHECK(count_parameters(full.config.model) == 1'715'951'616ULL);
    CHECK(full.config.tokens_per_step() == 524'288u);
    const auto tiny = resolve_run_config(configs / "tiny.json");
    CHECK_FALSE(is_huge(tiny.config.model));
    CHECK(tiny.provenance.at("optimizer").at("beta2") == "default");
}
