// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "llf/error.h"
#include "llf/tokenizer.h"
#include "test_support.h"

using namespace llf;

namespace {

const Tokenizer& gpt2() {
    static const Tokenizer tok =
        Tokenizer::load(test::data_dir() / "gpt2" / "vocab.json", test::data_dir() / "gpt2" / "merges.txt");
    return tok;
}

}  // namespace

TEST_CASE("reference vocabulary loads", "[tokenizer]") {
    CHECK(gpt2().vocab_size() == 50257);
    CHECK(gpt2().eot_id() == 50256);
    CHECK(gpt2().merge_count() == 50000);
    CHECK(gpt2().encode("<|endoftext|>") == std::vector<std::int32_t>{50256});
}

TEST_CASE("chat-template token fixtures", "[tokenizer]") {
    using V = std::vector<std::string>;
    CHECK(gpt2().encode_pieces("ASSISTANT:") == V{"ASS", "IST", "ANT", ":"});
    CHECK(gpt2().encode_pieces("ASSISTANT: ") == V{"ASS", "IST", "ANT", ":", "\xC4\xA0"});
    CHECK(gpt2().encode_pieces(" Berlin") == V{"\xC4\xA0" "Berlin"});
    CHECK(gpt2().encode("").empty());
}

TEST_CASE("golden encodings", "[tokenizer]") {
    std::ifstream in(test::fixtures_dir() / "tokenizer_golden.json");
    REQUIRE(in);
    const auto cases = nlohmann::json::parse(in);
    REQUIRE(cases.size() >= 200);
    for (const auto& c : cases) {
        const std::string text = c.at("text");
        INFO("text: " << text);
        CHECK(gpt2().encode(text) == c.at("ids").get<std::vector<std::int32_t>>());
        CHECK(gpt2().encode_pieces(text) == c.at("pieces").get<std::vector<std::string>>());
        CHECK(gpt2().decode(gpt2().encode(text)) == text);
    }
}

TEST_CASE("UTF-8 round trip over 1000 generated strings", "[tokenizer][property]") {
    std::mt19937_64 rng(2026);
    for (int i = 0; i < 1000; ++i) {
        const std::string s = test::random_utf8(rng);
        const auto ids = gpt2().encode(s);
        INFO("case " << i);
        REQUIRE(gpt2().decode(ids) == s);
    }
}

TEST_CASE("trailing space is representational, not lossy", "[tokenizer]") {
    const auto a = gpt2().encode("x ");
    const auto b = gpt2().encode("x");
    CHECK(gpt2().decode(a) == "x ");
    CHECK(gpt2().decode(b) == "x");
    CHECK(a.size() == b.size() + 1);
}

TEST_CASE("encoding is position independent per piece", "[tokenizer]") {
    const std::string text = "Hello world, it's 2026! Tokenize  this\tplease.";
    std::vector<std::int32_t> joined;
    for (const auto& piece : Tokenizer::pretokenize(text)) {
        const auto ids = gpt2().encode(piece);
        joined.insert(joined.end(), ids.begin(), ids.end());
    }
    CHECK(joined == gpt2().encode(text));
    CHECK(gpt2().encode(text) == gpt2().encode(text));
}

TEST_CASE("decode rejects out-of-range ids", "[tokenizer]") {
    const std::int32_t bad[] = {50257};
    CHECK_THROWS_AS(gpt2().decode(bad), FormatError);
}

TEST_CASE("malformed merges file names the line", "[tokenizer]") {
    const auto dir = test::scratch_dir("tokenizer_bad_merges");
    std::ofstream(dir / "vocab.json") << R"({"a": 0, "b": 1, "ab": 2, "<|endoftext|>": 3})";
    std::ofstream(dir / "merges.txt") << "#version: 0.2\na b\na b c\n";
    try {
        Tokenizer::load(dir / "vocab.json", dir / "merges.txt", std::nullopt);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::ofstream(dir / "merges.txt") << "#version: 0.2\na b\n";
    CHECK_THROWS_AS(Tokenizer::load(dir / "vocab.json", dir / "merges.txt"), FormatError);  // size != 50257
    CHECK_NOTHROW(Tokenizer::load(dir / "vocab.json", dir / "merges.txt", std::nullopt));
}
