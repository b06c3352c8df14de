// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Byte-level BPE compatible with the GPT-2 vocab.json / merges.txt pair.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace llf {

inline constexpr std::string_view kEndOfText = "<|endoftext|>";
inline constexpr std::size_t kGpt2VocabSize = 50257;

class Tokenizer {
public:
    /// Loads vocab.json and merges.txt. When `expected_vocab` is set the vocab size must match.
    /// Throws FormatError for malformed files (naming the offending merges line), a missing
    /// end-of-text token, duplicate merges or a size mismatch.
    static Tokenizer load(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt,
                          std::optional<std::size_t> expected_vocab = kGpt2VocabSize);

    /// Pre-tokenizes with the GPT-2 splitter and applies lowest-rank merges per piece.
    /// The literal "<|endoftext|>" becomes the single end-of-text id.
    std::vector<std::int32_t> encode(std::string_view text) const;

    /// Token strings (byte-to-unicode alphabet, e.g. "Ġ" for a leading space) for `text`.
    std::vector<std::string> encode_pieces(std::string_view text) const;

    /// Throws FormatError for ids outside the vocabulary.
    std::string decode(std::span<const std::int32_t> ids) const;

    std::size_t vocab_size() const { return mIdToToken.size(); }
    std::int32_t eot_id() const { return mEotId; }
    std::optional<std::int32_t> token_id(std::string_view token) const;
    const std::string& token_string(std::int32_t id) const;
    std::size_t merge_count() const { return mMergeRanks.size(); }

    /// Splits text into pre-token pieces the way the GPT-2 regex does.
    static std::vector<std::string> pretokenize(std::string_view text);

private:
    void bpe(std::string_view piece, std::vector<std::int32_t>& out) const;

    std::array<std::string, 256> mByteToUnicode;
    std::unordered_map<char32_t, std::uint8_t> mUnicodeToByte;
    std::unordered_map<std::string, std::int32_t> mVocab;
    std::vector<std::string> mIdToToken;
    std::unordered_map<std::string, std::int32_t> mMergeRanks;  // key: left + ' ' + right
    std::int32_t mEotId = -1;
};

}  // namespace llf
