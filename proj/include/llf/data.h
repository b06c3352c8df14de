// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Token shards and the streaming batch sampler.
//
// Shard layout (little-endian):
//   "DMSL" | u32 version = 1 | u8 dtype (1 = u16, 2 = u32) | u64 token_count | payload

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llf/model.h"

namespace llf {

class Tokenizer;

enum class ShardDtype : std::uint8_t { U16 = 1, U32 = 2 };

inline constexpr char kShardMagic[4] = {'D', 'M', 'S', 'L'};
inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kShardHeaderBytes = 17;

struct ShardHeader {
    std::uint32_t version = kShardVersion;
    ShardDtype dtype = ShardDtype::U16;
    std::uint64_t token_count = 0;
};

/// Serialized shard bytes. Throws FormatError if an id does not fit the dtype.
std::vector<std::uint8_t> encode_shard(std::span<const std::int32_t> ids, ShardDtype dtype = ShardDtype::U16);
std::vector<std::int32_t> decode_shard(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

void write_shard(std::span<const std::int32_t> ids, const std::filesystem::path& path,
                 ShardDtype dtype = ShardDtype::U16);
std::vector<std::int32_t> read_shard(const std::filesystem::path& path);
ShardHeader read_shard_header(const std::filesystem::path& path);

struct TokenizeOptions {
    std::size_t shard_size = std::size_t{1} << 24;
    /// Fraction of documents (taken from the end) written to validation shards.
    double val_fraction = 0.01;
    ShardDtype dtype = ShardDtype::U16;
};

struct TokenizeResult {
    std::vector<std::filesystem::path> train_shards;
    std::vector<std::filesystem::path> val_shards;
    std::size_t documents = 0;
    std::size_t train_tokens = 0;
    std::size_t val_tokens = 0;
};

/// Reads documents: a `.jsonl` file yields one document per line (field `text`); any other file
/// is one UTF-8 document.
std::vector<std::string> read_documents(const std::vector<std::filesystem::path>& inputs);

/// Encodes each document, appends the end-of-text id, concatenates, and writes
/// train_NNNNNN.bin / val_NNNNNN.bin shards of at most shard_size tokens into out_dir.
TokenizeResult tokenize_corpus(const std::vector<std::string>& documents, const Tokenizer& tokenizer,
                               const TokenizeOptions& options, const std::filesystem::path& out_dir);

/// Lists `<prefix>_*.bin` shards in a directory, sorted by name.
std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir, const std::string& prefix);

struct CorpusCursor {
    std::uint64_t shard = 0;   // position in the epoch's shard order
    std::uint64_t offset = 0;  // token offset inside that shard
    std::uint64_t epoch = 0;

    nlohmann::json to_json() const;
    static CorpusCursor from_json(const nlohmann::json& j);
    bool operator==(const CorpusCursor&) const = default;
};

struct Batch {
    TokenBatch inputs;
    std::vector<std::int32_t> targets;
};

/// In-memory token stream made of one or more shards. Read-only after construction.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<std::vector<std::int32_t>> shards, std::optional<std::uint64_t> shuffle_seed = {});

    static Corpus from_tokens(std::vector<std::int32_t> tokens);
    /// Loads shards; with `vocab_size` set every id is range-checked.
    static Corpus open(const std::vector<std::filesystem::path>& paths, std::optional<std::int64_t> vocab_size = {},
                       std::optional<std::uint64_t> shuffle_seed = {});

    /// B windows of T+1 consecutive tokens in stream order; targets are inputs shifted by one.
    /// The cursor advances by B·(T+1). When fewer than T+1 tokens remain in the epoch the
    /// stream wraps to the start of the next epoch.
    Batch next_batch(CorpusCursor& cursor, std::size_t B, std::size_t T) const;

    std::size_t total_tokens() const { return mTotal; }
    std::size_t shard_count() const { return mShards.size(); }

private:
    std::vector<std::size_t> epoch_order(std::uint64_t epoch) const;
    void normalize(CorpusCursor& c, const std::vector<std::size_t>& order) const;

    std::vector<std::vector<std::int32_t>> mShards;
    std::optional<std::uint64_t> mShuffleSeed;
    std::size_t mTotal = 0;
};

}  // namespace llf
