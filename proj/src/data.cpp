// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/data.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "llf/error.h"
#include "llf/tokenizer.h"

namespace llf {

namespace fs = std::filesystem;

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

std::size_t dtype_width(ShardDtype d) { return d == ShardDtype::U16 ? 2 : 4; }

std::string hex_bytes(const std::uint8_t* p, std::size_t n) {
    std::ostringstream os;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) os << ' ';
        os << std::hex << std::uppercase << std::setw(2) << std::setfill('0') << int(p[i]);
    }
    return os.str();
}

ShardHeader parse_header(std::span<const std::uint8_t> bytes, const std::string& origin) {
    if (bytes.size() < kShardHeaderBytes) {
        throw FormatError(origin + ": truncated shard header (" + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(kShardHeaderBytes) + ")");
    }
    if (std::memcmp(bytes.data(), kShardMagic, 4) != 0) {
        throw FormatError(origin + ": bad shard magic: expected 44 4D 53 4C (\"DMSL\"), got " +
                          hex_bytes(bytes.data(), 4));
    }
    ShardHeader h;
    h.version = get_le<std::uint32_t>(bytes.data() + 4);
    if (h.version != kShardVersion) {
        throw FormatError(origin + ": unsupported shard version " + std::to_string(h.version));
    }
    const std::uint8_t code = bytes[8];
    if (code != 1 && code != 2) throw FormatError(origin + ": unknown shard dtype code " + std::to_string(code));
    h.dtype = static_cast<ShardDtype>(code);
    h.token_count = get_le<std::uint64_t>(bytes.data() + 9);
    return h;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> buf(size);
    if (size && !in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size))) {
        throw FormatError("failed reading " + path.string());
    }
    return buf;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing " + path.string());
}

std::string shard_name(const std::string& prefix, std::size_t index) {
    std::ostringstream os;
    os << prefix << '_' << std::setw(6) << std::setfill('0') << index << ".bin";
    return os.str();
}

std::vector<fs::path> write_split(const std::vector<std::int32_t>& stream, const std::string& prefix,
                                  const TokenizeOptions& options, const fs::path& out_dir) {
    std::vector<fs::path> out;
    for (std::size_t start = 0, k = 0; start < stream.size(); start += options.shard_size, ++k) {
        const std::size_t n = std::min(options.shard_size, stream.size() - start);
        auto path = out_dir / shard_name(prefix, k);
        write_shard(std::span(stream).subspan(start, n), path, options.dtype);
        out.push_back(std::move(path));
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_shard(std::span<const std::int32_t> ids, ShardDtype dtype) {
    const std::uint64_t limit = dtype == ShardDtype::U16 ? 65536ull : 4294967296ull;
    std::vector<std::uint8_t> out;
    out.reserve(kShardHeaderBytes + ids.size() * dtype_width(dtype));
    out.insert(out.end(), kShardMagic, kShardMagic + 4);
    put_le<std::uint32_t>(out, kShardVersion);
    out.push_back(static_cast<std::uint8_t>(dtype));
    put_le<std::uint64_t>(out, ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::int32_t id = ids[i];
        if (id < 0 || static_cast<std::uint64_t>(id) >= limit) {
            throw FormatError("token id " + std::to_string(id) + " at position " + std::to_string(i) +
                              " does not fit shard dtype " + std::to_string(int(dtype)));
        }
        if (dtype == ShardDtype::U16) put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id));
        else put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id));
    }
    return out;
}

std::vector<std::int32_t> decode_shard(std::span<const std::uint8_t> bytes, const std::string& origin) {
    const ShardHeader h = parse_header(bytes, origin);
    const std::size_t width = dtype_width(h.dtype);
    const std::uint64_t payload = bytes.size() - kShardHeaderBytes;
    if (payload != h.token_count * width) {
        throw FormatError(origin + ": payload is " + std::to_string(payload) + " bytes but header declares " +
                          std::to_string(h.token_count) + " tokens of " + std::to_string(width) + " bytes" +
                          (payload < h.token_count * width ? " (truncated)" : " (trailing bytes)"));
    }
    std::vector<std::int32_t> ids(h.token_count);
    const std::uint8_t* p = bytes.data() + kShardHeaderBytes;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (h.dtype == ShardDtype::U16) {
            ids[i] = get_le<std::uint16_t>(p + 2 * i);
        } else {
            const std::uint32_t v = get_le<std::uint32_t>(p + 4 * i);
            if (v > static_cast<std::uint32_t>(INT32_MAX)) throw FormatError(origin + ": token id out of range");
            ids[i] = static_cast<std::int32_t>(v);
        }
    }
    return ids;
}

void write_shard(std::span<const std::int32_t> ids, const fs::path& path, ShardDtype dtype) {
    write_file(path, encode_shard(ids, dtype));
}

std::vector<std::int32_t> read_shard(const fs::path& path) {
    const auto bytes = read_file(path);
    return decode_shard(bytes, path.string());
}

ShardHeader read_shard_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> buf(kShardHeaderBytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    buf.resize(static_cast<std::size_t>(in.gcount()));
    return parse_header(buf, path.string());
}

std::vector<std::string> read_documents(const std::vector<fs::path>& inputs) {
    if (inputs.empty()) throw ConfigError("no input files given");
    std::vector<std::string> docs;
    for (const auto& path : inputs) {
        const auto bytes = read_file(path);
        std::string text(bytes.begin(), bytes.end());
        if (path.extension() != ".jsonl") {
            if (!text.empty()) docs.push_back(std::move(text));
            continue;
        }
        std::istringstream lines(text);
        std::string line;
        for (std::size_t lineno = 1; std::getline(lines, line); ++lineno) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing string field 'text'");
            }
            auto doc = j["text"].get<std::string>();
            if (!doc.empty()) docs.push_back(std::move(doc));
        }
    }
    return docs;
}

TokenizeResult tokenize_corpus(const std::vector<std::string>& documents, const Tokenizer& tokenizer,
                               const TokenizeOptions& options, const fs::path& out_dir) {
    if (documents.empty()) throw ConfigError("empty input: no documents to tokenize");
    if (options.shard_size == 0) throw ConfigError("shard_size must be positive");
    if (!(options.val_fraction >= 0.0 && options.val_fraction < 1.0)) {
        throw ConfigError("val_fraction must be in [0, 1)");
    }
    std::size_t n_val = static_cast<std::size_t>(std::floor(options.val_fraction * double(documents.size())));
    if (options.val_fraction > 0.0 && n_val == 0 && documents.size() >= 2) n_val = 1;
    const std::size_t n_train = documents.size() - n_val;

    std::vector<std::int32_t> train, val;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        auto& dst = i < n_train ? train : val;
        const auto ids = tokenizer.encode(documents[i]);
        dst.insert(dst.end(), ids.begin(), ids.end());
        dst.push_back(tokenizer.eot_id());
    }
    fs::create_directories(out_dir);
    TokenizeResult r;
    r.documents = documents.size();
    r.train_tokens = train.size();
    r.val_tokens = val.size();
    r.train_shards = write_split(train, "train", options, out_dir);
    r.val_shards = write_split(val, "val", options, out_dir);
    return r;
}

std::vector<fs::path> list_shards(const fs::path& dir, const std::string& prefix) {
    if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.starts_with(prefix + "_") && name.ends_with(".bin")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

nlohmann::json CorpusCursor::to_json() const { return {{"shard", shard}, {"offset", offset}, {"epoch", epoch}}; }

CorpusCursor CorpusCursor::from_json(const nlohmann::json& j) {
    try {
        return {j.at("shard").get<std::uint64_t>(), j.at("offset").get<std::uint64_t>(),
                j.at("epoch").get<std::uint64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad corpus cursor: ") + e.what());
    }
}

Corpus::Corpus(std::vector<std::vector<std::int32_t>> shards, std::optional<std::uint64_t> shuffle_seed)
    : mShards(std::move(shards)), mShuffleSeed(shuffle_seed) {
    for (const auto& s : mShards) {
        if (s.empty()) throw FormatError("empty shard in corpus");
        mTotal += s.size();
    }
}

Corpus Corpus::from_tokens(std::vector<std::int32_t> tokens) {
    std::vector<std::vector<std::int32_t>> shards;
    shards.push_back(std::move(tokens));
    return Corpus(std::move(shards));
}

Corpus Corpus::open(const std::vector<fs::path>& paths, std::optional<std::int64_t> vocab_size,
                    std::optional<std::uint64_t> shuffle_seed) {
    if (paths.empty()) throw ConfigError("corpus has no shards");
    std::vector<std::vector<std::int32_t>> shards;
    for (const auto& p : paths) {
        auto ids = read_shard(p);
        if (vocab_size) {
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (ids[i] >= *vocab_size) {
                    throw FormatError(p.string() + ": token id " + std::to_string(ids[i]) + " at position " +
                                      std::to_string(i) + " >= vocab size " + std::to_string(*vocab_size));
                }
            }
        }
        shards.push_back(std::move(ids));
    }
    return Corpus(std::move(shards), shuffle_seed);
}

std::vector<std::size_t> Corpus::epoch_order(std::uint64_t epoch) const {
    std::vector<std::size_t> order(mShards.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (mShuffleSeed) {
        std::mt19937_64 rng(*mShuffleSeed ^ (0x9E3779B97F4A7C15ull * (epoch + 1)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }
    }
    return order;
}

void Corpus::normalize(CorpusCursor& c, const std::vector<std::size_t>& order) const {
    while (c.shard < order.size() && c.offset >= mShards[order[c.shard]].size()) {
        c.offset -= mShards[order[c.shard]].size();
        ++c.shard;
    }
    if (c.shard >= order.size()) c = {0, 0, c.epoch + 1};
}

Batch Corpus::next_batch(CorpusCursor& cursor, std::size_t B, std::size_t T) const {
    if (B == 0 || T == 0) throw ConfigError("batch size and sequence length must be positive");
    if (mShards.empty()) throw ConfigError("corpus is empty");
    if (T + 1 > mTotal) {
        throw ConfigError("sequence length " + std::to_string(T) + " needs " + std::to_string(T + 1) +
                          " tokens but the corpus has " + std::to_string(mTotal));
    }
    auto order = epoch_order(cursor.epoch);
    if (cursor.shard >= order.size() || cursor.offset >= mShards[order[cursor.shard]].size()) {
        throw ConfigError("corpus cursor out of range (shard " + std::to_string(cursor.shard) + ", offset " +
                          std::to_string(cursor.offset) + ")");
    }
    Batch batch;
    batch.inputs = TokenBatch(B, T, std::vector<std::int32_t>(B * T));
    batch.targets.resize(B * T);
    std::vector<std::int32_t> window(T + 1);
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t consumed = 0;
        for (std::size_t s = 0; s < cursor.shard; ++s) consumed += mShards[order[s]].size();
        consumed += cursor.offset;
        if (mTotal - consumed < T + 1) {
            cursor = {0, 0, cursor.epoch + 1};
            order = epoch_order(cursor.epoch);
        }
        std::size_t filled = 0;
        while (filled < T + 1) {
            const auto& shard = mShards[order[cursor.shard]];
            const std::size_t take = std::min(T + 1 - filled, shard.size() - cursor.offset);
            std::copy_n(shard.begin() + static_cast<std::ptrdiff_t>(cursor.offset), take, window.begin() + filled);
            filled += take;
            cursor.offset += take;
            const std::uint64_t epoch = cursor.epoch;
            normalize(cursor, order);
            if (cursor.epoch != epoch) order = epoch_order(cursor.epoch);
        }
        std::copy_n(window.begin(), T, batch.inputs.ids.begin() + b * T);
        std::copy_n(window.begin() + 1, T, batch.targets.begin() + b * T);
    }
    return batch;
}

}  // namespace llf
