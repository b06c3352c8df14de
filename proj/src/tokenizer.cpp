// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/tokenizer.h"

#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "llf/error.h"
#include "unicode_tables.h"

namespace llf {

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

struct CodeUnit {
    char32_t cp;
    std::size_t begin;  // byte offset
    std::size_t end;
    bool valid;
};

// Decodes UTF-8; each byte of an invalid sequence becomes its own unit of class "other".
std::vector<CodeUnit> decode_utf8(std::string_view s) {
    std::vector<CodeUnit> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (c < 0x80) {
            len = 1;
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        }
        bool ok = len > 0 && i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) ok = false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (ok) {
            const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
            if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) ok = false;
        }
        if (ok) {
            out.push_back({cp, i, i + len, true});
            i += len;
        } else {
            out.push_back({0xFFFD, i, i + 1, false});
            i += 1;
        }
    }
    return out;
}

bool is_l(const CodeUnit& u) { return u.valid && unicode::is_letter(u.cp); }
bool is_n(const CodeUnit& u) { return u.valid && unicode::is_number(u.cp); }
bool is_s(const CodeUnit& u) { return u.valid && unicode::is_space(u.cp); }
bool is_other(const CodeUnit& u) { return !is_l(u) && !is_n(u) && !is_s(u); }

}  // namespace

std::vector<std::string> Tokenizer::pretokenize(std::string_view text) {
    // 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
    const auto units = decode_utf8(text);
    const std::size_t n = units.size();
    std::vector<std::string> pieces;
    auto emit = [&](std::size_t a, std::size_t b) {
        pieces.emplace_back(text.substr(units[a].begin, units[b - 1].end - units[a].begin));
    };
    auto cp_at = [&](std::size_t k) -> char32_t { return k < n && units[k].valid ? units[k].cp : 0; };

    std::size_t i = 0;
    while (i < n) {
        if (cp_at(i) == U'\'') {
            const char32_t c1 = cp_at(i + 1), c2 = cp_at(i + 2);
            std::size_t len = 0;
            if (c1 == U's' || c1 == U't' || c1 == U'm' || c1 == U'd') len = 2;
            else if ((c1 == U'r' || c1 == U'v') && c2 == U'e') len = 3;
            else if (c1 == U'l' && c2 == U'l') len = 3;
            if (len) {
                emit(i, i + len);
                i += len;
                continue;
            }
        }
        const std::size_t j0 = cp_at(i) == U' ' ? i + 1 : i;
        if (j0 < n) {
            bool (*cls)(const CodeUnit&) = nullptr;
            if (is_l(units[j0])) cls = is_l;
            else if (is_n(units[j0])) cls = is_n;
            else if (is_other(units[j0])) cls = is_other;
            if (cls) {
                std::size_t j = j0;
                while (j < n && cls(units[j])) ++j;
                emit(i, j);
                i = j;
                continue;
            }
        }
        // Whitespace run starting at i.
        std::size_t j = i;
        while (j < n && is_s(units[j])) ++j;
        if (j == n || j - i == 1) {
            emit(i, j);  // \s+(?!\S) at end of text, or the plain \s+ fallback
            i = j;
        } else {
            emit(i, j - 1);  // leave the last space to prefix the next piece
            i = j - 1;
        }
    }
    return pieces;
}

Tokenizer Tokenizer::load(const std::filesystem::path& vocab_json, const std::filesystem::path& merges_txt,
                          std::optional<std::size_t> expected_vocab) {
    Tokenizer tk;

    // GPT-2 byte-to-unicode table: printable bytes map to themselves, the rest to 256+n.
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[static_cast<std::size_t>(b)] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[static_cast<std::size_t>(b)] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[static_cast<std::size_t>(b)] = true;
    char32_t next = 256;
    for (std::size_t b = 0; b < 256; ++b) {
        const char32_t cp = direct[b] ? static_cast<char32_t>(b) : next++;
        append_utf8(tk.mByteToUnicode[b], cp);
        tk.mUnicodeToByte.emplace(cp, static_cast<std::uint8_t>(b));
    }

    std::ifstream vf(vocab_json, std::ios::binary);
    if (!vf) throw FormatError("cannot open vocab file " + vocab_json.string());
    nlohmann::json vj;
    try {
        vj = nlohmann::json::parse(vf);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("vocab file " + vocab_json.string() + " is not valid JSON: " + e.what());
    }
    if (!vj.is_object()) throw FormatError("vocab file must hold a JSON object of token -> id");
    tk.mIdToToken.assign(vj.size(), std::string());
    std::vector<bool> filled(vj.size(), false);
    for (const auto& [tok, idv] : vj.items()) {
        if (!idv.is_number_integer()) throw FormatError("vocab entry '" + tok + "' has a non-integer id");
        const auto id = idv.get<std::int64_t>();
        if (id < 0 || static_cast<std::size_t>(id) >= vj.size() || filled[static_cast<std::size_t>(id)]) {
            throw FormatError("vocab ids must be a permutation of 0..size-1; bad id " + std::to_string(id));
        }
        filled[static_cast<std::size_t>(id)] = true;
        tk.mIdToToken[static_cast<std::size_t>(id)] = tok;
        tk.mVocab.emplace(tok, static_cast<std::int32_t>(id));
    }
    if (expected_vocab && tk.mIdToToken.size() != *expected_vocab) {
        throw FormatError("vocab size " + std::to_string(tk.mIdToToken.size()) + " != expected " +
                          std::to_string(*expected_vocab));
    }
    auto eot = tk.mVocab.find(std::string(kEndOfText));
    if (eot == tk.mVocab.end()) throw FormatError("vocab has no <|endoftext|> token");
    tk.mEotId = eot->second;

    std::ifstream mf(merges_txt, std::ios::binary);
    if (!mf) throw FormatError("cannot open merges file " + merges_txt.string());
    std::string line;
    std::size_t lineno = 0;
    std::int32_t rank = 0;
    while (std::getline(mf, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.starts_with("#version")) continue;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<std::string> fields;
        for (std::string f; ss >> f;) fields.push_back(f);
        if (fields.size() != 2) {
            throw FormatError("merges file " + merges_txt.string() + " line " + std::to_string(lineno) +
                              ": expected 2 fields, got " + std::to_string(fields.size()));
        }
        if (!tk.mMergeRanks.emplace(fields[0] + ' ' + fields[1], rank).second) {
            throw FormatError("merges file " + merges_txt.string() + " line " + std::to_string(lineno) +
                              ": duplicate merge '" + line + "'");
        }
        ++rank;
    }
    return tk;
}

void Tokenizer::bpe(std::string_view piece, std::vector<std::int32_t>& out) const {
    std::vector<std::string> word;
    word.reserve(piece.size());
    for (char c : piece) word.push_back(mByteToUnicode[static_cast<unsigned char>(c)]);

    std::string key;
    while (word.size() > 1) {
        std::int32_t best = std::numeric_limits<std::int32_t>::max();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            key.assign(word[i]).append(1, ' ').append(word[i + 1]);
            auto it = mMergeRanks.find(key);
            if (it != mMergeRanks.end() && it->second < best) {
                best = it->second;
                best_i = i;
            }
        }
        if (best == std::numeric_limits<std::int32_t>::max()) break;
        const std::string left = word[best_i], right = word[best_i + 1];
        std::vector<std::string> merged;
        merged.reserve(word.size());
        for (std::size_t i = 0; i < word.size();) {
            if (i + 1 < word.size() && word[i] == left && word[i + 1] == right) {
                merged.push_back(left + right);
                i += 2;
            } else {
                merged.push_back(std::move(word[i]));
                i += 1;
            }
        }
        word = std::move(merged);
    }
    for (const auto& sym : word) {
        auto it = mVocab.find(sym);
        if (it == mVocab.end()) throw FormatError("BPE symbol '" + sym + "' is missing from the vocab");
        out.push_back(it->second);
    }
}

std::vector<std::int32_t> Tokenizer::encode(std::string_view text) const {
    std::vector<std::int32_t> ids;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t hit = text.find(kEndOfText, pos);
        const std::string_view chunk = text.substr(pos, hit == std::string_view::npos ? std::string_view::npos : hit - pos);
        for (const auto& piece : pretokenize(chunk)) bpe(piece, ids);
        if (hit == std::string_view::npos) break;
        ids.push_back(mEotId);
        pos = hit + kEndOfText.size();
    }
    return ids;
}

std::vector<std::string> Tokenizer::encode_pieces(std::string_view text) const {
    std::vector<std::string> out;
    for (std::int32_t id : encode(text)) out.push_back(token_string(id));
    return out;
}

std::string Tokenizer::decode(std::span<const std::int32_t> ids) const {
    std::string out;
    for (std::int32_t id : ids) {
        const std::string& tok = token_string(id);
        for (const auto& u : decode_utf8(tok)) {
            auto it = mUnicodeToByte.find(u.cp);
            if (!u.valid || it == mUnicodeToByte.end()) {
                throw FormatError("token " + std::to_string(id) + " holds a character outside the byte alphabet");
            }
            out += static_cast<char>(it->second);
        }
    }
    return out;
}

std::optional<std::int32_t> Tokenizer::token_id(std::string_view token) const {
    auto it = mVocab.find(std::string(token));
    if (it == mVocab.end()) return std::nullopt;
    return it->second;
}

const std::string& Tokenizer::token_string(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= mIdToToken.size()) {
        throw FormatError("token id " + std::to_string(id) + " out of range for vocab " +
                          std::to_string(mIdToToken.size()));
    }
    return mIdToToken[static_cast<std::size_t>(id)];
}

}  // namespace llf
