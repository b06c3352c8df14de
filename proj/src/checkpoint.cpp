// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/checkpoint.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include "llf/error.h"

namespace llf {

namespace fs = std::filesystem;

namespace {

constexpr const char* kAdamM = ".adam_m";
constexpr const char* kAdamV = ".adam_v";

std::vector<std::uint8_t> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> buf(size);
    if (size && !in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size))) {
        throw FormatError("failed reading " + path.string());
    }
    return buf;
}

std::uint64_t read_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}

nlohmann::json parse_header(const std::uint8_t* data, std::size_t size, const std::string& origin,
                            std::uint64_t* header_len_out) {
    if (size < 8) throw FormatError(origin + ": truncated checkpoint (no header length)");
    const std::uint64_t len = read_u64(data);
    if (len > size - 8) {
        throw FormatError(origin + ": truncated checkpoint header (declares " + std::to_string(len) + " bytes, " +
                          std::to_string(size - 8) + " available)");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(data + 8, data + 8 + len);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(origin + ": malformed checkpoint header: " + e.what());
    }
    if (!header.is_object()) throw FormatError(origin + ": checkpoint header is not an object");
    if (!header.contains(kMetaKey) || !header[kMetaKey].is_object()) {
        throw FormatError(origin + ": checkpoint header has no " + std::string(kMetaKey) + " block");
    }
    const auto& meta = header[kMetaKey];
    if (!meta.contains("format_version") || !meta["format_version"].is_number_integer()) {
        throw FormatError(origin + ": checkpoint meta lacks format_version");
    }
    const auto version = meta["format_version"].get<std::int64_t>();
    if (version != kCheckpointVersion) {
        throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    if (header_len_out) *header_len_out = len;
    return header;
}

void write_all(const fs::path& path, const std::vector<std::uint8_t>& bytes, std::optional<std::size_t> fail_after) {
    const fs::path tmp = path.string() + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        std::size_t n = bytes.size();
        if (fail_after) n = std::min(n, *fail_after);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(n));
        out.flush();
        if (!out) throw FormatError("failed writing " + tmp.string());
        if (fail_after && *fail_after < bytes.size()) {
            throw FormatError("checkpoint write interrupted after " + std::to_string(n) + " bytes");
        }
    }
    fs::rename(tmp, path);
}

template <typename T>
nlohmann::json state_meta(const TrainState<T>& s, const char* compute_dtype) {
    nlohmann::json meta = {
        {"format_version", kCheckpointVersion},
        {"kind", "train_state"},
        {"step", s.step},
        {"schedule_offset", s.schedule_offset},
        {"schedule", s.schedule.to_json()},
        {"optimizer", s.optimizer.to_json()},
        {"optim_step_count", s.optim.step_count},
        {"cursor", s.cursor.to_json()},
        {"rng", rng_to_string(s.rng)},
        {"model", s.model.to_json()},
        {"compute_dtype", compute_dtype},
    };
    if (!s.run_config.is_null()) meta["run_config"] = s.run_config;
    return meta;
}

template <typename T>
TensorMap<float> state_tensors(const TrainState<T>& s) {
    TensorMap<float> out;
    for (const auto& [name, p] : s.params) {
        out.emplace(name, p.template cast<float>());
        const auto im = s.optim.m.find(name);
        const auto iv = s.optim.v.find(name);
        if (im == s.optim.m.end() || iv == s.optim.v.end()) {
            throw ConfigError("optimizer state missing for '" + name + "'");
        }
        out.emplace(name + kAdamM, im->second.template cast<float>());
        out.emplace(name + kAdamV, iv->second.template cast<float>());
    }
    return out;
}

template <typename J>
J meta_get(const nlohmann::json& meta, const char* key, const std::string& origin) {
    if (!meta.contains(key)) throw FormatError(origin + ": checkpoint meta lacks '" + key + "'");
    try {
        return meta[key].get<J>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(origin + ": checkpoint meta '" + key + "': " + e.what());
    }
}

}  // namespace

template <typename T>
TrainState<T> TrainState<T>::fresh(const ModelConfig& cfg, std::uint64_t seed, const ScheduleConfig& sched,
                                   const AdamWConfig& opt) {
    TrainState<T> s;
    s.model = cfg;
    s.params = build_model<T>(cfg, seed);
    s.optim = OptimState<T>::zeros_for(s.params);
    s.schedule = sched;
    s.optimizer = opt;
    s.rng.seed(seed ^ 0x5DEECE66DULL);
    return s;
}

template <typename T, typename U>
TrainState<U> cast_state(const TrainState<T>& s) {
    TrainState<U> out;
    out.model = s.model;
    out.params = cast_map<T, U>(s.params);
    out.optim.m = cast_map<T, U>(s.optim.m);
    out.optim.v = cast_map<T, U>(s.optim.v);
    out.optim.step_count = s.optim.step_count;
    out.step = s.step;
    out.schedule_offset = s.schedule_offset;
    out.schedule = s.schedule;
    out.optimizer = s.optimizer;
    out.cursor = s.cursor;
    out.rng = s.rng;
    out.run_config = s.run_config;
    return out;
}

std::string to_string(ResumeMode m) { return m == ResumeMode::Full ? "full" : "weights-only"; }

ResumeMode resume_mode_from_string(const std::string& s) {
    if (s == "full") return ResumeMode::Full;
    if (s == "weights-only" || s == "weights_only") return ResumeMode::WeightsOnly;
    throw ConfigError("unknown resume mode '" + s + "' (expected full or weights-only)");
}

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
    std::istringstream is(s);
    std::mt19937_64 rng;
    is >> rng;
    if (is.fail()) throw FormatError("malformed RNG state");
    return rng;
}

std::vector<std::uint8_t> encode_container(const TensorMap<float>& tensors, const nlohmann::json& meta) {
    nlohmann::json header = nlohmann::json::object();
    header[kMetaKey] = meta;
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        if (name == kMetaKey) throw ConfigError("reserved tensor name");
        const std::uint64_t bytes = t.numel() * sizeof(float);
        header[name] = {{"dtype", "F32"}, {"shape", t.shape()}, {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    const std::string text = header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(8 + text.size() + offset);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(std::uint64_t(text.size()) >> (8 * i)));
    out.insert(out.end(), text.begin(), text.end());
    static_assert(sizeof(float) == 4);
    for (const auto& [name, t] : tensors) {
        for (std::size_t i = 0; i < t.numel(); ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, t.data() + i, 4);
            for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
        }
    }
    return out;
}

Container decode_container(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    std::uint64_t header_len = 0;
    nlohmann::json header = parse_header(bytes.data(), bytes.size(), origin, &header_len);
    Container c;
    c.meta = header[kMetaKey];
    const std::uint8_t* payload = bytes.data() + 8 + header_len;
    const std::uint64_t payload_size = bytes.size() - 8 - header_len;
    std::uint64_t expected_begin = 0;
    for (const auto& [name, entry] : header.items()) {
        if (name == kMetaKey) continue;
        Shape shape;
        std::uint64_t begin = 0, end = 0;
        try {
            if (entry.at("dtype").get<std::string>() != "F32") {
                throw FormatError(origin + ": tensor '" + name + "' has unsupported dtype " +
                                  entry.at("dtype").dump());
            }
            shape = entry.at("shape").get<Shape>();
            const auto range = entry.at("data_offsets").get<std::vector<std::uint64_t>>();
            if (range.size() != 2) throw FormatError(origin + ": tensor '" + name + "' has a malformed byte range");
            begin = range[0];
            end = range[1];
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(origin + ": tensor '" + name + "' header entry: " + e.what());
        }
        std::uint64_t numel = 1;
        for (auto d : shape) {
            if (d == 0) throw FormatError(origin + ": tensor '" + name + "' has a zero dimension");
            numel *= d;
        }
        const std::string range_str = "[" + std::to_string(begin) + ", " + std::to_string(end) + ")";
        if (end < begin || end - begin != numel * 4) {
            throw FormatError(origin + ": tensor '" + name + "' byte range " + range_str + " does not match shape " +
                              shape_str(shape));
        }
        if (begin != expected_begin) {
            throw FormatError(origin + ": tensor '" + name + "' byte range " + range_str +
                              " is not contiguous (expected start " + std::to_string(expected_begin) + ")");
        }
        if (end > payload_size) {
            throw FormatError(origin + ": truncated checkpoint: tensor '" + name + "' needs bytes " + range_str +
                              " but the payload has " + std::to_string(payload_size));
        }
        BasicTensor<float> t(shape);
        for (std::size_t i = 0; i < numel; ++i) {
            const std::uint8_t* p = payload + begin + 4 * i;
            const std::uint32_t bits = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                                       std::uint32_t(p[3]) << 24;
            std::memcpy(t.data() + i, &bits, 4);
        }
        c.tensors.emplace(name, std::move(t));
        expected_begin = end;
    }
    if (expected_begin != payload_size) {
        throw FormatError(origin + ": checkpoint payload has " + std::to_string(payload_size - expected_begin) +
                          " unexpected trailing bytes");
    }
    return c;
}

void write_container(const fs::path& path, const TensorMap<float>& tensors, const nlohmann::json& meta) {
    write_all(path, encode_container(tensors, meta), std::nullopt);
}

Container read_container(const fs::path& path) { return decode_container(slurp(path), path.string()); }

nlohmann::json read_container_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    std::uint8_t len_bytes[8] = {};
    in.read(reinterpret_cast<char*>(len_bytes), 8);
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got < 8) throw FormatError(path.string() + ": truncated checkpoint (no header length)");
    const std::uint64_t len = read_u64(len_bytes);
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::uint64_t>(in.tellg());
    if (len > size - 8) return parse_header(len_bytes, 8, path.string(), nullptr);  // reports truncation
    std::vector<std::uint8_t> buf(8 + len);
    std::memcpy(buf.data(), len_bytes, 8);
    in.seekg(8);
    in.read(reinterpret_cast<char*>(buf.data() + 8), static_cast<std::streamsize>(len));
    return parse_header(buf.data(), buf.size(), path.string(), nullptr);
}

std::vector<std::uint8_t> encode_checkpoint(const TrainState<float>& state) {
    return encode_container(state_tensors(state), state_meta(state, "f32"));
}

template <typename T>
fs::path save_checkpoint(const TrainState<T>& state, const fs::path& dir, const SaveOptions& options) {
    fs::create_directories(dir);
    const fs::path path = dir / ("step" + std::to_string(state.step) + ".ckpt");
    const auto bytes = encode_container(state_tensors(state), state_meta(state, sizeof(T) == 8 ? "f64" : "f32"));
    write_all(path, bytes, options.fail_after_bytes);
    return path;
}

TrainState<float> load_checkpoint(const fs::path& path, ResumeMode mode) {
    const std::string origin = path.string();
    Container c = read_container(path);
    const auto& meta = c.meta;
    if (meta.value("kind", "") != "train_state") {
        throw FormatError(origin + ": not a training checkpoint (kind '" + meta.value("kind", "") + "')");
    }
    TrainState<float> s;
    try {
        s.model = ModelConfig::from_json(meta.at("model"));
        s.schedule = ScheduleConfig::from_json(meta.at("schedule"));
        s.optimizer = AdamWConfig::from_json(meta.at("optimizer"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(origin + ": checkpoint meta: " + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(origin + ": checkpoint meta: " + e.what());
    }
    s.step = meta_get<std::int64_t>(meta, "step", origin);
    s.schedule_offset = meta.value("schedule_offset", std::int64_t{0});
    s.cursor = CorpusCursor::from_json(meta.at("cursor"));
    s.rng = rng_from_string(meta_get<std::string>(meta, "rng", origin));
    if (meta.contains("run_config")) s.run_config = meta["run_config"];

    TensorMap<float> m, v;
    for (auto& [name, t] : c.tensors) {
        if (name.ends_with(kAdamM)) m.emplace(name.substr(0, name.size() - 7), std::move(t));
        else if (name.ends_with(kAdamV)) v.emplace(name.substr(0, name.size() - 7), std::move(t));
        else s.params.emplace(name, std::move(t));
    }
    try {
        check_params(s.params, s.model);
    } catch (const ConfigError& e) {
        throw FormatError(origin + ": " + e.what());
    }
    if (mode == ResumeMode::WeightsOnly) {
        s.optim = OptimState<float>::zeros_for(s.params);
        return s;
    }
    for (const auto& [name, p] : s.params) {
        const auto im = m.find(name);
        const auto iv = v.find(name);
        if (im == m.end() || iv == v.end()) {
            throw FormatError(origin + ": optimizer moments missing for '" + name + "'");
        }
        if (im->second.shape() != p.shape() || iv->second.shape() != p.shape()) {
            throw FormatError(origin + ": optimizer moment shape mismatch for '" + name + "'");
        }
    }
    if (m.size() != s.params.size() || v.size() != s.params.size()) {
        throw FormatError(origin + ": optimizer moments present for unknown parameters");
    }
    s.optim.m = std::move(m);
    s.optim.v = std::move(v);
    s.optim.step_count = meta_get<std::int64_t>(meta, "optim_step_count", origin);
    return s;
}

nlohmann::json inspect_checkpoint(const fs::path& path) {
    const nlohmann::json header = read_container_header(path);
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, entry] : header.items()) {
        if (name == kMetaKey) continue;
        const auto range = entry.at("data_offsets");
        tensors.push_back({{"name", name},
                           {"dtype", entry.at("dtype")},
                           {"shape", entry.at("shape")},
                           {"bytes", range[1].get<std::uint64_t>() - range[0].get<std::uint64_t>()}});
    }
    const auto& meta = header[kMetaKey];
    return {{"path", path.string()},
            {"format_version", meta.at("format_version")},
            {"kind", meta.value("kind", "")},
            {"step", meta.contains("step") ? meta["step"] : nlohmann::json(nullptr)},
            {"tensors", tensors},
            {"meta", meta}};
}

template <typename T>
void save_adapter(const LoraAdapters<T>& adapters, const ModelConfig& base, const fs::path& path,
                  const nlohmann::json& extra) {
    nlohmann::json meta = {{"format_version", kCheckpointVersion},
                           {"kind", "lora_adapter"},
                           {"lora", adapters.config.to_json()},
                           {"model", base.to_json()},
                           {"hosts", nlohmann::json::array()}};
    for (const auto& [host, pair] : adapters.pairs) meta["hosts"].push_back(host);
    if (!extra.is_null()) meta["extra"] = extra;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_container(path, cast_map<T, float>(adapters.as_tensors()), meta);
}

LoadedAdapter load_adapter(const fs::path& path) {
    const std::string origin = path.string();
    Container c = read_container(path);
    if (c.meta.value("kind", "") != "lora_adapter") throw FormatError(origin + ": not an adapter checkpoint");
    LoadedAdapter out;
    try {
        out.base = ModelConfig::from_json(c.meta.at("model"));
        out.adapters.config = LoraConfig::from_json(c.meta.at("lora"));
        for (const auto& host : c.meta.at("hosts")) {
            const auto h = host.get<std::string>();
            auto ia = c.tensors.find(lora_tensor_name(h, "A"));
            auto ib = c.tensors.find(lora_tensor_name(h, "B"));
            if (ia == c.tensors.end() || ib == c.tensors.end()) {
                throw FormatError(origin + ": adapter tensors missing for '" + h + "'");
            }
            out.adapters.pairs.emplace(h, LoraPair<float>{ia->second, ib->second});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(origin + ": adapter meta: " + e.what());
    }
    return out;
}

std::vector<fs::path> list_checkpoints(const fs::path& dir) {
    static const std::regex kName(R"(step(\d+)\.ckpt)");
    std::vector<std::pair<std::int64_t, fs::path>> found;
    if (!fs::is_directory(dir)) return {};
    for (const auto& e : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && std::regex_match(name, m, kName)) found.emplace_back(std::stoll(m[1]), e.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> out;
    for (auto& [step, p] : found) out.push_back(std::move(p));
    return out;
}

template struct TrainState<float>;
template struct TrainState<double>;
template TrainState<double> cast_state<float, double>(const TrainState<float>&);
template TrainState<float> cast_state<double, float>(const TrainState<double>&);
template fs::path save_checkpoint<float>(const TrainState<float>&, const fs::path&, const SaveOptions&);
template fs::path save_checkpoint<double>(const TrainState<double>&, const fs::path&, const SaveOptions&);
template void save_adapter<float>(const LoraAdapters<float>&, const ModelConfig&, const fs::path&,
                                  const nlohmann::json&);
template void save_adapter<double>(const LoraAdapters<double>&, const ModelConfig&, const fs::path&,
                                   const nlohmann::json&);

}  // namespace llf
