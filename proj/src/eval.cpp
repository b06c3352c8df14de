// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "llf/error.h"
#include "llf/tokenizer.h"

namespace llf {

namespace fs = std::filesystem;

// ---- multiple choice -------------------------------------------------------------

void MultipleChoiceItem::validate() const {
    if (endings.size() < 2) throw ConfigError("multiple-choice item needs at least two endings");
    for (const auto& e : endings) {
        if (e.empty()) throw ConfigError("multiple-choice ending is empty");
    }
    if (label < 0 || label >= static_cast<std::int64_t>(endings.size())) {
        throw ConfigError("multiple-choice label " + std::to_string(label) + " out of range");
    }
}

std::vector<MultipleChoiceItem> load_mc_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<MultipleChoiceItem> items;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        MultipleChoiceItem item;
        try {
            const auto j = nlohmann::json::parse(line);
            item.ctx = j.at("ctx").get<std::string>();
            item.endings = j.at("endings").get<std::vector<std::string>>();
            item.label = j.at("label").get<std::int64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        }
        try {
            item.validate();
        } catch (const ConfigError& e) {
            throw FormatError(where + ": " + e.what());
        }
        items.push_back(std::move(item));
    }
    if (items.empty()) throw FormatError(path.string() + ": no multiple-choice items");
    return items;
}

template <typename T>
McScore score_multiple_choice_ids(const ModelParams<T>& params, const ModelConfig& cfg,
                                  std::span<const std::int32_t> ctx,
                                  const std::vector<std::vector<std::int32_t>>& endings, bool normalize,
                                  const LoraAdapters<T>* lora) {
    if (ctx.empty()) throw ConfigError("multiple-choice context is empty");
    if (endings.empty()) throw ConfigError("no endings to score");
    const std::size_t max_len = static_cast<std::size_t>(cfg.max_position);
    const std::size_t V = static_cast<std::size_t>(cfg.vocab_size);
    McScore out;
    for (const auto& ending : endings) {
        if (ending.empty()) throw ConfigError("multiple-choice ending has no tokens");
        std::vector<std::int32_t> seq(ctx.begin(), ctx.end());
        seq.insert(seq.end(), ending.begin(), ending.end());
        // Keep the ending intact; drop the oldest context tokens if the sequence is too long.
        const std::size_t inputs_len = seq.size() - 1;
        const std::size_t drop = inputs_len > max_len ? inputs_len - max_len : 0;
        if (drop >= ctx.size()) throw ConfigError("ending longer than the model context");
        std::vector<std::int32_t> inputs(seq.begin() + static_cast<std::ptrdiff_t>(drop), seq.end() - 1);
        const auto logits = forward_logits<T>(params, cfg, TokenBatch::single(inputs), nullptr, lora);
        double total = 0.0;
        const std::size_t first = ctx.size() - 1 - drop;  // input position predicting ending[0]
        for (std::size_t k = 0; k < ending.size(); ++k) {
            const T* row = logits.data() + (first + k) * V;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t v = 0; v < V; ++v) mx = std::max(mx, double(row[v]));
            double sum = 0.0;
            for (std::size_t v = 0; v < V; ++v) sum += std::exp(double(row[v]) - mx);
            total += double(row[ending[k]]) - mx - std::log(sum);
        }
        out.scores.push_back(normalize ? total / double(ending.size()) : total);
    }
    out.chosen = 0;
    for (std::size_t i = 1; i < out.scores.size(); ++i) {
        if (out.scores[i] > out.scores[out.chosen]) out.chosen = i;
    }
    return out;
}

template <typename T>
McScore score_multiple_choice(const ModelParams<T>& params, const ModelConfig& cfg, const Tokenizer& tok,
                              const MultipleChoiceItem& item, bool normalize, const LoraAdapters<T>* lora) {
    item.validate();
    const auto ctx = tok.encode(item.ctx);
    std::vector<std::vector<std::int32_t>> endings;
    for (const auto& e : item.endings) endings.push_back(tok.encode(" " + e));
    return score_multiple_choice_ids(params, cfg, ctx, endings, normalize, lora);
}

template <typename T>
double mc_accuracy(const ModelParams<T>& params, const ModelConfig& cfg, const Tokenizer& tok,
                   std::span<const MultipleChoiceItem> items, bool normalize, const LoraAdapters<T>* lora) {
    std::vector<std::size_t> chosen;
    std::vector<std::int64_t> gold;
    for (const auto& item : items) {
        chosen.push_back(score_multiple_choice(params, cfg, tok, item, normalize, lora).chosen);
        gold.push_back(item.label);
    }
    return accuracy(chosen, gold);
}

double accuracy(std::span<const std::size_t> chosen, std::span<const std::int64_t> gold) {
    if (chosen.size() != gold.size() || chosen.empty()) throw ConfigError("accuracy needs equal, non-empty inputs");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < chosen.size(); ++i) hits += static_cast<std::int64_t>(chosen[i]) == gold[i];
    return double(hits) / double(chosen.size());
}

// ---- correlation -------------------------------------------------------------------

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ConfigError("pearson: series lengths differ");
    if (xs.size() < 2) throw ConfigError("pearson: need at least two points");
    const double n = double(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw ConfigError("pearson: degenerate series (zero variance)");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

Correlation correlate(const std::string& x_name, std::span<const double> xs, const std::string& y_name,
                      std::span<const double> ys) {
    Correlation c;
    c.x = x_name;
    c.y = y_name;
    c.n = xs.size();
    c.r = pearson(xs, ys);
    c.r2 = c.r * c.r;
    return c;
}

nlohmann::json CorrelationReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) arr.push_back({{"x", e.x}, {"y", e.y}, {"n", e.n}, {"r", e.r}, {"r2", e.r2}});
    return {{"correlations", arr}};
}

std::string CorrelationReport::to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    for (const auto& e : entries) {
        os << e.x << " vs. " << e.y << ": r = " << e.r << ", R^2 = " << e.r2 << " (n = " << e.n << ")\n";
    }
    return os.str();
}

const PaperFixture& paper_fixture() {
    static const PaperFixture kFixture{
        "Validation Loss and Hellaswag Scores Across Training Steps",
        "Evaluation Scores for Different Training Steps",
        {2700, 3300, 5100, 7500, 15700, 20000, 23900, 35000, 40500, 43250},
        {3.00, 2.93, 2.79, 2.71, 2.65, 2.55, 2.50, 2.48, 2.46, 2.47},
        {31.9, 32.9, 37.7, 40.5, 46.9, 49.6, 50.2, 52.5, 53.2, 56.1},
        {3.50, 4.50, 4.50, 5.00, 5.50, 5.50, 6.00, 6.17, 6.33, 6.83},
    };
    return kFixture;
}

CorrelationReport paper_fixture_report() {
    const auto& f = paper_fixture();
    CorrelationReport r;
    r.entries.push_back(correlate("Steps", f.steps, "Average Score", f.avg_score));
    r.entries.push_back(correlate("Validation Loss", f.val_loss, "Average Score", f.avg_score));
    r.entries.push_back(correlate("Hellaswag Score", f.hellaswag, "Average Score", f.avg_score));
    return r;
}

// ---- metrics log -------------------------------------------------------------------

nlohmann::json MetricsRecord::to_json() const {
    nlohmann::json j = {{"step", step}, {"train_loss", train_loss}};
    if (val_loss) j["val_loss"] = *val_loss;
    if (mc_accuracy) j["mc_accuracy"] = *mc_accuracy;
    j["lr"] = lr;
    j["grad_norm"] = grad_norm;
    if (tokens_per_sec) j["tokens_per_sec"] = *tokens_per_sec;
    if (wall_time) j["wall_time"] = *wall_time;
    return j;
}

MetricsRecord MetricsRecord::from_json(const nlohmann::json& j) {
    MetricsRecord r;
    try {
        r.step = j.at("step").get<std::int64_t>();
        r.train_loss = j.at("train_loss").get<double>();
        r.lr = j.at("lr").get<double>();
        r.grad_norm = j.at("grad_norm").get<double>();
        if (j.contains("val_loss")) r.val_loss = j["val_loss"].get<double>();
        if (j.contains("mc_accuracy")) r.mc_accuracy = j["mc_accuracy"].get<double>();
        if (j.contains("tokens_per_sec")) r.tokens_per_sec = j["tokens_per_sec"].get<double>();
        if (j.contains("wall_time")) r.wall_time = j["wall_time"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad metrics record: ") + e.what());
    }
    return r;
}

namespace {

void append_line(const fs::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw FormatError("cannot append to " + path.string());
    out << line << '\n';
    out.flush();
}

void warn_step(std::int64_t step, std::int64_t last) {
    std::cerr << "warning: metrics step " << step << " does not follow step " << last << '\n';
}

}  // namespace

bool log_metrics(const MetricsRecord& record, const fs::path& path) {
    std::optional<std::int64_t> last;
    if (fs::exists(path)) {
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_object() && !j.contains("type") && j.contains("step") && j["step"].is_number_integer()) {
                last = j["step"].get<std::int64_t>();
            }
        }
    }
    const bool ok = !last || record.step > *last;
    if (!ok) warn_step(record.step, *last);
    append_line(path, record.to_json().dump());
    return ok;
}

MetricsWriter::MetricsWriter(fs::path path) : mPath(std::move(path)) {
    if (mPath.has_parent_path()) fs::create_directories(mPath.parent_path());
    std::ofstream out(mPath, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + mPath.string());
}

void MetricsWriter::write_header(const nlohmann::json& run_meta) {
    nlohmann::json j = run_meta;
    j["type"] = "run_meta";
    append_line(mPath, j.dump());
}

bool MetricsWriter::log(const MetricsRecord& record) {
    const bool ok = !mLastStep || record.step > *mLastStep;
    if (!ok) warn_step(record.step, *mLastStep);
    mLastStep = record.step;
    append_line(mPath, record.to_json().dump());
    return ok;
}

void MetricsWriter::write_raw(const nlohmann::json& j) { append_line(mPath, j.dump()); }

std::vector<MetricsRecord> read_metrics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<MetricsRecord> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object() || j.contains("type")) continue;
        out.push_back(MetricsRecord::from_json(j));
    }
    return out;
}

std::vector<std::pair<double, double>> read_throughput(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::pair<double, double>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_object() && j.contains("step") && j.contains("tokens_per_sec")) {
            out.emplace_back(j["step"].get<double>(), j["tokens_per_sec"].get<double>());
        }
    }
    return out;
}

std::vector<std::pair<double, double>> metric_column(const std::vector<MetricsRecord>& records,
                                                     const std::string& name) {
    std::vector<std::pair<double, double>> out;
    for (const auto& r : records) {
        std::optional<double> v;
        if (name == "step") v = double(r.step);
        else if (name == "train_loss") v = r.train_loss;
        else if (name == "val_loss") v = r.val_loss;
        else if (name == "mc_accuracy") v = r.mc_accuracy;
        else if (name == "lr") v = r.lr;
        else if (name == "grad_norm") v = r.grad_norm;
        else if (name == "tokens_per_sec") v = r.tokens_per_sec;
        else if (name == "wall_time") v = r.wall_time;
        else throw ConfigError("unknown metrics column '" + name + "'");
        if (v) out.emplace_back(double(r.step), *v);
    }
    return out;
}

CorrelationReport report_from_metrics(const std::vector<MetricsRecord>& records,
                                      const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (records.empty()) throw FormatError("metrics file has no records");
    if (pairs.empty()) throw ConfigError("no column pairs requested");
    CorrelationReport report;
    for (const auto& [xn, yn] : pairs) {
        const auto xc = metric_column(records, xn);
        const auto yc = metric_column(records, yn);
        std::vector<double> xs, ys;
        std::size_t j = 0;
        for (const auto& [step, x] : xc) {
            while (j < yc.size() && yc[j].first < step) ++j;
            if (j < yc.size() && yc[j].first == step) {
                xs.push_back(x);
                ys.push_back(yc[j].second);
            }
        }
        report.entries.push_back(correlate(xn, xs, yn, ys));
    }
    return report;
}

// ---- plots -------------------------------------------------------------------------

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series,
                       int width, int height) {
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ConfigError("series '" + s.name + "' has mismatched x/y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) throw ConfigError("nothing to plot for '" + title + "'");
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
       << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv)
           << "</text>\n";
        os << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << fmt(xv)
           << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
       << xml_escape(x_label) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % 5];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (i) os << ' ';
            os << fmt(px(series[s].x[i])) << ',' << fmt(py(series[s].y[i]));
        }
        os << "\"/>\n";
        os << "<text x=\"" << left + 8 << "\" y=\"" << top + 16 + 14 * double(s) << "\" fill=\"" << color << "\">"
           << xml_escape(series[s].name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<fs::path> write_panels(const std::vector<MetricsRecord>& records, const fs::path& out_dir,
                                   const std::vector<std::pair<double, double>>& throughput) {
    if (records.empty()) throw FormatError("metrics file has no records");
    fs::create_directories(out_dir);
    struct Panel {
        const char* column;
        const char* title;
    };
    static const Panel kPanels[] = {
        {"train_loss", "Training loss"},      {"val_loss", "Validation loss"},   {"mc_accuracy", "Hella accuracy"},
        {"lr", "Learning rate"},              {"grad_norm", "Gradient norm"},    {"tokens_per_sec", "Tokens per second"},
    };
    std::vector<fs::path> written;
    for (const auto& p : kPanels) {
        auto col = metric_column(records, p.column);
        if (std::string(p.column) == "tokens_per_sec" && !throughput.empty()) col = throughput;
        if (col.empty()) continue;
        Series s{p.column, {}, {}};
        for (const auto& [x, y] : col) {
            s.x.push_back(x);
            s.y.push_back(y);
        }
        const fs::path path = out_dir / (std::string(p.column) + ".svg");
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw FormatError("cannot write " + path.string());
        out << render_svg(p.title, "step", {s});
        written.push_back(path);
    }
    return written;
}

#define LLF_EVAL_INSTANTIATE(T)                                                                                 \
    template McScore score_multiple_choice_ids<T>(const ModelParams<T>&, const ModelConfig&,                    \
                                                  std::span<const std::int32_t>,                                \
                                                  const std::vector<std::vector<std::int32_t>>&, bool,          \
                                                  const LoraAdapters<T>*);                                      \
    template McScore score_multiple_choice<T>(const ModelParams<T>&, const ModelConfig&, const Tokenizer&,      \
                                              const MultipleChoiceItem&, bool, const LoraAdapters<T>*);         \
    template double mc_accuracy<T>(const ModelParams<T>&, const ModelConfig&, const Tokenizer&,                 \
                                   std::span<const MultipleChoiceItem>, bool, const LoraAdapters<T>*);

LLF_EVAL_INSTANTIATE(float)
LLF_EVAL_INSTANTIATE(double)

}  // namespace llf
