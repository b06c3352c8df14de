// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multiple-choice scoring, correlation analysis, metrics logging and SVG panels.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "llf/lora.h"
#include "llf/model.h"

namespace llf {

class Tokenizer;

// ---- multiple choice -------------------------------------------------------------

struct MultipleChoiceItem {
    std::string ctx;
    std::vector<std::string> endings;
    std::int64_t label = 0;

    void validate() const;
};

/// JSONL with {"ctx": str, "endings": [str], "label": int} per line.
std::vector<MultipleChoiceItem> load_mc_jsonl(const std::filesystem::path& path);

struct McScore {
    std::size_t chosen = 0;
    std::vector<double> scores;  // summed (or mean) ending log-probabilities
};

/// Scores each ending by the log-probability of its tokens given ctx and the preceding ending
/// tokens; `normalize` divides by the ending length. Argmax with lowest-index tie-break.
template <typename T>
McScore score_multiple_choice_ids(const ModelParams<T>& params, const ModelConfig& cfg,
                                  std::span<const std::int32_t> ctx,
                                  const std::vector<std::vector<std::int32_t>>& endings, bool normalize = true,
                                  const LoraAdapters<T>* lora = nullptr);

/// Endings are encoded as encode(" " + ending) after encode(ctx).
template <typename T>
McScore score_multiple_choice(const ModelParams<T>& params, const ModelConfig& cfg, const Tokenizer& tok,
                              const MultipleChoiceItem& item, bool normalize = true,
                              const LoraAdapters<T>* lora = nullptr);

/// Fraction of items whose chosen index equals the label.
template <typename T>
double mc_accuracy(const ModelParams<T>& params, const ModelConfig& cfg, const Tokenizer& tok,
                   std::span<const MultipleChoiceItem> items, bool normalize = true,
                   const LoraAdapters<T>* lora = nullptr);

double accuracy(std::span<const std::size_t> chosen, std::span<const std::int64_t> gold);

// ---- correlation -------------------------------------------------------------------

struct Correlation {
    std::string x;
    std::string y;
    std::size_t n = 0;
    double r = 0.0;
    double r2 = 0.0;
};

/// Sample Pearson correlation; throws ConfigError for unequal lengths, n < 2 or zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);
Correlation correlate(const std::string& x_name, std::span<const double> xs, const std::string& y_name,
                      std::span<const double> ys);

struct CorrelationReport {
    std::vector<Correlation> entries;

    nlohmann::json to_json() const;
    std::string to_text() const;
};

/// Training-step evaluation table (steps, validation loss, Hellaswag score) joined with the mean
/// qualitative score at the same steps.
struct PaperFixture {
    std::string source_validation;  // caption of the validation/Hellaswag table
    std::string source_scores;      // caption of the qualitative score table
    std::vector<double> steps;
    std::vector<double> val_loss;
    std::vector<double> hellaswag;
    std::vector<double> avg_score;
};

const PaperFixture& paper_fixture();

/// steps, validation loss and Hellaswag score each against the average score.
CorrelationReport paper_fixture_report();

// ---- metrics log -------------------------------------------------------------------

struct MetricsRecord {
    std::int64_t step = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
    std::optional<double> mc_accuracy;
    double lr = 0.0;
    double grad_norm = 0.0;
    std::optional<double> tokens_per_sec;
    std::optional<double> wall_time;

    /// Optional fields are omitted when unset.
    nlohmann::json to_json() const;
    static MetricsRecord from_json(const nlohmann::json& j);
};

/// Appends one JSON line and flushes. Returns false (and prints a warning) when `record.step` is
/// not greater than the last step already in the file.
bool log_metrics(const MetricsRecord& record, const std::filesystem::path& path);

/// Single-writer append log that remembers the last step.
class MetricsWriter {
public:
    /// Truncates the file.
    explicit MetricsWriter(std::filesystem::path path);
    void write_header(const nlohmann::json& run_meta);
    /// Returns false (and warns) on a non-increasing step.
    bool log(const MetricsRecord& record);
    void write_raw(const nlohmann::json& j);
    const std::filesystem::path& path() const { return mPath; }

private:
    std::filesystem::path mPath;
    std::optional<std::int64_t> mLastStep;
};

/// Records of a metrics file; header and non-metric lines are skipped.
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

/// (step, tokens_per_sec) rows of a throughput sidecar file.
std::vector<std::pair<double, double>> read_throughput(const std::filesystem::path& path);

/// Column by name: step, train_loss, val_loss, mc_accuracy, lr, grad_norm, tokens_per_sec,
/// wall_time. Rows without the field are dropped; returns (step, value) pairs.
std::vector<std::pair<double, double>> metric_column(const std::vector<MetricsRecord>& records,
                                                     const std::string& name);

/// Pearson over rows where both columns are present. Throws on an empty file or unknown column.
CorrelationReport report_from_metrics(const std::vector<MetricsRecord>& records,
                                      const std::vector<std::pair<std::string, std::string>>& pairs);

// ---- plots -------------------------------------------------------------------------

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Static SVG line plot; a pure function of its inputs.
std::string render_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series,
                       int width = 640, int height = 400);

/// Writes one SVG per panel: train_loss, val_loss, mc_accuracy, lr, grad_norm, tokens_per_sec.
/// Panels without data are skipped; `throughput` overrides the tokens_per_sec column. Returns the
/// written paths.
std::vector<std::filesystem::path> write_panels(const std::vector<MetricsRecord>& records,
                                                const std::filesystem::path& out_dir,
                                                const std::vector<std::pair<double, double>>& throughput = {});

}  // namespace llf
