#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssr::eval {

/// Lowercases, drops ASCII punctuation and splits on whitespace.
std::vector<std::string> normalize_words(std::string_view text);

enum class EditOp { Match, Substitute, Delete, Insert };

struct WordEdit {
  EditOp op;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

/// Minimal unit-cost edit script turning `ref` into `hyp`.
std::vector<WordEdit> align_words(std::span<const std::string> ref, std::span<const std::string> hyp);

/// Plain Levenshtein distance between byte strings.
std::size_t char_edit_distance(std::string_view a, std::string_view b);

struct WerResult {
  double wer = 0.0;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_words = 0;
  // Reference normalized to nothing; wer is then insertions / 1.
  bool empty_reference = false;

  std::size_t errors() const noexcept { return substitutions + deletions + insertions; }
};

WerResult wer(std::string_view reference, std::string_view hypothesis);

/// 100 * (baseline - system) / baseline, rounded to one decimal.
double relative_improvement(double baseline_wer, double system_wer);

double round_to(double value, int decimals);

/// Wall-clock seconds spent in `stage`.
double time_utterance(const std::function<void()>& stage);
double mean(std::span<const double> values);

struct UtteranceDetail {
  std::string utterance_id;
  std::string reference;
  std::string hypothesis;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_words = 0;
  double seconds = 0.0;
  bool empty_reference = false;
};

struct SystemRow {
  std::string system_name;
  double wer_percent = 0.0;
  std::optional<double> relative_improvement_percent;  // empty for the baseline row
  double mean_seconds = 0.0;

  friend bool operator==(const SystemRow&, const SystemRow&) = default;
};

struct SystemDetails {
  std::string system_name;
  std::vector<UtteranceDetail> utterances;
};

/// Rows in presentation order; the first row is the baseline.
struct EvalReport {
  std::vector<SystemRow> rows;
  std::vector<SystemDetails> details;
};

struct Transcript {
  std::string utterance_id;
  std::string text;
  double seconds = 0.0;
};

struct Reference {
  std::string utterance_id;
  std::string text;
};

/// Scores one system against `refs`. Every reference needs a hypothesis.
SystemDetails score_system(std::string system_name, std::span<const Reference> refs,
                           std::span<const Transcript> hyps);

/// Corpus WER: total errors over total reference words (percent).
double corpus_wer_percent(std::span<const UtteranceDetail> details);

/// Aggregates systems into rows; relative improvements are against systems[0].
EvalReport build_report(std::vector<SystemDetails> systems);

/// Recomputes every non-baseline relative improvement from the WER column.
void recompute_relative_improvements(EvalReport& report);

enum class ReportFormat { TableText, Csv, PlotData };
ReportFormat parse_report_format(std::string_view name);

std::string render_report(const EvalReport& report, ReportFormat format);
void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path);

/// Per-utterance rows: system,utterance_id,reference,hypothesis,S,D,I,ref_words,seconds,empty_reference
std::string render_details_csv(const EvalReport& report);

/// Inverse of the csv format (rows only).
EvalReport parse_report_csv(std::string_view text);

}  // namespace ssr::eval
