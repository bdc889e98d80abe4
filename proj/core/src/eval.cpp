#include "ssr/eval.hpp"

#include "ssr/error.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace ssr::eval {

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<WordEdit> align_words(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [m, &d](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  std::vector<WordEdit> edits;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        edits.push_back({same ? EditOp::Match : EditOp::Substitute, ref[i - 1], hyp[j - 1]});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      edits.push_back({EditOp::Delete, ref[i - 1], {}});
      --i;
    } else {
      edits.push_back({EditOp::Insert, {}, hyp[j - 1]});
      --j;
    }
  }
  std::reverse(edits.begin(), edits.end());
  return edits;
}

std::size_t char_edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

WerResult wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = normalize_words(reference);
  const auto hyp = normalize_words(hypothesis);
  WerResult r;
  for (const auto& e : align_words(ref, hyp)) {
    switch (e.op) {
      case EditOp::Substitute: ++r.substitutions; break;
      case EditOp::Delete: ++r.deletions; break;
      case EditOp::Insert: ++r.insertions; break;
      case EditOp::Match: break;
    }
  }
  r.ref_words = ref.size();
  r.empty_reference = ref.empty();
  r.wer = static_cast<double>(r.errors()) / static_cast<double>(std::max<std::size_t>(1, ref.size()));
  return r;
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

double relative_improvement(double baseline_wer, double system_wer) {
  require(baseline_wer > 0.0, ErrorKind::Parameter, "relative improvement needs a positive baseline WER");
  return round_to(100.0 * (baseline_wer - system_wer) / baseline_wer, 1);
}

double time_utterance(const std::function<void()>& stage) {
  const auto start = std::chrono::steady_clock::now();
  stage();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

SystemDetails score_system(std::string system_name, std::span<const Reference> refs,
                           std::span<const Transcript> hyps) {
  std::unordered_map<std::string, const Transcript*> by_id;
  for (const auto& h : hyps) {
    require(by_id.emplace(h.utterance_id, &h).second, ErrorKind::Parameter,
            system_name + ": duplicate hypothesis for " + h.utterance_id);
  }
  SystemDetails out{std::move(system_name), {}};
  for (const auto& ref : refs) {
    auto it = by_id.find(ref.utterance_id);
    require(it != by_id.end(), ErrorKind::Lookup, out.system_name + ": no hypothesis for " + ref.utterance_id);
    const auto w = wer(ref.text, it->second->text);
    out.utterances.push_back({ref.utterance_id, ref.text, it->second->text, w.substitutions, w.deletions,
                              w.insertions, w.ref_words, it->second->seconds, w.empty_reference});
  }
  return out;
}

double corpus_wer_percent(std::span<const UtteranceDetail> details) {
  std::size_t errors = 0, words = 0;
  for (const auto& d : details) {
    errors += d.substitutions + d.deletions + d.insertions;
    words += d.ref_words;
  }
  return 100.0 * static_cast<double>(errors) / static_cast<double>(std::max<std::size_t>(1, words));
}

EvalReport build_report(std::vector<SystemDetails> systems) {
  require(!systems.empty(), ErrorKind::EmptyInput, "report needs at least one system");
  EvalReport report;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    SystemRow row;
    row.system_name = systems[s].system_name;
    row.wer_percent = corpus_wer_percent(systems[s].utterances);
    std::vector<double> secs;
    for (const auto& u : systems[s].utterances) secs.push_back(u.seconds);
    row.mean_seconds = mean(secs);
    if (s > 0) row.relative_improvement_percent = relative_improvement(report.rows[0].wer_percent, row.wer_percent);
    report.rows.push_back(std::move(row));
  }
  report.details = std::move(systems);
  return report;
}

void recompute_relative_improvements(EvalReport& report) {
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    auto& row = report.rows[i];
    if (i == 0) {
      row.relative_improvement_percent.reset();
    } else {
      row.relative_improvement_percent = relative_improvement(report.rows[0].wer_percent, row.wer_percent);
    }
  }
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "table-text" || name == "table") return ReportFormat::TableText;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "plot-data") return ReportFormat::PlotData;
  fail(ErrorKind::Parameter, "unknown report format '" + std::string(name) + "' (table-text, csv, plot-data)");
}

namespace {

// Rounded, with trailing zeros trimmed: 36 -> "36", 32.50 -> "32.5".
std::string compact(double value, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << round_to(value, decimals);
  std::string s = os.str();
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

const std::vector<std::string> kTableHeader{"System", "WER (%)", "Relative improvement (%)",
                                            "Average time taken per utterance (sec)"};

std::string render_table(const EvalReport& report) {
  std::vector<std::vector<std::string>> cells{kTableHeader};
  for (const auto& r : report.rows) {
    cells.push_back({r.system_name, compact(r.wer_percent, 2),
                     r.relative_improvement_percent ? compact(*r.relative_improvement_percent, 1) : "Baseline",
                     compact(r.mean_seconds, 2)});
  }
  std::vector<std::size_t> width(kTableHeader.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += row[c];
      if (c + 1 < row.size()) line += std::string(width[c] - row[c].size() + 2, ' ');
    }
    out += line + '\n';
  }
  return out;
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::TableText:
      return render_table(report);
    case ReportFormat::Csv: {
      std::string out = "system,wer_percent,relative_improvement_percent,mean_seconds\n";
      for (const auto& r : report.rows) {
        const std::vector<std::string> f{
            r.system_name, detail::format_double(r.wer_percent),
            r.relative_improvement_percent ? detail::format_double(*r.relative_improvement_percent) : "Baseline",
            detail::format_double(r.mean_seconds)};
        out += detail::csv_row(f) + '\n';
      }
      return out;
    }
    case ReportFormat::PlotData: {
      std::string out = "system,wer_percent,seconds\n";
      for (const auto& r : report.rows) {
        const std::vector<std::string> f{r.system_name, detail::format_double(r.wer_percent),
                                         detail::format_double(r.mean_seconds)};
        out += detail::csv_row(f) + '\n';
      }
      return out;
    }
  }
  fail(ErrorKind::Parameter, "unhandled report format");
}

void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  detail::write_file(path, render_report(report, format));
}

std::string render_details_csv(const EvalReport& report) {
  std::string out = "system,utterance_id,reference,hypothesis,substitutions,deletions,insertions,ref_words,seconds,"
                    "empty_reference\n";
  for (const auto& sys : report.details) {
    for (const auto& u : sys.utterances) {
      const std::vector<std::string> f{sys.system_name,
                                       u.utterance_id,
                                       u.reference,
                                       u.hypothesis,
                                       std::to_string(u.substitutions),
                                       std::to_string(u.deletions),
                                       std::to_string(u.insertions),
                                       std::to_string(u.ref_words),
                                       detail::format_double(u.seconds),
                                       u.empty_reference ? "1" : "0"};
      out += detail::csv_row(f) + '\n';
    }
  }
  return out;
}

EvalReport parse_report_csv(std::string_view text) {
  const auto lines = detail::split_lines(text);
  require(!lines.empty() && detail::trim(lines[0]) == "system,wer_percent,relative_improvement_percent,mean_seconds",
          ErrorKind::Io, "not a report csv");
  EvalReport report;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const auto f = detail::parse_csv_row(lines[i]);
    require(f.size() == 4, ErrorKind::Io, "report csv line " + std::to_string(i + 1) + ": expected 4 fields");
    SystemRow row;
    row.system_name = f[0];
    row.wer_percent = detail::parse_double(f[1], "wer_percent");
    if (f[2] != "Baseline") row.relative_improvement_percent = detail::parse_double(f[2], "relative_improvement_percent");
    row.mean_seconds = detail::parse_double(f[3], "mean_seconds");
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace ssr::eval
