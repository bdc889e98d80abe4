#pragma once

#include "config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ssr::cli {

namespace fs = std::filesystem;

// Split selector: "train", "test" or "all".
inline constexpr const char* kAllSplits = "all";

// Progress lines on stderr; on by default.
void set_verbose(bool on);

void gen_corpus(const PipelineConfig& cfg, const fs::path& out);

/// <id>.silent.feat and, when present, <id>.vocal.feat and <id>.mel.feat.
void featurize(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& out);

/// <id>.target.feat and <id>.path for every parallel utterance, plus summary.tsv.
/// The CCA refinement is fit once on the pooled train split.
void align_targets(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& features,
                   const fs::path& out);

void train_transducer(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& features,
                      const fs::path& targets, const fs::path& out_model);

/// <id>.pred.feat from silent EMG features only, plus timings.tsv.
void transduce(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& features,
               const fs::path& model, const fs::path& out, const std::string& split);

void train_asr(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& features,
               const std::optional<fs::path>& predicted, const fs::path& out_model);

/// greedy.tsv, beam.tsv and nbest.jsonl from <id>.<suffix>.feat mel files.
void transcribe(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& mels,
                const std::string& suffix, const fs::path& model, const fs::path& out,
                const std::string& split);

void correct(const PipelineConfig& cfg, const fs::path& nbest, const std::optional<fs::path>& manifest,
             const fs::path& out, bool fallback_on_error);

struct SystemInput {
  std::string name;
  fs::path transcripts;
};

/// Writes the report csv to `out` and per-utterance rows next to it.
void evaluate(const std::optional<fs::path>& manifest, const std::optional<fs::path>& references,
              const std::string& split, const std::vector<SystemInput>& systems, const fs::path& out);

/// Renders a report csv; writes to `out` or stdout.
void report(const fs::path& in, const std::string& format, const std::optional<fs::path>& out);

}  // namespace ssr::cli
