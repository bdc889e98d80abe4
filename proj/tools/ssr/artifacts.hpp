#pragma once

#include "ssr/correction.hpp"
#include "ssr/eval.hpp"

#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ssr::cli {

// utterance_id<TAB>seconds<TAB>text, one header line, sorted by id.
void write_transcripts(std::vector<eval::Transcript> rows, const std::filesystem::path& path);
std::vector<eval::Transcript> read_transcripts(const std::filesystem::path& path);

// utterance_id<TAB>seconds
void write_timings(const std::map<std::string, double>& seconds, const std::filesystem::path& path);
std::map<std::string, double> read_timings(const std::filesystem::path& path);

struct NBestRecord {
  std::string utterance_id;
  double seconds = 0.0;
  std::vector<correction::NBestEntry> hypotheses;  // best first
};

void write_nbest(const std::vector<NBestRecord>& records, const std::filesystem::path& path);
std::vector<NBestRecord> read_nbest(const std::filesystem::path& path);

/// Runs fn(0..n-1) on a small worker pool. The first exception is rethrown
/// after every worker has stopped.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ssr::cli
