#include "artifacts.hpp"

#include "ssr/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace ssr::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  return out;
}

std::string seconds_text(double s) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, s);
  return std::string(buf, res.ptr);
}

double parse_seconds(const std::string& token, const fs::path& path, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || v < 0.0) {
    fail(ErrorKind::Ingestion, path.string() + ":" + std::to_string(line) + ": bad seconds '" + token + "'");
  }
  return v;
}

}  // namespace

void write_transcripts(std::vector<eval::Transcript> rows, const fs::path& path) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });
  std::string out = "utterance_id\tseconds\ttext\n";
  for (const auto& r : rows) {
    require(r.text.find_first_of("\t\n") == std::string::npos, ErrorKind::Parameter,
            "transcript for " + r.utterance_id + " contains a tab or newline");
    out += r.utterance_id + '\t' + seconds_text(r.seconds) + '\t' + r.text + '\n';
  }
  dump(path, out);
}

std::vector<eval::Transcript> read_transcripts(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::Ingestion, "transcript file not found: " + path.string());
  const auto lines = lines_of(slurp(path));
  std::vector<eval::Transcript> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto a = lines[i].find('\t');
    const auto b = a == std::string::npos ? a : lines[i].find('\t', a + 1);
    if (b == std::string::npos) {
      fail(ErrorKind::Ingestion, path.string() + ":" + std::to_string(i + 1) + ": expected id, seconds and text");
    }
    rows.push_back({lines[i].substr(0, a), lines[i].substr(b + 1),
                    parse_seconds(lines[i].substr(a + 1, b - a - 1), path, i + 1)});
  }
  return rows;
}

void write_timings(const std::map<std::string, double>& seconds, const fs::path& path) {
  std::string out = "utterance_id\tseconds\n";
  for (const auto& [id, s] : seconds) out += id + '\t' + seconds_text(s) + '\n';
  dump(path, out);
}

std::map<std::string, double> read_timings(const fs::path& path) {
  const auto lines = lines_of(slurp(path));
  std::map<std::string, double> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) fail(ErrorKind::Ingestion, path.string() + ": malformed timing line");
    out[lines[i].substr(0, tab)] = parse_seconds(lines[i].substr(tab + 1), path, i + 1);
  }
  return out;
}

void write_nbest(const std::vector<NBestRecord>& records, const fs::path& path) {
  std::string out;
  for (const auto& r : records) {
    json hyps = json::array();
    for (const auto& h : r.hypotheses) hyps.push_back({{"text", h.text}, {"log_prob", h.log_prob}});
    out += json{{"utterance_id", r.utterance_id}, {"seconds", r.seconds}, {"hypotheses", hyps}}.dump() + '\n';
  }
  dump(path, out);
}

std::vector<NBestRecord> read_nbest(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::Ingestion, "n-best file not found: " + path.string());
  std::vector<NBestRecord> out;
  std::size_t n = 0;
  for (const auto& line : lines_of(slurp(path))) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      NBestRecord r{j.at("utterance_id").get<std::string>(), j.at("seconds").get<double>(), {}};
      for (const auto& h : j.at("hypotheses")) {
        r.hypotheses.push_back({h.at("text").get<std::string>(), h.at("log_prob").get<double>()});
      }
      require(!r.hypotheses.empty(), ErrorKind::Ingestion, "no hypotheses for " + r.utterance_id);
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(ErrorKind::Ingestion, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; !stop && (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!first) first = std::current_exception();
          stop = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace ssr::cli
