#include "ssr/correction.hpp"

#include "ssr/error.hpp"
#include "ssr/eval.hpp"
#include "text_io.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

namespace ssr::correction {

std::vector<std::string> FilterConfig::problems() const {
  std::vector<std::string> out;
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    out.push_back("confidence_threshold must lie in [0, 1]");
  }
  if (max_seq_tokens == 0) out.push_back("max_seq_tokens must be >= 1");
  return out;
}

void FilterConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid filter config:";
  for (const auto& s : p) msg += "\n  " + s;
  fail(ErrorKind::Config, msg);
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Accepted: return "accepted";
    case Verdict::LowConfidence: return "low-confidence";
    case Verdict::TrivialEdit: return "trivial-edit";
    case Verdict::GenericSubstitution: return "generic-substitution";
    case Verdict::OutOfDomain: return "out-of-domain";
  }
  return "?";
}

Verdict judge(std::string_view input, const CorrectionCandidate& candidate, const FilterConfig& cfg) {
  if (!(candidate.confidence >= cfg.confidence_threshold)) return Verdict::LowConfidence;

  const auto before = eval::normalize_words(input);
  const auto after = eval::normalize_words(candidate.text);
  std::vector<std::string> changed;
  for (const auto& e : eval::align_words(before, after)) {
    if (e.op == eval::EditOp::Match) continue;
    if (!e.ref.empty()) changed.push_back(e.ref);
    if (!e.hyp.empty()) changed.push_back(e.hyp);
  }
  const bool substantive = std::any_of(changed.begin(), changed.end(), [&](const std::string& w) {
    return w.size() >= cfg.min_edit_chars;
  });
  if (!substantive) return Verdict::TrivialEdit;

  const std::unordered_set<std::string> stop(cfg.generic_stoplist.begin(), cfg.generic_stoplist.end());
  if (std::all_of(changed.begin(), changed.end(), [&](const std::string& w) { return stop.count(w) > 0; })) {
    return Verdict::GenericSubstitution;
  }

  if (!cfg.domain_lexicon.empty()) {
    const std::unordered_set<std::string> lex(cfg.domain_lexicon.begin(), cfg.domain_lexicon.end());
    const std::unordered_set<std::string> known(before.begin(), before.end());
    for (const auto& w : after) {
      if (!known.count(w) && !lex.count(w)) return Verdict::OutOfDomain;
    }
  }
  return Verdict::Accepted;
}

std::vector<CorrectionCandidate> filter_candidates(std::string_view input,
                                                   const std::vector<CorrectionCandidate>& candidates,
                                                   const FilterConfig& cfg) {
  std::vector<CorrectionCandidate> kept;
  for (const auto& c : candidates) {
    if (judge(input, c, cfg) == Verdict::Accepted) kept.push_back(c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
  return kept;
}

std::string apply_correction(std::string_view input, const std::vector<CorrectionCandidate>& accepted) {
  if (accepted.empty()) return std::string(input);
  return accepted.front().text;
}

MockProvider::MockProvider(MockConfig cfg) : cfg_(std::move(cfg)) {
  std::set<std::string> unique;
  for (const auto& w : cfg_.lexicon) {
    for (auto& n : eval::normalize_words(w)) unique.insert(std::move(n));
  }
  ranked_lexicon_.assign(unique.begin(), unique.end());
  std::mt19937_64 rng(cfg_.seed);
  std::shuffle(ranked_lexicon_.begin(), ranked_lexicon_.end(), rng);
}

std::vector<CorrectionCandidate> MockProvider::propose(const CorrectionRequest& request) {
  const auto tokens = detail::split_ws(request.transcript);
  if (tokens.empty()) return {};
  const std::unordered_set<std::string> lex(ranked_lexicon_.begin(), ranked_lexicon_.end());

  auto join = [](const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
    return out;
  };
  const std::vector<std::string> original(tokens.begin(), tokens.end());

  struct Alternative {
    std::string word;
    std::size_t distance;
  };
  std::vector<CorrectionCandidate> out;
  std::vector<std::pair<std::size_t, Alternative>> best;  // position -> top alternative
  const std::size_t limit = std::min(original.size(), request.max_tokens);
  for (std::size_t i = 0; i < limit && !ranked_lexicon_.empty(); ++i) {
    const auto norm = eval::normalize_words(original[i]);
    if (norm.size() != 1 || lex.count(norm[0])) continue;
    std::vector<Alternative> alts;
    for (const auto& w : ranked_lexicon_) alts.push_back({w, eval::char_edit_distance(norm[0], w)});
    std::stable_sort(alts.begin(), alts.end(), [](const auto& a, const auto& b) { return a.distance < b.distance; });
    alts.resize(std::min(alts.size(), cfg_.max_alternatives));
    for (const auto& a : alts) {
      auto words = original;
      words[i] = a.word;
      out.push_back({join(words), 1.0 / (1.0 + static_cast<double>(a.distance)), id()});
    }
    if (!alts.empty()) best.emplace_back(i, alts.front());
  }
  if (best.empty()) return {{request.transcript, 1.0, id()}};
  if (best.size() > 1) {
    auto words = original;
    double conf = 1.0;
    for (const auto& [i, a] : best) {
      words[i] = a.word;
      conf *= 1.0 / (1.0 + static_cast<double>(a.distance));
    }
    out.push_back({join(words), conf, id()});
  }
  return out;
}

std::string encode_request(const CorrectionRequest& request) {
  nlohmann::json j;
  j["transcript"] = request.transcript;
  j["n_best"] = nlohmann::json::array();
  for (const auto& e : request.n_best) j["n_best"].push_back({{"text", e.text}, {"log_prob", e.log_prob}});
  j["max_tokens"] = request.max_tokens;
  return j.dump();
}

CorrectionRequest decode_request(std::string_view body) {
  try {
    const auto j = nlohmann::json::parse(body);
    CorrectionRequest r;
    r.transcript = j.at("transcript").get<std::string>();
    if (j.contains("n_best")) {
      for (const auto& e : j.at("n_best")) r.n_best.push_back({e.at("text"), e.at("log_prob")});
    }
    if (j.contains("max_tokens")) r.max_tokens = j.at("max_tokens").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Provider, std::string("malformed correction request: ") + e.what());
  }
}

std::string encode_response(const std::vector<CorrectionCandidate>& candidates) {
  nlohmann::json j;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : candidates) j["candidates"].push_back({{"text", c.text}, {"confidence", c.confidence}});
  return j.dump();
}

std::vector<CorrectionCandidate> decode_response(std::string_view body, std::string_view provider_id) {
  std::vector<CorrectionCandidate> out;
  try {
    const auto j = nlohmann::json::parse(body);
    for (const auto& c : j.at("candidates")) {
      CorrectionCandidate cand{c.at("text").get<std::string>(), c.at("confidence").get<double>(),
                               std::string(provider_id)};
      require(cand.confidence >= 0.0 && cand.confidence <= 1.0, ErrorKind::Provider,
              "provider confidence outside [0, 1]");
      out.push_back(std::move(cand));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Provider, std::string("malformed provider response: ") + e.what());
  }
  return out;
}

RemoteProvider::RemoteProvider(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme = cfg_.endpoint.find("://");
  require(scheme != std::string::npos, ErrorKind::Config, "provider endpoint must look like http://host:port/path");
  const auto slash = cfg_.endpoint.find('/', scheme + 3);
  base_ = cfg_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
  require(cfg_.timeout_s > 0.0, ErrorKind::Config, "provider timeout must be positive");
}

std::vector<CorrectionCandidate> RemoteProvider::propose(const CorrectionRequest& request) {
  httplib::Client client(base_);
  const auto usec = static_cast<std::int64_t>(std::llround(cfg_.timeout_s * 1e6));
  const time_t sec = static_cast<time_t>(usec / 1000000);
  const time_t rest = static_cast<time_t>(usec % 1000000);
  client.set_connection_timeout(sec, rest);
  client.set_read_timeout(sec, rest);
  client.set_write_timeout(sec, rest);

  const std::string body = encode_request(request);
  std::string last_error;
  bool timed_out = false;
  for (std::size_t attempt = 0; attempt <= cfg_.retries; ++attempt) {
    auto res = client.Post(path_, body, "application/json");
    if (res) {
      if (res->status == 200) return decode_response(res->body, id());
      last_error = "provider answered HTTP " + std::to_string(res->status);
      timed_out = false;
      continue;
    }
    const auto err = res.error();
    timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
    last_error = httplib::to_string(err);
  }
  fail(timed_out ? ErrorKind::Timeout : ErrorKind::Provider,
       cfg_.endpoint + ": " + last_error + " after " + std::to_string(cfg_.retries + 1) + " attempt(s)");
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::vector<std::string> words;
  const std::string text = detail::read_file(path);
  for (auto line : detail::split_lines(text)) {
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    for (auto& w : eval::normalize_words(line)) words.push_back(std::move(w));
  }
  return words;
}

}  // namespace ssr::correction
