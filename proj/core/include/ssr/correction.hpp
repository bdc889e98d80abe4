#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ssr::correction {

struct CorrectionCandidate {
  std::string text;
  double confidence = 0.0;  // in [0, 1]
  std::string provider_id;

  friend bool operator==(const CorrectionCandidate&, const CorrectionCandidate&) = default;
};

struct NBestEntry {
  std::string text;
  double log_prob = 0.0;
};

struct CorrectionRequest {
  std::string transcript;
  std::vector<NBestEntry> n_best;
  std::size_t max_tokens = 128;
};

struct FilterConfig {
  double confidence_threshold = 0.7;
  std::size_t min_edit_chars = 2;
  std::vector<std::string> generic_stoplist;
  std::vector<std::string> domain_lexicon;  // empty disables the domain rule
  std::size_t max_seq_tokens = 128;

  std::vector<std::string> problems() const;
  void validate() const;
};

enum class Verdict { Accepted, LowConfidence, TrivialEdit, GenericSubstitution, OutOfDomain };
std::string_view to_string(Verdict v);

/// First rule a candidate fails, in the order: confidence, trivial edit,
/// generic substitution, domain lexicon.
Verdict judge(std::string_view input, const CorrectionCandidate& candidate, const FilterConfig& cfg);

/// Survivors of every rule, highest confidence first (stable on ties).
std::vector<CorrectionCandidate> filter_candidates(std::string_view input,
                                                   const std::vector<CorrectionCandidate>& candidates,
                                                   const FilterConfig& cfg);

/// Top accepted candidate, or `input` unchanged when nothing was accepted.
std::string apply_correction(std::string_view input, const std::vector<CorrectionCandidate>& accepted);

class CorrectionProvider {
 public:
  virtual ~CorrectionProvider() = default;
  virtual std::string id() const = 0;
  virtual std::vector<CorrectionCandidate> propose(const CorrectionRequest& request) = 0;
};

struct MockConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> lexicon;
  std::size_t max_alternatives = 3;  // per out-of-lexicon word
};

/// Dictionary corrector: every out-of-lexicon word is replaced by its nearest
/// lexicon words (confidence 1 / (1 + edit distance)). Equal distances are
/// ordered by a seeded shuffle of the lexicon.
class MockProvider final : public CorrectionProvider {
 public:
  explicit MockProvider(MockConfig cfg);
  std::string id() const override { return "mock"; }
  std::vector<CorrectionCandidate> propose(const CorrectionRequest& request) override;

 private:
  MockConfig cfg_;
  std::vector<std::string> ranked_lexicon_;
};

struct RemoteConfig {
  std::string endpoint;  // http://host:port/path
  double timeout_s = 10.0;
  std::size_t retries = 1;
};

/// JSON over HTTP POST: {transcript, n_best: [{text, log_prob}], max_tokens}
/// answered by {candidates: [{text, confidence}]}.
class RemoteProvider final : public CorrectionProvider {
 public:
  explicit RemoteProvider(RemoteConfig cfg);
  std::string id() const override { return "remote"; }
  std::vector<CorrectionCandidate> propose(const CorrectionRequest& request) override;

 private:
  RemoteConfig cfg_;
  std::string base_;
  std::string path_;
};

std::string encode_request(const CorrectionRequest& request);
CorrectionRequest decode_request(std::string_view body);
std::string encode_response(const std::vector<CorrectionCandidate>& candidates);
std::vector<CorrectionCandidate> decode_response(std::string_view body, std::string_view provider_id);

/// One word per line; blank lines and '#' comments are skipped; words are normalized.
std::vector<std::string> load_word_list(const std::filesystem::path& path);

}  // namespace ssr::correction
