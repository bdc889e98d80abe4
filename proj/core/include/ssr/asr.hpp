#pragma once

#include "ssr/nn/adam.hpp"
#include "ssr/nn/transformer.hpp"
#include "ssr/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ssr::asr {

using TokenId = Eigen::Index;

inline constexpr std::string_view kPad = "<pad>";
inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";

// Character-level token inventory. Every non-special token is a single byte.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  // Specials followed by the distinct characters of `chars` in byte order.
  static Vocabulary characters(std::string_view chars);
  // Specials followed by printable ASCII (32..126).
  static Vocabulary ascii();

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const;
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;

  TokenId bos() const noexcept { return bos_; }
  TokenId eos() const noexcept { return eos_; }
  TokenId pad() const noexcept { return pad_; }  // -1 when absent
  bool is_special(TokenId id) const noexcept { return id == bos_ || id == eos_ || id == pad_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> lookup_;
  TokenId bos_ = -1, eos_ = -1, pad_ = -1;
};

/// [BOS, c1, ..., cn, EOS]; a character outside the vocabulary is a Vocabulary error.
std::vector<TokenId> tokenize(const Vocabulary& vocab, std::string_view text);
/// Concatenates non-special tokens.
std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> tokens);

struct Hypothesis {
  std::vector<TokenId> tokens;  // starts with BOS
  double log_prob = 0.0;
  bool finished = false;
};

// Next-token log-probabilities (length V) given a BOS-prefixed token prefix.
using StepScorer = std::function<RowVector(std::span<const TokenId>)>;

struct BeamOptions {
  std::size_t beam_width = 500;
  // Maximum number of generated tokens, EOS included. The last step may only emit EOS.
  std::size_t max_len = 64;
  bool length_norm = false;
  // Stop once the best finished hypothesis outscores every live one. This
  // never changes the top hypothesis, only how far the tail of the pool reaches.
  bool early_stop = true;

  void validate() const;
};

/// Breadth-limited search: every live hypothesis is expanded over all tokens
/// except BOS/PAD, the best `beam_width` candidates are kept, those ending in
/// EOS retire to the result pool. Returns the pool best first (never empty).
std::vector<Hypothesis> beam_search(const StepScorer& scorer, const Vocabulary& vocab,
                                    const BeamOptions& opts);

/// Argmax token at every step (BOS/PAD excluded) until EOS or `max_len`
/// generated tokens; the last step emits EOS.
Hypothesis greedy_decode(const StepScorer& scorer, const Vocabulary& vocab, std::size_t max_len);

/// Encoder-decoder recognizer over log-mel frames.
struct AsrModel {
  nn::TransformerParams params;
  Vocabulary vocab = Vocabulary::characters("");
};

AsrModel init_asr(const nn::TransformerConfig& cfg, std::size_t mel_dim, Vocabulary vocab);

/// Recorded forward pass: per-position next-token log-probabilities for `tokens`.
nn::Var asr_forward(nn::Tape& t, const AsrModel& model, const Matrix& mel,
                    std::span<const TokenId> tokens);

/// Next-token log-probabilities after `prefix` (which must start with BOS).
RowVector asr_forward(const AsrModel& model, const Matrix& mel, std::span<const TokenId> prefix);

/// Encodes `mel` once and scores prefixes against the cached encoder output.
class AsrScorer {
 public:
  AsrScorer(const AsrModel& model, const Matrix& mel);
  RowVector operator()(std::span<const TokenId> prefix) const;

 private:
  const AsrModel* model_;
  Matrix memory_;
};

std::vector<Hypothesis> beam_search(const AsrModel& model, const Matrix& mel, const BeamOptions& opts);
Hypothesis greedy_decode(const AsrModel& model, const Matrix& mel, std::size_t max_len);

struct AsrExample {
  Matrix mel;
  std::string transcript;
};

struct AsrTrainOptions {
  std::size_t steps = 200;
  std::size_t batch_size = 4;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double grad_clip = 1.0;
};

struct AsrTrainResult {
  AsrModel model;
  std::vector<double> losses;
};

/// Token-level negative log-likelihood under teacher forcing.
double asr_loss(const AsrModel& model, const AsrExample& example);

/// Teacher-forced training on (mel, transcript) pairs. The vocabulary covers
/// every character seen in the transcripts.
AsrTrainResult train_asr(const std::vector<AsrExample>& examples, const nn::TransformerConfig& cfg,
                         const AsrTrainOptions& opts);

void save_asr(const AsrModel& model, const std::filesystem::path& path);
AsrModel load_asr(const std::filesystem::path& path);

}  // namespace ssr::asr
