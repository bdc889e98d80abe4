#include "ssr/asr.hpp"

#include "ssr/error.hpp"
#include "nn/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace ssr::asr {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& tok = tokens_[i];
    require(!tok.empty(), ErrorKind::Vocabulary, "empty token at index " + std::to_string(i));
    const bool special = tok == kPad || tok == kBos || tok == kEos;
    require(special || tok.size() == 1, ErrorKind::Vocabulary,
            "token '" + tok + "' is not a single character");
    require(lookup_.emplace(tok, static_cast<TokenId>(i)).second, ErrorKind::Vocabulary,
            "duplicate token '" + tok + "'");
  }
  require(contains(kBos) && contains(kEos), ErrorKind::Vocabulary, "vocabulary lacks BOS/EOS");
  bos_ = id(kBos);
  eos_ = id(kEos);
  if (contains(kPad)) pad_ = id(kPad);
}

Vocabulary Vocabulary::characters(std::string_view chars) {
  std::set<unsigned char> unique(chars.begin(), chars.end());
  std::vector<std::string> tokens{std::string(kPad), std::string(kBos), std::string(kEos)};
  for (unsigned char c : unique) tokens.emplace_back(1, static_cast<char>(c));
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::ascii() {
  std::string chars;
  for (int c = 32; c <= 126; ++c) chars.push_back(static_cast<char>(c));
  return characters(chars);
}

const std::string& Vocabulary::token(TokenId id) const {
  require(id >= 0 && id < static_cast<TokenId>(tokens_.size()), ErrorKind::Vocabulary,
          "unknown token id " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  require(it != lookup_.end(), ErrorKind::Vocabulary, "unknown token '" + std::string(token) + "'");
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const { return lookup_.count(std::string(token)) > 0; }

std::vector<TokenId> tokenize(const Vocabulary& vocab, std::string_view text) {
  std::vector<TokenId> out{vocab.bos()};
  for (char c : text) out.push_back(vocab.id(std::string_view(&c, 1)));
  out.push_back(vocab.eos());
  return out;
}

std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> tokens) {
  std::string out;
  for (TokenId id : tokens) {
    const auto& tok = vocab.token(id);
    if (!vocab.is_special(id)) out += tok;
  }
  return out;
}

void BeamOptions::validate() const {
  require(beam_width >= 1, ErrorKind::Parameter, "beam_width must be >= 1");
  require(max_len >= 1, ErrorKind::Parameter, "max_len must be >= 1");
}

namespace {

double ranking_score(const Hypothesis& h, bool length_norm) {
  if (!length_norm) return h.log_prob;
  return h.log_prob / static_cast<double>(std::max<std::size_t>(1, h.tokens.size() - 1));
}

// Best first; equal scores fall back to token order so results are reproducible.
auto better(bool length_norm) {
  return [length_norm](const Hypothesis& a, const Hypothesis& b) {
    const double sa = ranking_score(a, length_norm), sb = ranking_score(b, length_norm);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  };
}

}  // namespace

std::vector<Hypothesis> beam_search(const StepScorer& scorer, const Vocabulary& vocab,
                                    const BeamOptions& opts) {
  opts.validate();
  const auto cmp = better(opts.length_norm);
  const auto v = static_cast<TokenId>(vocab.size());
  std::vector<Hypothesis> live{Hypothesis{{vocab.bos()}, 0.0, false}};
  std::vector<Hypothesis> pool;

  for (std::size_t step = 1; step <= opts.max_len && !live.empty(); ++step) {
    const bool last = step == opts.max_len;
    std::vector<Hypothesis> candidates;
    for (const auto& h : live) {
      const RowVector lp = scorer(h.tokens);
      require(lp.size() == v, ErrorKind::Parameter, "scorer returned the wrong number of log-probabilities");
      for (TokenId tok = 0; tok < v; ++tok) {
        if (tok == vocab.bos() || tok == vocab.pad()) continue;
        if (last && tok != vocab.eos()) continue;
        Hypothesis next = h;
        next.tokens.push_back(tok);
        next.log_prob += lp[tok];
        next.finished = tok == vocab.eos();
        candidates.push_back(std::move(next));
      }
    }
    live.clear();
    for (auto& c : candidates) (c.finished ? pool : live).push_back(std::move(c));
    const std::size_t keep = std::min(opts.beam_width, live.size());
    std::partial_sort(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(keep), live.end(), cmp);
    live.resize(keep);

    if (opts.early_stop && !opts.length_norm && !pool.empty() && !live.empty()) {
      const double best_done = std::max_element(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
                                 return a.log_prob < b.log_prob;
                               })->log_prob;
      if (best_done >= live.front().log_prob) break;
    }
  }
  std::sort(pool.begin(), pool.end(), cmp);
  return pool;
}

Hypothesis greedy_decode(const StepScorer& scorer, const Vocabulary& vocab, std::size_t max_len) {
  require(max_len >= 1, ErrorKind::Parameter, "max_len must be >= 1");
  const auto v = static_cast<TokenId>(vocab.size());
  Hypothesis h{{vocab.bos()}, 0.0, false};
  for (std::size_t step = 1; step <= max_len && !h.finished; ++step) {
    const RowVector lp = scorer(h.tokens);
    require(lp.size() == v, ErrorKind::Parameter, "scorer returned the wrong number of log-probabilities");
    TokenId best = vocab.eos();
    if (step < max_len) {
      for (TokenId tok = 0; tok < v; ++tok) {
        if (tok == vocab.bos() || tok == vocab.pad()) continue;
        if (lp[tok] > lp[best]) best = tok;
      }
    }
    h.tokens.push_back(best);
    h.log_prob += lp[best];
    h.finished = best == vocab.eos();
  }
  return h;
}

AsrModel init_asr(const nn::TransformerConfig& cfg, std::size_t mel_dim, Vocabulary vocab) {
  require(cfg.n_dec_layers >= 1, ErrorKind::Config, "recognizer needs at least one decoder layer");
  AsrModel model;
  model.params = nn::init_encoder(cfg, mel_dim, {});
  nn::add_decoder(model.params, vocab.size());
  const auto d = static_cast<Eigen::Index>(mel_dim);
  model.params.tensors.add("norm.in.mean", Matrix::Zero(1, d), false);
  model.params.tensors.add("norm.in.std", Matrix::Ones(1, d), false);
  model.vocab = std::move(vocab);
  return model;
}

namespace {

Matrix normalized_input(const AsrModel& model, const Matrix& mel) {
  require(mel.rows() > 0, ErrorKind::EmptyInput, "empty mel spectrogram");
  const auto& s = model.params.tensors;
  const RowVector mean = s.value("norm.in.mean").row(0);
  const RowVector stdev = s.value("norm.in.std").row(0);
  require(mel.cols() == mean.size(), ErrorKind::Parameter,
          "recognizer expects " + std::to_string(mean.size()) + " mel bands, got " + std::to_string(mel.cols()));
  return (mel.rowwise() - mean).array().rowwise() / stdev.array();
}

void check_prefix(const AsrModel& model, std::span<const TokenId> prefix) {
  require(!prefix.empty() && prefix.front() == model.vocab.bos(), ErrorKind::Parameter,
          "prefix must start with BOS");
  for (TokenId id : prefix) model.vocab.token(id);
}

}  // namespace

nn::Var asr_forward(nn::Tape& t, const AsrModel& model, const Matrix& mel, std::span<const TokenId> tokens) {
  const Matrix x = normalized_input(model, mel);
  check_prefix(model, tokens);
  const nn::Var memory = nn::encoder_forward(t, model.params, t.constant(x), std::nullopt);
  return nn::decoder_forward(t, model.params, tokens, memory);
}

RowVector asr_forward(const AsrModel& model, const Matrix& mel, std::span<const TokenId> prefix) {
  nn::Tape t(model.params.tensors, false);
  const Matrix& lp = t.value(asr_forward(t, model, mel, prefix));
  return lp.row(lp.rows() - 1);
}

AsrScorer::AsrScorer(const AsrModel& model, const Matrix& mel) : model_(&model) {
  nn::Tape t(model.params.tensors, false);
  memory_ = t.value(nn::encoder_forward(t, model.params, t.constant(normalized_input(model, mel)), std::nullopt));
}

RowVector AsrScorer::operator()(std::span<const TokenId> prefix) const {
  check_prefix(*model_, prefix);
  nn::Tape t(model_->params.tensors, false);
  const Matrix& lp = t.value(nn::decoder_forward(t, model_->params, prefix, t.constant(memory_)));
  return lp.row(lp.rows() - 1);
}

std::vector<Hypothesis> beam_search(const AsrModel& model, const Matrix& mel, const BeamOptions& opts) {
  const AsrScorer scorer(model, mel);
  return beam_search(std::cref(scorer), model.vocab, opts);
}

Hypothesis greedy_decode(const AsrModel& model, const Matrix& mel, std::size_t max_len) {
  const AsrScorer scorer(model, mel);
  return greedy_decode(std::cref(scorer), model.vocab, max_len);
}

namespace {

std::pair<double, nn::Gradients> loss_and_grad(const AsrModel& model, const AsrExample& ex, bool training,
                                               std::uint64_t seed) {
  const auto ids = tokenize(model.vocab, ex.transcript);
  const std::span<const TokenId> all(ids);
  nn::Tape t(model.params.tensors, training, seed);
  const nn::Var lp = asr_forward(t, model, ex.mel, all.first(all.size() - 1));
  const nn::Var loss = nn::ops::nll_loss(t, lp, all.subspan(1));
  const double value = t.value(loss)(0, 0);
  if (!training) return {value, {}};
  return {value, t.backward(loss)};
}

}  // namespace

double asr_loss(const AsrModel& model, const AsrExample& example) {
  return loss_and_grad(model, example, false, 0).first;
}

AsrTrainResult train_asr(const std::vector<AsrExample>& examples, const nn::TransformerConfig& cfg,
                         const AsrTrainOptions& opts) {
  require(!examples.empty(), ErrorKind::EmptyInput, "recognizer training set is empty");
  require(opts.batch_size >= 1, ErrorKind::Parameter, "batch size must be >= 1");
  std::string chars;
  Eigen::Index dims = examples.front().mel.cols();
  double n = 0.0;
  RowVector sum = RowVector::Zero(dims), sq = RowVector::Zero(dims);
  for (const auto& ex : examples) {
    require(ex.mel.cols() == dims && ex.mel.rows() > 0, ErrorKind::Parameter,
            "recognizer examples must share a non-empty mel layout");
    chars += ex.transcript;
    sum += ex.mel.colwise().sum();
    sq += ex.mel.array().square().colwise().sum().matrix();
    n += static_cast<double>(ex.mel.rows());
  }

  AsrTrainResult result;
  result.model = init_asr(cfg, static_cast<std::size_t>(dims), Vocabulary::characters(chars));
  const RowVector mean = sum / n;
  RowVector stdev = ((sq / n).array() - mean.array().square()).max(0.0).sqrt();
  for (Eigen::Index i = 0; i < dims; ++i) {
    if (!(stdev[i] > 1e-8)) stdev[i] = 1.0;
  }
  auto& params = result.model.params.tensors;
  params.value("norm.in.mean") = mean;
  params.value("norm.in.std") = stdev;

  nn::AdamState adam = nn::make_adam(params, opts.lr);
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  for (std::size_t step = 0; step < opts.steps; ++step) {
    nn::Gradients grads = nn::zero_gradients(params);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < opts.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      auto [loss, g] = loss_and_grad(result.model, examples[order[cursor++]], true,
                                     opts.seed * 1000003ULL + step * 131ULL + b);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::TrainingDivergence, "recognizer loss became non-finite at step " + std::to_string(step));
      }
      batch_loss += loss;
      nn::accumulate(grads, g, 1.0 / static_cast<double>(opts.batch_size));
    }
    if (opts.grad_clip > 0.0) {
      const double norm = nn::global_norm(grads);
      if (norm > opts.grad_clip) {
        for (auto& g : grads) g *= opts.grad_clip / norm;
      }
    }
    nn::adam_step(params, grads, adam);
    result.losses.push_back(batch_loss / static_cast<double>(opts.batch_size));
  }
  return result;
}

void save_asr(const AsrModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "ssr-checkpoint";
  j["version"] = 1;
  j["kind"] = "asr";
  j["config"] = nn::detail::config_to_json(model.params.config);
  j["input_dim"] = model.params.input_dim;
  j["vocabulary"] = model.vocab.tokens();
  j["tensors"] = nn::detail::store_to_json(model.params.tensors);
  nn::detail::write_json(j, path);
}

AsrModel load_asr(const std::filesystem::path& path) {
  const auto j = nn::detail::read_json(path);
  try {
    require(j.at("format") == "ssr-checkpoint" && j.at("kind") == "asr", ErrorKind::Io,
            path.string() + ": not a recognizer checkpoint");
    AsrModel model;
    model.vocab = Vocabulary(j.at("vocabulary").get<std::vector<std::string>>());
    model.params.config = nn::detail::config_from_json(j.at("config"));
    model.params.input_dim = j.at("input_dim").get<std::size_t>();
    model.params.vocab_size = model.vocab.size();
    model.params.tensors = nn::detail::store_from_json(j.at("tensors"));
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, path.string() + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace ssr::asr
