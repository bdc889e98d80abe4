#include "ssr/nn/transformer.hpp"

#include "ssr/error.hpp"

#include <cmath>
#include <sstream>

namespace ssr::nn {

std::vector<std::string> TransformerConfig::problems() const {
  std::vector<std::string> out;
  if (d_model == 0) out.emplace_back("d_model must be >= 1");
  if (n_heads == 0) out.emplace_back("n_heads must be >= 1");
  if (d_model && n_heads && d_model % n_heads != 0) {
    out.emplace_back("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                     std::to_string(n_heads) + ")");
  }
  if (d_ff == 0) out.emplace_back("d_ff must be >= 1");
  if (n_enc_layers == 0) out.emplace_back("n_enc_layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) out.emplace_back("dropout must lie in [0, 1)");
  if (relpos_clip == 0) out.emplace_back("relpos_clip must be >= 1");
  if (session_dim == 0) out.emplace_back("session_dim must be >= 1");
  return out;
}

void TransformerConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::ostringstream ss;
  ss << "invalid transformer config:";
  for (const auto& s : p) ss << "\n  - " << s;
  fail(ErrorKind::Config, ss.str());
}

TransformerConfig transduction_preset() {
  TransformerConfig c;
  c.d_model = 768;
  c.n_heads = 8;
  c.d_ff = 3072;
  c.n_enc_layers = 6;
  c.n_dec_layers = 0;
  c.dropout = 0.2;
  c.relpos_clip = 100;
  c.session_dim = 32;
  return c;
}

TransformerConfig asr_preset() {
  TransformerConfig c;
  c.d_model = 512;
  c.n_heads = 8;
  c.d_ff = 2048;
  c.n_enc_layers = 6;
  c.n_dec_layers = 6;
  c.dropout = 0.1;
  c.relpos_clip = 100;
  c.session_dim = 32;
  return c;
}

TransformerConfig toy_preset() {
  TransformerConfig c;
  c.d_model = 32;
  c.n_heads = 4;
  c.d_ff = 64;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.dropout = 0.0;
  c.relpos_clip = 100;
  c.session_dim = 8;
  return c;
}

TransformerConfig tiny_preset() {
  TransformerConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.dropout = 0.0;
  c.relpos_clip = 3;
  c.session_dim = 4;
  return c;
}

TransformerConfig preset_by_name(std::string_view name) {
  if (name == "transduction") return transduction_preset();
  if (name == "asr") return asr_preset();
  if (name == "toy") return toy_preset();
  if (name == "tiny") return tiny_preset();
  fail(ErrorKind::Config, "unknown transformer preset '" + std::string(name) +
                              "' (expected transduction, asr, toy or tiny)");
}

Eigen::Index TransformerParams::session_index(std::string_view session_id) const {
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (sessions[i] == session_id) return static_cast<Eigen::Index>(i);
  }
  fail(ErrorKind::Lookup, "unknown session id '" + std::string(session_id) + "'");
}

// --- initialization ------------------------------------------------------------------

namespace {

Matrix uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void add_linear(ParamStore& s, std::mt19937_64& rng, const std::string& prefix, std::size_t in,
                std::size_t out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  const auto i = static_cast<Eigen::Index>(in), o = static_cast<Eigen::Index>(out);
  s.add(prefix + ".w", uniform(rng, i, o, bound));
  s.add(prefix + ".b", uniform(rng, 1, o, bound));
}

void add_norm(ParamStore& s, const std::string& prefix, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  s.add(prefix + ".g", Matrix::Ones(1, n));
  s.add(prefix + ".b", Matrix::Zero(1, n));
}

void add_attention(ParamStore& s, std::mt19937_64& rng, const std::string& prefix,
                   const TransformerConfig& cfg, bool relative_positions) {
  for (const char* p : {"q", "k", "v", "o"}) add_linear(s, rng, prefix + "." + p, cfg.d_model, cfg.d_model);
  if (relative_positions) {
    s.add(prefix + ".relpos", Matrix::Zero(static_cast<Eigen::Index>(cfg.n_heads),
                                           static_cast<Eigen::Index>(2 * cfg.relpos_clip + 1)));
  }
}

void add_ffn(ParamStore& s, std::mt19937_64& rng, const std::string& prefix, const TransformerConfig& cfg) {
  add_linear(s, rng, prefix + ".1", cfg.d_model, cfg.d_ff);
  add_linear(s, rng, prefix + ".2", cfg.d_ff, cfg.d_model);
}

std::string layer_prefix(const char* stack, std::size_t l) {
  return std::string(stack) + "." + std::to_string(l);
}

}  // namespace

TransformerParams init_encoder(const TransformerConfig& cfg, std::size_t input_dim,
                               std::vector<std::string> sessions) {
  cfg.validate();
  require(input_dim >= 1, ErrorKind::Parameter, "encoder input dim must be >= 1");
  TransformerParams p;
  p.config = cfg;
  p.input_dim = input_dim;
  p.sessions = std::move(sessions);
  std::mt19937_64 rng(cfg.seed);

  add_linear(p.tensors, rng, "in_proj", input_dim, cfg.d_model);
  if (!p.sessions.empty()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.session_dim));
    p.tensors.add("session.table", uniform(rng, static_cast<Eigen::Index>(p.sessions.size()),
                                           static_cast<Eigen::Index>(cfg.session_dim), bound));
    p.tensors.add("session.proj", uniform(rng, static_cast<Eigen::Index>(cfg.session_dim),
                                          static_cast<Eigen::Index>(cfg.d_model), bound));
  }
  for (std::size_t l = 0; l < cfg.n_enc_layers; ++l) {
    const auto pre = layer_prefix("enc", l);
    add_norm(p.tensors, pre + ".ln1", cfg.d_model);
    add_attention(p.tensors, rng, pre + ".attn", cfg, true);
    add_norm(p.tensors, pre + ".ln2", cfg.d_model);
    add_ffn(p.tensors, rng, pre + ".ffn", cfg);
  }
  add_norm(p.tensors, "enc.ln_f", cfg.d_model);
  return p;
}

void add_decoder(TransformerParams& p, std::size_t vocab_size) {
  const auto& cfg = p.config;
  require(cfg.n_dec_layers >= 1, ErrorKind::Config, "decoder needs n_dec_layers >= 1");
  require(vocab_size >= 1, ErrorKind::Parameter, "vocabulary must be non-empty");
  p.vocab_size = vocab_size;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  p.tensors.add("tok_emb", uniform(rng, static_cast<Eigen::Index>(vocab_size),
                                   static_cast<Eigen::Index>(cfg.d_model),
                                   1.0 / std::sqrt(static_cast<double>(cfg.d_model))));
  for (std::size_t l = 0; l < cfg.n_dec_layers; ++l) {
    const auto pre = layer_prefix("dec", l);
    add_norm(p.tensors, pre + ".ln1", cfg.d_model);
    add_attention(p.tensors, rng, pre + ".self", cfg, true);
    add_norm(p.tensors, pre + ".ln2", cfg.d_model);
    add_attention(p.tensors, rng, pre + ".cross", cfg, false);
    add_norm(p.tensors, pre + ".ln3", cfg.d_model);
    add_ffn(p.tensors, rng, pre + ".ffn", cfg);
  }
  add_norm(p.tensors, "dec.ln_f", cfg.d_model);
  add_linear(p.tensors, rng, "vocab_proj", cfg.d_model, vocab_size);
}

// --- forward ---------------------------------------------------------------------------

Var linear(Tape& t, std::string_view prefix, Var x) {
  const std::string p(prefix);
  return ops::add_row(t, ops::matmul(t, x, t.param(p + ".w")), t.param(p + ".b"));
}

namespace {

Var norm(Tape& t, const std::string& prefix, Var x) {
  return ops::layer_norm(t, x, t.param(prefix + ".g"), t.param(prefix + ".b"));
}

}  // namespace

Var multi_head_attention(Tape& t, const TransformerConfig& cfg, std::string_view prefix, Var query,
                         Var memory, bool relative_positions, const Mask* mask) {
  const std::string p(prefix);
  const Var q = linear(t, p + ".q", query);
  const Var k = linear(t, p + ".k", memory);
  const Var v = linear(t, p + ".v", memory);
  const auto dk = static_cast<Eigen::Index>(cfg.head_dim());
  const Eigen::Index n = t.value(query).rows(), m = t.value(memory).rows();

  std::optional<Var> table;
  if (relative_positions) table = t.param(p + ".relpos");

  std::vector<Var> heads;
  heads.reserve(cfg.n_heads);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dk;
    std::optional<Var> bias;
    if (table) bias = ops::relpos_bias(t, *table, static_cast<Eigen::Index>(h), n, m, cfg.relpos_clip);
    heads.push_back(ops::attention(t, ops::slice_cols(t, q, off, dk), ops::slice_cols(t, k, off, dk),
                                   ops::slice_cols(t, v, off, dk), bias, mask));
  }
  return linear(t, p + ".o", ops::concat_cols(t, heads));
}

Var feed_forward(Tape& t, std::string_view prefix, Var x) {
  const std::string p(prefix);
  return linear(t, p + ".2", ops::gelu(t, linear(t, p + ".1", x)));
}

Var encoder_forward(Tape& t, const TransformerParams& params, Var x,
                    std::optional<Eigen::Index> session) {
  const auto& cfg = params.config;
  require(t.value(x).rows() >= 1, ErrorKind::EmptyInput, "encoder input has no frames");
  require(t.value(x).cols() == static_cast<Eigen::Index>(params.input_dim), ErrorKind::Parameter,
          "encoder expects " + std::to_string(params.input_dim) + " input dims, got " +
              std::to_string(t.value(x).cols()));

  Var h = linear(t, "in_proj", x);
  if (session) {
    const Eigen::Index row = *session;
    const Var emb = ops::gather_rows(t, t.param("session.table"), std::span(&row, 1));
    h = ops::add_row(t, h, ops::matmul(t, emb, t.param("session.proj")));
  }
  for (std::size_t l = 0; l < cfg.n_enc_layers; ++l) {
    const auto pre = layer_prefix("enc", l);
    const Var a = norm(t, pre + ".ln1", h);
    h = ops::add(t, h, ops::dropout(t, multi_head_attention(t, cfg, pre + ".attn", a, a, true, nullptr),
                                    cfg.dropout));
    const Var f = norm(t, pre + ".ln2", h);
    h = ops::add(t, h, ops::dropout(t, feed_forward(t, pre + ".ffn", f), cfg.dropout));
  }
  return norm(t, "enc.ln_f", h);
}

Var decoder_forward(Tape& t, const TransformerParams& params, std::span<const Eigen::Index> tokens,
                    Var memory) {
  const auto& cfg = params.config;
  require(!tokens.empty(), ErrorKind::EmptyInput, "decoder needs at least one token");
  require(params.vocab_size > 0, ErrorKind::State, "model has no decoder");
  const Mask causal = causal_mask(static_cast<Eigen::Index>(tokens.size()));

  Var h = ops::gather_rows(t, t.param("tok_emb"), tokens);
  for (std::size_t l = 0; l < cfg.n_dec_layers; ++l) {
    const auto pre = layer_prefix("dec", l);
    const Var a = norm(t, pre + ".ln1", h);
    h = ops::add(t, h, ops::dropout(t, multi_head_attention(t, cfg, pre + ".self", a, a, true, &causal),
                                    cfg.dropout));
    const Var c = norm(t, pre + ".ln2", h);
    h = ops::add(t, h, ops::dropout(t, multi_head_attention(t, cfg, pre + ".cross", c, memory, false, nullptr),
                                    cfg.dropout));
    const Var f = norm(t, pre + ".ln3", h);
    h = ops::add(t, h, ops::dropout(t, feed_forward(t, pre + ".ffn", f), cfg.dropout));
  }
  const Var out = norm(t, "dec.ln_f", h);
  return ops::log_softmax_rows(t, linear(t, "vocab_proj", out));
}

Matrix encoder_forward(const TransformerParams& params, const Matrix& x, std::string_view session_id) {
  Tape t(params.tensors, false);
  std::optional<Eigen::Index> session;
  if (!params.sessions.empty()) session = params.session_index(session_id);
  return t.value(encoder_forward(t, params, t.constant(x), session));
}

}  // namespace ssr::nn
