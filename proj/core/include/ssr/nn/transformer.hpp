#pragma once

#include "ssr/nn/params.hpp"
#include "ssr/nn/tape.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssr::nn {

struct TransformerConfig {
  std::size_t d_model = 32;
  std::size_t n_heads = 4;
  std::size_t d_ff = 64;
  std::size_t n_enc_layers = 2;
  std::size_t n_dec_layers = 0;
  double dropout = 0.0;
  std::size_t relpos_clip = 100;
  std::size_t session_dim = 32;
  std::uint64_t seed = 0;

  // Every violated invariant, empty when valid.
  std::vector<std::string> problems() const;
  void validate() const;

  std::size_t head_dim() const noexcept { return d_model / n_heads; }

  friend bool operator==(const TransformerConfig&, const TransformerConfig&) = default;
};

// EMG-to-mel transduction: 8 heads, 768/3072, dropout 0.2, six layers.
TransformerConfig transduction_preset();
// Recognition encoder-decoder: 8 heads, 512/2048, dropout 0.1, 6 + 6 layers.
TransformerConfig asr_preset();
// Desk-scale preset used by the shipped toy pipeline.
TransformerConfig toy_preset();
// Smallest shapes, for gradient checks.
TransformerConfig tiny_preset();
TransformerConfig preset_by_name(std::string_view name);

/// Config plus the learnable tensors of an encoder (and optionally decoder).
struct TransformerParams {
  TransformerConfig config;
  ParamStore tensors;
  std::vector<std::string> sessions;
  std::size_t input_dim = 0;
  std::size_t vocab_size = 0;  // 0 for encoder-only models

  Eigen::Index session_index(std::string_view session_id) const;
};

/// Encoder tensors: input projection, session table/projection (when
/// `sessions` is non-empty), n_enc_layers blocks and a final norm.
TransformerParams init_encoder(const TransformerConfig& cfg, std::size_t input_dim,
                               std::vector<std::string> sessions);

/// Adds token embeddings, n_dec_layers decoder blocks, final norm and the
/// vocabulary projection to `params`.
void add_decoder(TransformerParams& params, std::size_t vocab_size);

// Recorded building blocks. `prefix` names the tensors of one sublayer.
Var linear(Tape& t, std::string_view prefix, Var x);
Var multi_head_attention(Tape& t, const TransformerConfig& cfg, std::string_view prefix, Var query,
                         Var memory, bool relative_positions, const Mask* mask);
Var feed_forward(Tape& t, std::string_view prefix, Var x);

/// Input projection + session embedding, then pre-norm self-attention blocks.
Var encoder_forward(Tape& t, const TransformerParams& params, Var x,
                    std::optional<Eigen::Index> session);

/// Causal decoder over `tokens` attending to `memory`; returns per-position
/// next-token log-probabilities (tokens x vocab).
Var decoder_forward(Tape& t, const TransformerParams& params, std::span<const Eigen::Index> tokens,
                    Var memory);

/// Eval-mode encoder output (frames x d_model).
Matrix encoder_forward(const TransformerParams& params, const Matrix& x, std::string_view session_id);

}  // namespace ssr::nn
