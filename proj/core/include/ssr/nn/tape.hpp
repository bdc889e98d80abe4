#pragma once

#include "ssr/nn/params.hpp"
#include "ssr/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace ssr::nn {

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Handle to a node on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const noexcept { return id >= 0; }
};

// Records a forward computation over matrices so that exact gradients can be
// propagated back to the parameters of a single ParamStore.
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self)>;

  explicit Tape(const ParamStore& params, bool training = false, std::uint64_t seed = 0);

  bool training() const noexcept { return training_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  const ParamStore& params() const noexcept { return *params_; }

  Var constant(Matrix value);
  // Each parameter appears on the tape at most once; repeated lookups share a node.
  Var param(std::string_view name);

  const Matrix& value(Var v) const;
  // Lazily zero-initialized gradient buffer for `v`.
  Matrix& grad(Var v);

  // Adds a computed node; `backward` reads grad(self) and accumulates into parents.
  Var record(Matrix value, Backward backward);

  // Seeds d(loss)/d(loss) = 1 and returns gradients for every parameter.
  // `loss` must be 1x1; each tape may be differentiated once.
  Gradients backward(Var loss);

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    std::int64_t param_index = -1;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  const ParamStore* params_;
  bool training_;
  bool consumed_ = false;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> param_nodes_;
};

// --- plain (non-recording) kernels --------------------------------------------

/// softmax(Q K^T / sqrt(d_k) + bias) V with masked entries forced to weight 0.
/// mask(i, j) == true hides key j from query i. Optionally returns the weights.
Matrix scaled_dot_product_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                    const Matrix* bias = nullptr, const Mask* mask = nullptr,
                                    Matrix* weights_out = nullptr);

/// bias(i, j) = table[clamp(j - i, -clip, clip) + clip].
Matrix relpos_bias(Eigen::Index n, Eigen::Index m, std::span<const double> table, std::size_t clip);

Mask causal_mask(Eigen::Index n);

// --- recorded ops ---------------------------------------------------------------

namespace ops {

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
// a (n x d) + row (1 x d) broadcast over rows.
Var add_row(Tape& t, Var a, Var row);
Var scale(Tape& t, Var a, double s);
Var gelu(Tape& t, Var a);
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
Var slice_cols(Tape& t, Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(Tape& t, std::span<const Var> parts);
Var gather_rows(Tape& t, Var table, std::span<const Eigen::Index> rows);
// Row `head` of a heads x (2*clip+1) table expanded to an n x m bias.
Var relpos_bias(Tape& t, Var table, Eigen::Index head, Eigen::Index n, Eigen::Index m,
                std::size_t clip);
Var attention(Tape& t, Var q, Var k, Var v, std::optional<Var> bias, const Mask* mask);
// Inverted dropout; identity outside training mode or when rate == 0.
Var dropout(Tape& t, Var a, double rate);
// a * col_scale + col_shift with constant per-column affine terms.
Var affine_cols(Tape& t, Var a, const RowVector& col_scale, const RowVector& col_shift);
Var log_softmax_rows(Tape& t, Var a);

// Losses return 1x1 nodes.
Var euclidean_loss(Tape& t, Var pred, const Matrix& target);
Var mse_loss(Tape& t, Var pred, const Matrix& target);
Var nll_loss(Tape& t, Var log_probs, std::span<const Eigen::Index> targets);

}  // namespace ops
}  // namespace ssr::nn
