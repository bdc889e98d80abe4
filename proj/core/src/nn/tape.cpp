#include "ssr/nn/tape.hpp"

#include "ssr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ssr::nn {

Tape::Tape(const ParamStore& params, bool training, std::uint64_t seed)
    : params_(&params), training_(training), rng_(seed), param_nodes_(params.size(), -1) {}

Tape::Node& Tape::node(Var v) {
  require(v.valid() && static_cast<std::size_t>(v.id) < nodes_.size(), ErrorKind::State,
          "variable does not belong to this tape");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
  require(v.valid() && static_cast<std::size_t>(v.id) < nodes_.size(), ErrorKind::State,
          "variable does not belong to this tape");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::constant(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::param(std::string_view name) {
  const std::size_t idx = params_->index(name);
  if (param_nodes_[idx] >= 0) return Var{param_nodes_[idx]};
  Var v = record(params_->value(idx), nullptr);
  nodes_.back().param_index = static_cast<std::int64_t>(idx);
  param_nodes_[idx] = v.id;
  return v;
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

Matrix& Tape::grad(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::record(Matrix value, Backward backward) {
  require(!consumed_, ErrorKind::State, "tape already differentiated; record a new forward pass");
  nodes_.push_back(Node{std::move(value), Matrix{}, std::move(backward), -1});
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Gradients Tape::backward(Var loss) {
  require(!nodes_.empty(), ErrorKind::State, "backward called before any forward pass");
  require(!consumed_, ErrorKind::State, "backward already ran on this tape");
  const Matrix& lv = value(loss);
  require(lv.rows() == 1 && lv.cols() == 1, ErrorKind::Parameter, "backward needs a scalar loss");
  consumed_ = true;

  grad(loss)(0, 0) = 1.0;
  for (auto i = static_cast<std::int32_t>(loss.id); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward && n.grad.size() != 0) n.backward(*this, Var{i});
  }

  Gradients grads = zero_gradients(*params_);
  for (std::size_t p = 0; p < param_nodes_.size(); ++p) {
    if (param_nodes_[p] < 0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(param_nodes_[p])];
    if (n.grad.size() != 0) grads[p] = n.grad;
  }
  return grads;
}

// --- plain kernels ------------------------------------------------------------------

namespace {

// Row-wise softmax of `logits` (entries may be -inf). Throws on a row with no
// finite entry.
Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    require(std::isfinite(mx), ErrorKind::DegenerateMask,
            "attention row " + std::to_string(i) + " has every key masked");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double e = std::exp(logits(i, j) - mx);
      p(i, j) = e;
      sum += e;
    }
    p.row(i) /= sum;
  }
  return p;
}

Matrix attention_logits(const Matrix& q, const Matrix& k, const Matrix* bias, const Mask* mask) {
  require(q.cols() == k.cols(), ErrorKind::Parameter, "query/key widths differ");
  Matrix s = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
  if (bias) {
    require(bias->rows() == s.rows() && bias->cols() == s.cols(), ErrorKind::Parameter,
            "attention bias has wrong shape");
    s += *bias;
  }
  if (mask) {
    require(mask->rows() == s.rows() && mask->cols() == s.cols(), ErrorKind::Parameter,
            "attention mask has wrong shape");
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        if ((*mask)(i, j)) s(i, j) = neg_inf;
      }
    }
  }
  return s;
}

}  // namespace

Matrix scaled_dot_product_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                    const Matrix* bias, const Mask* mask, Matrix* weights_out) {
  require(k.rows() == v.rows(), ErrorKind::Parameter, "keys and values differ in length");
  require(k.rows() >= 1, ErrorKind::EmptyInput, "attention needs at least one key");
  Matrix p = softmax_rows(attention_logits(q, k, bias, mask));
  Matrix out = p * v;
  if (weights_out) *weights_out = std::move(p);
  return out;
}

Matrix relpos_bias(Eigen::Index n, Eigen::Index m, std::span<const double> table, std::size_t clip) {
  require(table.size() == 2 * clip + 1, ErrorKind::Parameter,
          "relative position table needs 2*clip+1 entries");
  const auto c = static_cast<Eigen::Index>(clip);
  Matrix bias(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      bias(i, j) = table[static_cast<std::size_t>(std::clamp(j - i, -c, c) + c)];
    }
  }
  return bias;
}

Mask causal_mask(Eigen::Index n) {
  Mask m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = j > i;
  }
  return m;
}

// --- recorded ops ------------------------------------------------------------------

namespace ops {

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require(av.cols() == bv.rows(), ErrorKind::Parameter,
          "matmul shape mismatch " + std::to_string(av.rows()) + "x" + std::to_string(av.cols()) +
              " * " + std::to_string(bv.rows()) + "x" + std::to_string(bv.cols()));
  return t.record(av * bv, [a, b](Tape& tp, Var self) {
    const Matrix g = tp.grad(self);
    tp.grad(a).noalias() += g * tp.value(b).transpose();
    tp.grad(b).noalias() += tp.value(a).transpose() * g;
  });
}

Var add(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), ErrorKind::Parameter,
          "add shape mismatch");
  return t.record(av + bv, [a, b](Tape& tp, Var self) {
    const Matrix g = tp.grad(self);
    tp.grad(a) += g;
    tp.grad(b) += g;
  });
}

Var add_row(Tape& t, Var a, Var row) {
  const Matrix& av = t.value(a);
  const Matrix& rv = t.value(row);
  require(rv.rows() == 1 && rv.cols() == av.cols(), ErrorKind::Parameter,
          "add_row expects a 1 x " + std::to_string(av.cols()) + " row");
  Matrix out = av.rowwise() + rv.row(0);
  return t.record(std::move(out), [a, row](Tape& tp, Var self) {
    const Matrix g = tp.grad(self);
    tp.grad(a) += g;
    tp.grad(row) += g.colwise().sum();
  });
}

Var scale(Tape& t, Var a, double s) {
  return t.record(t.value(a) * s, [a, s](Tape& tp, Var self) { tp.grad(a) += s * tp.grad(self); });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Tape& t, Var a) {
  const Matrix& x = t.value(a);
  Matrix y = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
  return t.record(std::move(y), [a](Tape& tp, Var self) {
    const Matrix& x = tp.value(a);
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      const double u = kGeluC * (v + kGeluA * v * v * v);
      const double th = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
      ga.data()[i] += g.data()[i] * d;
    }
  });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = t.value(x);
  const Matrix& gv = t.value(gamma);
  const Matrix& bv = t.value(beta);
  const Eigen::Index n = xv.rows(), d = xv.cols();
  require(gv.rows() == 1 && gv.cols() == d && bv.rows() == 1 && bv.cols() == d,
          ErrorKind::Parameter, "layer norm scale/shift must be 1 x d");

  Matrix xhat(n, d);
  Vector inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std[i];
  }
  Matrix y = (xhat.array().rowwise() * gv.row(0).array()).rowwise() + bv.row(0).array();
  return t.record(std::move(y), [x, gamma, beta, xhat = std::move(xhat),
                                 inv_std = std::move(inv_std)](Tape& tp, Var self) {
    const Matrix g = tp.grad(self);
    const Matrix& gv = tp.value(gamma);
    tp.grad(gamma) += (g.array() * xhat.array()).colwise().sum().matrix();
    tp.grad(beta) += g.colwise().sum();
    const Matrix dxhat = g.array().rowwise() * gv.row(0).array();
    Matrix& gx = tp.grad(x);
    const double d = static_cast<double>(xhat.cols());
    for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
      const double mean_d = dxhat.row(i).sum() / d;
      const double mean_dx = dxhat.row(i).dot(xhat.row(i)) / d;
      gx.row(i).array() +=
          inv_std[i] * (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx);
    }
  });
}

Var slice_cols(Tape& t, Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& av = t.value(a);
  require(start >= 0 && count >= 0 && start + count <= av.cols(), ErrorKind::Parameter,
          "column slice out of range");
  return t.record(av.middleCols(start, count), [a, start, count](Tape& tp, Var self) {
    tp.grad(a).middleCols(start, count) += tp.grad(self);
  });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::Parameter, "concat needs at least one part");
  const Eigen::Index rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    require(t.value(p).rows() == rows, ErrorKind::Parameter, "concat parts differ in rows");
    cols += t.value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, t.value(p).cols()) = t.value(p);
    c += t.value(p).cols();
  }
  std::vector<Var> owned(parts.begin(), parts.end());
  return t.record(std::move(out), [owned = std::move(owned)](Tape& tp, Var self) {
    const Matrix g = tp.grad(self);
    Eigen::Index c = 0;
    for (Var p : owned) {
      const Eigen::Index w = tp.value(p).cols();
      tp.grad(p) += g.middleCols(c, w);
      c += w;
    }
  });
}

Var gather_rows(Tape& t, Var table, std::span<const Eigen::Index> rows) {
  const Matrix& tv = t.value(table);
  Matrix out(static_cast<Eigen::Index>(rows.size()), tv.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] >= 0 && rows[r] < tv.rows(), ErrorKind::Lookup,
            "embedding row " + std::to_string(rows[r]) + " out of range");
    out.row(static_cast<Eigen::Index>(r)) = tv.row(rows[r]);
  }
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  return t.record(std::move(out), [table, idx = std::move(idx)](Tape& tp, Var self) {
    const Matrix g = tp.grad(self);
    Matrix& gt = tp.grad(table);
    for (std::size_t r = 0; r < idx.size(); ++r) gt.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var relpos_bias(Tape& t, Var table, Eigen::Index head, Eigen::Index n, Eigen::Index m,
                std::size_t clip) {
  const Matrix& tv = t.value(table);
  require(head >= 0 && head < tv.rows(), ErrorKind::Parameter, "relpos head out of range");
  require(tv.cols() == static_cast<Eigen::Index>(2 * clip + 1), ErrorKind::Parameter,
          "relative position table needs 2*clip+1 columns");
  Matrix bias = nn::relpos_bias(n, m, row_span(tv, head), clip);
  return t.record(std::move(bias), [table, head, clip](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    Matrix& gt = tp.grad(table);
    const auto c = static_cast<Eigen::Index>(clip);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) gt(head, std::clamp(j - i, -c, c) + c) += g(i, j);
    }
  });
}

Var attention(Tape& t, Var q, Var k, Var v, std::optional<Var> bias, const Mask* mask) {
  Matrix weights;
  Matrix out = nn::scaled_dot_product_attention(t.value(q), t.value(k), t.value(v),
                                                bias ? &t.value(*bias) : nullptr, mask, &weights);
  return t.record(std::move(out), [q, k, v, bias, p = std::move(weights)](Tape& tp, Var self) {
    const Matrix g = tp.grad(self);
    const Matrix& qv = tp.value(q);
    const Matrix& kv = tp.value(k);
    tp.grad(v).noalias() += p.transpose() * g;
    const Matrix dp = g * tp.value(v).transpose();
    // Softmax Jacobian; masked entries have p == 0 and receive no gradient.
    Matrix ds = p.array() * (dp.colwise() - (dp.array() * p.array()).rowwise().sum().matrix()).array();
    if (bias) tp.grad(*bias) += ds;
    const double inv = 1.0 / std::sqrt(static_cast<double>(qv.cols()));
    tp.grad(q).noalias() += inv * ds * kv;
    tp.grad(k).noalias() += inv * ds.transpose() * qv;
  });
}

Var dropout(Tape& t, Var a, double rate) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::Parameter, "dropout rate must lie in [0, 1)");
  if (!t.training() || rate == 0.0) return a;
  const Matrix& av = t.value(a);
  Matrix mask(av.rows(), av.cols());
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(t.rng()) ? s : 0.0;
  Matrix out = av.cwiseProduct(mask);
  return t.record(std::move(out), [a, mask = std::move(mask)](Tape& tp, Var self) {
    tp.grad(a) += tp.grad(self).cwiseProduct(mask);
  });
}

Var affine_cols(Tape& t, Var a, const RowVector& col_scale, const RowVector& col_shift) {
  const Matrix& av = t.value(a);
  require(col_scale.size() == av.cols() && col_shift.size() == av.cols(), ErrorKind::Parameter,
          "affine_cols expects per-column scale and shift");
  Matrix out = (av.array().rowwise() * col_scale.array()).rowwise() + col_shift.array();
  return t.record(std::move(out), [a, col_scale](Tape& tp, Var self) {
    tp.grad(a).array() += tp.grad(self).array().rowwise() * col_scale.array();
  });
}

Var log_softmax_rows(Tape& t, Var a) {
  const Matrix& av = t.value(a);
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    const double mx = av.row(i).maxCoeff();
    const double lse = mx + std::log((av.row(i).array() - mx).exp().sum());
    out.row(i) = av.row(i).array() - lse;
  }
  return t.record(std::move(out), [a](Tape& tp, Var self) {
    const Matrix g = tp.grad(self);
    const Matrix p = tp.value(self).array().exp();
    tp.grad(a) += g - (p.array().colwise() * g.rowwise().sum().array()).matrix();
  });
}

Var euclidean_loss(Tape& t, Var pred, const Matrix& target) {
  const Matrix& pv = t.value(pred);
  require(pv.rows() == target.rows() && pv.cols() == target.cols(), ErrorKind::Parameter,
          "loss shape mismatch");
  require(pv.rows() >= 1, ErrorKind::EmptyInput, "loss over zero frames");
  const Matrix residual = pv - target;
  const Vector norms = residual.rowwise().norm();
  Matrix out(1, 1);
  out(0, 0) = norms.mean();
  return t.record(std::move(out), [pred, residual, norms](Tape& tp, Var self) {
    const double g = tp.grad(self)(0, 0) / static_cast<double>(residual.rows());
    Matrix& gp = tp.grad(pred);
    for (Eigen::Index i = 0; i < residual.rows(); ++i) {
      // Subgradient 0 at a zero residual.
      if (norms[i] > 0.0) gp.row(i) += (g / norms[i]) * residual.row(i);
    }
  });
}

Var mse_loss(Tape& t, Var pred, const Matrix& target) {
  const Matrix& pv = t.value(pred);
  require(pv.rows() == target.rows() && pv.cols() == target.cols(), ErrorKind::Parameter,
          "loss shape mismatch");
  require(pv.size() >= 1, ErrorKind::EmptyInput, "loss over zero elements");
  const Matrix residual = pv - target;
  Matrix out(1, 1);
  out(0, 0) = residual.squaredNorm() / static_cast<double>(residual.size());
  return t.record(std::move(out), [pred, residual](Tape& tp, Var self) {
    const double g = tp.grad(self)(0, 0) * 2.0 / static_cast<double>(residual.size());
    tp.grad(pred) += g * residual;
  });
}

Var nll_loss(Tape& t, Var log_probs, std::span<const Eigen::Index> targets) {
  const Matrix& lp = t.value(log_probs);
  require(static_cast<Eigen::Index>(targets.size()) == lp.rows(), ErrorKind::Parameter,
          "one target per row required");
  require(lp.rows() >= 1, ErrorKind::EmptyInput, "loss over zero rows");
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    require(targets[i] >= 0 && targets[i] < lp.cols(), ErrorKind::Vocabulary, "target id out of range");
    s -= lp(static_cast<Eigen::Index>(i), targets[i]);
  }
  Matrix out(1, 1);
  out(0, 0) = s / static_cast<double>(targets.size());
  std::vector<Eigen::Index> idx(targets.begin(), targets.end());
  return t.record(std::move(out), [log_probs, idx = std::move(idx)](Tape& tp, Var self) {
    const double g = tp.grad(self)(0, 0) / static_cast<double>(idx.size());
    Matrix& gl = tp.grad(log_probs);
    for (std::size_t i = 0; i < idx.size(); ++i) gl(static_cast<Eigen::Index>(i), idx[i]) -= g;
  });
}

}  // namespace ops
}  // namespace ssr::nn
