#include "ssr/nn/transducer.hpp"

#include "../text_io.hpp"
#include "checkpoint.hpp"
#include "ssr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace ssr::nn {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "euclidean") return LossKind::Euclidean;
  if (name == "mse") return LossKind::Mse;
  fail(ErrorKind::Parameter, "unknown loss '" + std::string(name) + "' (expected euclidean or mse)");
}

double transduction_loss(const Matrix& pred, const Matrix& target, LossKind kind) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorKind::Parameter,
          "prediction and target shapes differ");
  require(pred.size() > 0, ErrorKind::EmptyInput, "loss over an empty matrix");
  const Matrix r = pred - target;
  if (kind == LossKind::Mse) return r.squaredNorm() / static_cast<double>(r.size());
  return r.rowwise().norm().mean();
}

TransducerModel init_transducer(const TransformerConfig& cfg, std::size_t input_dim,
                                std::size_t output_dim, std::vector<std::string> sessions) {
  require(output_dim >= 1, ErrorKind::Parameter, "transducer output dim must be >= 1");
  TransducerModel model;
  model.params = init_encoder(cfg, input_dim, std::move(sessions));
  model.output_dim = output_dim;

  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  std::uniform_real_distribution<double> dist(-bound, bound);
  const auto d = static_cast<Eigen::Index>(cfg.d_model), o = static_cast<Eigen::Index>(output_dim);
  Matrix w(d, o), b(1, o);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
  auto& s = model.params.tensors;
  s.add("out_proj.w", std::move(w));
  s.add("out_proj.b", std::move(b));
  const auto in = static_cast<Eigen::Index>(input_dim);
  s.add("norm.in.mean", Matrix::Zero(1, in), false);
  s.add("norm.in.std", Matrix::Ones(1, in), false);
  s.add("norm.out.mean", Matrix::Zero(1, o), false);
  s.add("norm.out.std", Matrix::Ones(1, o), false);
  return model;
}

Var transducer_forward(Tape& t, const TransducerModel& model, const Matrix& features,
                       std::string_view session_id) {
  const auto& s = model.params.tensors;
  const RowVector in_mean = s.value("norm.in.mean").row(0);
  const RowVector in_std = s.value("norm.in.std").row(0);
  require(features.cols() == in_mean.size(), ErrorKind::Parameter,
          "transducer expects " + std::to_string(in_mean.size()) + " feature dims, got " +
              std::to_string(features.cols()));
  const Matrix x = (features.rowwise() - in_mean).array().rowwise() / in_std.array();

  std::optional<Eigen::Index> session;
  if (!model.params.sessions.empty()) session = model.params.session_index(session_id);
  const Var h = encoder_forward(t, model.params, t.constant(x), session);
  const Var y = linear(t, "out_proj", h);
  return ops::affine_cols(t, y, s.value("norm.out.std").row(0), s.value("norm.out.mean").row(0));
}

Matrix transduce(const TransducerModel& model, const Matrix& features, std::string_view session_id) {
  Tape t(model.params.tensors, false);
  return t.value(transducer_forward(t, model, features, session_id));
}

namespace {

std::pair<RowVector, RowVector> column_stats(const std::vector<const Matrix*>& mats) {
  const Eigen::Index d = mats.front()->cols();
  RowVector sum = RowVector::Zero(d), sq = RowVector::Zero(d);
  double n = 0.0;
  for (const Matrix* m : mats) {
    sum += m->colwise().sum();
    sq += m->array().square().colwise().sum().matrix();
    n += static_cast<double>(m->rows());
  }
  RowVector mean = sum / n;
  RowVector var = (sq / n).array() - mean.array().square();
  RowVector stdev = var.array().max(0.0).sqrt();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(stdev[i] > 1e-8)) stdev[i] = 1.0;
  }
  return {mean, stdev};
}

Var loss_node(Tape& t, Var pred, const Matrix& target, LossKind kind) {
  return kind == LossKind::Mse ? ops::mse_loss(t, pred, target) : ops::euclidean_loss(t, pred, target);
}

}  // namespace

void fit_normalization(TransducerModel& model, const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) return;
  std::vector<const Matrix*> feats, targets;
  for (const auto& p : pairs) {
    feats.push_back(&p.features);
    targets.push_back(&p.target);
  }
  auto [im, is] = column_stats(feats);
  auto [om, os] = column_stats(targets);
  auto& s = model.params.tensors;
  s.value("norm.in.mean") = im;
  s.value("norm.in.std") = is;
  s.value("norm.out.mean") = om;
  s.value("norm.out.std") = os;
}

std::pair<double, Gradients> transducer_loss_and_grad(const TransducerModel& model,
                                                      const TrainingPair& pair, LossKind loss,
                                                      std::uint64_t dropout_seed) {
  require(pair.features.rows() == pair.target.rows(), ErrorKind::Parameter,
          "training pair has " + std::to_string(pair.features.rows()) + " feature frames but " +
              std::to_string(pair.target.rows()) + " target frames");
  Tape t(model.params.tensors, true, dropout_seed);
  const Var pred = transducer_forward(t, model, pair.features, pair.session_id);
  const Var l = loss_node(t, pred, pair.target, loss);
  const double value = t.value(l)(0, 0);
  return {value, t.backward(l)};
}

TrainResult train_transducer(const std::vector<TrainingPair>& corpus, const TransformerConfig& cfg,
                             const TrainOptions& opts) {
  require(!corpus.empty(), ErrorKind::EmptyInput, "training corpus is empty");
  require(opts.batch_size >= 1, ErrorKind::Parameter, "batch size must be >= 1");
  std::set<std::string> session_set;
  for (const auto& p : corpus) session_set.insert(p.session_id);

  TrainResult result;
  result.model = init_transducer(cfg, static_cast<std::size_t>(corpus.front().features.cols()),
                                 static_cast<std::size_t>(corpus.front().target.cols()),
                                 {session_set.begin(), session_set.end()});
  fit_normalization(result.model, corpus);
  if (opts.steps == 0) return result;

  auto& params = result.model.params.tensors;
  AdamState adam = make_adam(params, opts.lr);
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  for (std::size_t step = 0; step < opts.steps; ++step) {
    Gradients grads = zero_gradients(params);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < opts.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto& pair = corpus[order[cursor++]];
      auto [loss, g] = transducer_loss_and_grad(result.model, pair, opts.loss,
                                                opts.seed * 1000003ULL + step * 131ULL + b);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::TrainingDivergence, "loss became non-finite at step " + std::to_string(step));
      }
      batch_loss += loss;
      accumulate(grads, g, 1.0 / static_cast<double>(opts.batch_size));
    }
    if (opts.grad_clip > 0.0) {
      const double norm = global_norm(grads);
      if (norm > opts.grad_clip) {
        for (auto& g : grads) g *= opts.grad_clip / norm;
      }
    }
    adam_step(params, grads, adam);
    result.losses.push_back(batch_loss / static_cast<double>(opts.batch_size));
  }
  return result;
}

double corpus_loss(const TransducerModel& model, const std::vector<TrainingPair>& corpus, LossKind kind) {
  require(!corpus.empty(), ErrorKind::EmptyInput, "corpus is empty");
  double total = 0.0;
  for (const auto& p : corpus) total += transduction_loss(transduce(model, p.features, p.session_id), p.target, kind);
  return total / static_cast<double>(corpus.size());
}

void save_transducer(const TransducerModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "ssr-checkpoint";
  j["version"] = 1;
  j["kind"] = "transducer";
  j["config"] = detail::config_to_json(model.params.config);
  j["input_dim"] = model.params.input_dim;
  j["output_dim"] = model.output_dim;
  j["sessions"] = model.params.sessions;
  j["tensors"] = detail::store_to_json(model.params.tensors);
  detail::write_json(j, path);
}

TransducerModel load_transducer(const std::filesystem::path& path) {
  const auto j = detail::read_json(path);
  try {
    require(j.at("format") == "ssr-checkpoint" && j.at("kind") == "transducer", ErrorKind::Io,
            path.string() + ": not a transducer checkpoint");
    TransducerModel model;
    model.params.config = detail::config_from_json(j.at("config"));
    model.params.input_dim = j.at("input_dim").get<std::size_t>();
    model.output_dim = j.at("output_dim").get<std::size_t>();
    model.params.sessions = j.at("sessions").get<std::vector<std::string>>();
    model.params.tensors = detail::store_from_json(j.at("tensors"));
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, path.string() + ": malformed checkpoint: " + e.what());
  }
}

void write_loss_curve(const std::vector<double>& losses, const std::filesystem::path& path) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out += std::to_string(i) + ',';
    ssr::detail::append_double(out, losses[i]);
    out += '\n';
  }
  ssr::detail::write_file(path, out);
}

}  // namespace ssr::nn
