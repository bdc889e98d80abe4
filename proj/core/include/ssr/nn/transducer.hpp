#pragma once

#include "ssr/nn/adam.hpp"
#include "ssr/nn/transformer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ssr::nn {

enum class LossKind { Euclidean, Mse };

LossKind parse_loss_kind(std::string_view name);

/// Mean over frames of the per-frame Euclidean norm, or the elementwise mean
/// squared error.
double transduction_loss(const Matrix& pred, const Matrix& target, LossKind kind = LossKind::Euclidean);

/// Encoder-only EMG feature -> mel regressor. Inputs are standardized and
/// outputs de-standardized with statistics stored as non-trainable tensors.
struct TransducerModel {
  TransformerParams params;
  std::size_t output_dim = 0;
};

TransducerModel init_transducer(const TransformerConfig& cfg, std::size_t input_dim,
                                std::size_t output_dim, std::vector<std::string> sessions);

/// Recorded forward pass producing frames x output_dim mel predictions.
Var transducer_forward(Tape& t, const TransducerModel& model, const Matrix& features,
                       std::string_view session_id);

/// Eval-mode prediction.
Matrix transduce(const TransducerModel& model, const Matrix& features, std::string_view session_id);

struct TrainingPair {
  Matrix features;
  Matrix target;
  std::string session_id;
};

struct TrainOptions {
  std::size_t steps = 200;
  std::size_t batch_size = 4;
  double lr = 1e-3;
  LossKind loss = LossKind::Euclidean;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
};

struct TrainResult {
  TransducerModel model;
  std::vector<double> losses;  // one entry per optimizer step (batch mean)
};

/// Sets the stored normalization statistics from `pairs` (no-op on empty input).
void fit_normalization(TransducerModel& model, const std::vector<TrainingPair>& pairs);

/// Loss and gradients for one utterance in training mode.
std::pair<double, Gradients> transducer_loss_and_grad(const TransducerModel& model,
                                                      const TrainingPair& pair, LossKind loss,
                                                      std::uint64_t dropout_seed);

/// Seeded shuffling over utterances, gradient averaged over each batch, Adam.
TrainResult train_transducer(const std::vector<TrainingPair>& corpus, const TransformerConfig& cfg,
                             const TrainOptions& opts);

double corpus_loss(const TransducerModel& model, const std::vector<TrainingPair>& corpus,
                   LossKind kind = LossKind::Euclidean);

void save_transducer(const TransducerModel& model, const std::filesystem::path& path);
TransducerModel load_transducer(const std::filesystem::path& path);

void write_loss_curve(const std::vector<double>& losses, const std::filesystem::path& path);

}  // namespace ssr::nn
