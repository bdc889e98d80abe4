#pragma once

#include "ssr/acoustic.hpp"
#include "ssr/feature_matrix.hpp"
#include "ssr/types.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace ssr::align {

enum class Metric { Euclidean, Cosine };

Metric parse_metric(std::string_view name);

struct AlignmentPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;

  friend bool operator==(const AlignmentPath&, const AlignmentPath&) = default;
};

double frame_distance(std::span<const double> a, std::span<const double> b, Metric metric);

/// Minimal-cost monotone alignment under steps (1,0), (0,1), (1,1).
/// Backtrace ties prefer the diagonal, then (1,0), then (0,1).
AlignmentPath dtw_align(const Matrix& a, const Matrix& b, Metric metric = Metric::Euclidean);
AlignmentPath dtw_align(const FeatureMatrix& a, const FeatureMatrix& b,
                        Metric metric = Metric::Euclidean);

/// Sum of pointwise distances along `path`.
double path_cost(const Matrix& a, const Matrix& b, const AlignmentPath& path, Metric metric);

struct CcaModel {
  Matrix proj_a;  // d_a x k
  Matrix proj_b;  // d_b x k
  RowVector mean_a;
  RowVector mean_b;
  std::vector<double> correlations;  // non-increasing
  std::size_t k = 0;
  double ridge = 1e-4;

  Matrix project_a(const Matrix& a) const;
  Matrix project_b(const Matrix& b) const;
};

/// Canonical correlation analysis of paired rows. Both covariance blocks get
/// `ridge` added to their diagonal. Reported correlations are the empirical
/// correlations of the projected training pairs.
CcaModel cca_fit(const Matrix& pairs_a, const Matrix& pairs_b, std::size_t k = 8,
                 double ridge = 1e-4);

struct TransferOptions {
  bool refine = true;
  Metric metric = Metric::Euclidean;
  std::size_t cca_components = 24;
  double cca_ridge = 1e-4;
  std::size_t frame_tolerance = 2;
};

struct TransferResult {
  Matrix targets;  // silent frames x n_mels
  AlignmentPath path;
};

/// Pairs each silent frame with the vocalized mel frame it aligns to. When
/// `refine` is set, DTW is re-run in the shared space of a CCA fit on the
/// first DTW pairing: `shared` when given, else one fit on this utterance.
TransferResult audio_target_transfer(const FeatureMatrix& silent, const FeatureMatrix& vocal,
                                     const Matrix& vocal_mel, const TransferOptions& opts = {},
                                     const CcaModel* shared = nullptr);

/// CCA over the pooled first-pass DTW pairs of many utterances. A single
/// utterance rarely has more frames than feature dims, so pooling is what
/// makes the projection well determined.
CcaModel fit_transfer_cca(std::span<const FeatureMatrix> silent, std::span<const FeatureMatrix> vocal,
                          const TransferOptions& opts = {});

/// Nearest-frame resampling of `mel` to `frames` rows. Fails with
/// Error(Alignment) if the counts differ by more than `tolerance`.
Matrix match_frame_count(const Matrix& mel, Eigen::Index frames, std::size_t tolerance);

/// For each index on the first axis, the last second-axis index it is paired with.
std::vector<std::size_t> last_partner(const AlignmentPath& path, std::size_t first_len);

void write_path(const AlignmentPath& path, const std::filesystem::path& file);
AlignmentPath read_path(const std::filesystem::path& file);

}  // namespace ssr::align
