#include "ssr/align.hpp"

#include "ssr/error.hpp"
#include "text_io.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ssr::align {

Metric parse_metric(std::string_view name) {
  if (name == "euclidean") return Metric::Euclidean;
  if (name == "cosine") return Metric::Cosine;
  fail(ErrorKind::Parameter, "unknown DTW metric '" + std::string(name) + "'");
}

double frame_distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (metric == Metric::Euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  return std::max(0.0, 1.0 - dot / std::sqrt(na * nb));
}

AlignmentPath dtw_align(const Matrix& a, const Matrix& b, Metric metric) {
  require(a.rows() > 0 && b.rows() > 0, ErrorKind::EmptyInput, "DTW needs non-empty sequences");
  require(a.cols() == b.cols(), ErrorKind::Parameter,
          "DTW inputs differ in dims (" + std::to_string(a.cols()) + " vs " +
              std::to_string(b.cols()) + ")");

  const Eigen::Index n = a.rows(), m = b.rows();
  Matrix acc(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = frame_distance(row_span(a, i), row_span(b, j), metric);
      if (i == 0 && j == 0) {
        acc(i, j) = d;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      if (i > 0 && j > 0) best = acc(i - 1, j - 1);
      if (i > 0) best = std::min(best, acc(i - 1, j));
      if (j > 0) best = std::min(best, acc(i, j - 1));
      acc(i, j) = d + best;
    }
  }

  AlignmentPath path;
  path.total_cost = acc(n - 1, m - 1);
  Eigen::Index i = n - 1, j = m - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc(i - 1, j - 1), up = acc(i - 1, j), left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

AlignmentPath dtw_align(const FeatureMatrix& a, const FeatureMatrix& b, Metric metric) {
  return dtw_align(a.data, b.data, metric);
}

double path_cost(const Matrix& a, const Matrix& b, const AlignmentPath& path, Metric metric) {
  double cost = 0.0;
  for (auto [i, j] : path.pairs) {
    cost += frame_distance(row_span(a, static_cast<Eigen::Index>(i)),
                           row_span(b, static_cast<Eigen::Index>(j)), metric);
  }
  return cost;
}

// --- CCA -------------------------------------------------------------------

Matrix CcaModel::project_a(const Matrix& a) const {
  return (a.rowwise() - mean_a) * proj_a;
}

Matrix CcaModel::project_b(const Matrix& b) const {
  return (b.rowwise() - mean_b) * proj_b;
}

namespace {

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& spd) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spd);
  require(eig.info() == Eigen::Success, ErrorKind::Parameter, "covariance eigendecomposition failed");
  return eig.operatorInverseSqrt();
}

double column_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double sxx = x.squaredNorm(), syy = y.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(x.dot(y) / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

CcaModel cca_fit(const Matrix& pairs_a, const Matrix& pairs_b, std::size_t k, double ridge) {
  require(pairs_a.rows() == pairs_b.rows(), ErrorKind::Parameter, "CCA views differ in row count");
  require(k >= 1, ErrorKind::Parameter, "CCA needs k >= 1");
  require(ridge >= 0.0, ErrorKind::Parameter, "CCA ridge must be non-negative");
  require(pairs_a.rows() >= static_cast<Eigen::Index>(k) + 2, ErrorKind::Parameter,
          "CCA needs at least k+2 paired rows, got " + std::to_string(pairs_a.rows()));
  require(static_cast<Eigen::Index>(k) <= std::min(pairs_a.cols(), pairs_b.cols()),
          ErrorKind::Parameter, "CCA k exceeds the smaller view dimension");

  CcaModel model;
  model.k = k;
  model.ridge = ridge;
  model.mean_a = pairs_a.colwise().mean();
  model.mean_b = pairs_b.colwise().mean();
  const Eigen::MatrixXd a = pairs_a.rowwise() - model.mean_a;
  const Eigen::MatrixXd b = pairs_b.rowwise() - model.mean_b;
  const double denom = static_cast<double>(a.rows() - 1);

  Eigen::MatrixXd caa = (a.transpose() * a) / denom;
  Eigen::MatrixXd cbb = (b.transpose() * b) / denom;
  const Eigen::MatrixXd cab = (a.transpose() * b) / denom;
  caa.diagonal().array() += ridge;
  cbb.diagonal().array() += ridge;

  const Eigen::MatrixXd wa = inverse_sqrt(caa);
  const Eigen::MatrixXd wb = inverse_sqrt(cbb);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(wa * cab * wb, Eigen::ComputeThinU | Eigen::ComputeThinV);

  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd pa = wa * svd.matrixU().leftCols(kk);
  Eigen::MatrixXd pb = wb * svd.matrixV().leftCols(kk);

  const Eigen::MatrixXd za = a * pa;
  const Eigen::MatrixXd zb = b * pb;
  std::vector<double> corr(k);
  for (Eigen::Index c = 0; c < kk; ++c) {
    // Unit variance per component on the training pairs.
    const double sa = std::sqrt(za.col(c).squaredNorm() / denom);
    const double sb = std::sqrt(zb.col(c).squaredNorm() / denom);
    if (sa > 0.0) pa.col(c) /= sa;
    if (sb > 0.0) pb.col(c) /= sb;
    corr[c] = column_correlation(za.col(c), zb.col(c));
    if (corr[c] < 0.0) {
      pb.col(c) = -pb.col(c);
      corr[c] = -corr[c];
    }
  }

  std::vector<Eigen::Index> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return corr[x] > corr[y]; });

  model.proj_a.resize(pa.rows(), kk);
  model.proj_b.resize(pb.rows(), kk);
  for (Eigen::Index c = 0; c < kk; ++c) {
    model.proj_a.col(c) = pa.col(order[c]);
    model.proj_b.col(c) = pb.col(order[c]);
    model.correlations.push_back(corr[order[c]]);
  }
  require(model.proj_a.allFinite() && model.proj_b.allFinite(), ErrorKind::Parameter,
          "CCA produced non-finite projections");
  return model;
}

// --- audio target transfer ----------------------------------------------------

Matrix match_frame_count(const Matrix& mel, Eigen::Index frames, std::size_t tolerance) {
  const auto diff = std::abs(mel.rows() - frames);
  require(diff <= static_cast<Eigen::Index>(tolerance), ErrorKind::Alignment,
          "mel has " + std::to_string(mel.rows()) + " frames but features have " +
              std::to_string(frames));
  if (diff == 0) return mel;
  require(mel.rows() > 0 && frames > 0, ErrorKind::Alignment, "cannot resample empty frames");
  Matrix out(frames, mel.cols());
  const double scale =
      frames > 1 ? static_cast<double>(mel.rows() - 1) / static_cast<double>(frames - 1) : 0.0;
  for (Eigen::Index r = 0; r < frames; ++r) {
    const auto src = std::min<Eigen::Index>(std::llround(static_cast<double>(r) * scale), mel.rows() - 1);
    out.row(r) = mel.row(src);
  }
  return out;
}

std::vector<std::size_t> last_partner(const AlignmentPath& path, std::size_t first_len) {
  std::vector<std::size_t> partner(first_len, 0);
  for (auto [i, j] : path.pairs) partner.at(i) = j;
  return partner;
}

namespace {

void stack_pairs(const FeatureMatrix& silent, const FeatureMatrix& vocal, const AlignmentPath& path, Matrix& pa,
                 Matrix& pb, Eigen::Index& row) {
  for (const auto& [i, j] : path.pairs) {
    pa.row(row) = silent.data.row(static_cast<Eigen::Index>(i));
    pb.row(row++) = vocal.data.row(static_cast<Eigen::Index>(j));
  }
}

std::size_t cca_rank(const TransferOptions& opts, Eigen::Index dims, Eigen::Index rows) {
  return std::min<std::size_t>({opts.cca_components, static_cast<std::size_t>(dims),
                                static_cast<std::size_t>(std::max<Eigen::Index>(rows - 2, 0))});
}

}  // namespace

TransferResult audio_target_transfer(const FeatureMatrix& silent, const FeatureMatrix& vocal,
                                     const Matrix& vocal_mel, const TransferOptions& opts,
                                     const CcaModel* shared) {
  require(silent.dims() == vocal.dims(), ErrorKind::Parameter,
          "silent and vocalized features differ in dims");
  const Matrix mel = match_frame_count(vocal_mel, vocal.frames(), opts.frame_tolerance);

  TransferResult result;
  result.path = dtw_align(silent.data, vocal.data, opts.metric);

  if (opts.refine && shared != nullptr) {
    require(shared->proj_a.rows() == silent.dims() && shared->proj_b.rows() == vocal.dims(), ErrorKind::Parameter,
            "shared CCA model does not match the feature dims");
    result.path = dtw_align(shared->project_a(silent.data), shared->project_b(vocal.data), opts.metric);
  } else if (opts.refine) {
    const auto n_pairs = static_cast<Eigen::Index>(result.path.pairs.size());
    const auto k = cca_rank(opts, silent.dims(), n_pairs);
    if (k >= 1) {
      Matrix pa(n_pairs, silent.dims()), pb(n_pairs, vocal.dims());
      Eigen::Index row = 0;
      stack_pairs(silent, vocal, result.path, pa, pb, row);
      const CcaModel cca = cca_fit(pa, pb, k, opts.cca_ridge);
      result.path = dtw_align(cca.project_a(silent.data), cca.project_b(vocal.data), opts.metric);
    }
  }

  const auto partner = last_partner(result.path, static_cast<std::size_t>(silent.frames()));
  result.targets.resize(silent.frames(), mel.cols());
  for (Eigen::Index i = 0; i < silent.frames(); ++i) {
    result.targets.row(i) = mel.row(static_cast<Eigen::Index>(partner[static_cast<std::size_t>(i)]));
  }
  return result;
}

CcaModel fit_transfer_cca(std::span<const FeatureMatrix> silent, std::span<const FeatureMatrix> vocal,
                          const TransferOptions& opts) {
  require(silent.size() == vocal.size(), ErrorKind::Parameter, "need one vocalized recording per silent one");
  require(!silent.empty(), ErrorKind::EmptyInput, "no utterances to fit CCA on");
  std::vector<AlignmentPath> paths;
  Eigen::Index rows = 0;
  for (std::size_t u = 0; u < silent.size(); ++u) {
    require(silent[u].dims() == silent[0].dims() && vocal[u].dims() == silent[0].dims(), ErrorKind::Parameter,
            "all utterances must share one feature layout");
    paths.push_back(dtw_align(silent[u].data, vocal[u].data, opts.metric));
    rows += static_cast<Eigen::Index>(paths.back().pairs.size());
  }
  const Eigen::Index dims = silent[0].dims();
  Matrix pa(rows, dims), pb(rows, dims);
  Eigen::Index row = 0;
  for (std::size_t u = 0; u < silent.size(); ++u) stack_pairs(silent[u], vocal[u], paths[u], pa, pb, row);
  const auto k = cca_rank(opts, dims, rows);
  require(k >= 1, ErrorKind::Parameter, "too few aligned frames for CCA");
  return cca_fit(pa, pb, k, opts.cca_ridge);
}

// --- path files ----------------------------------------------------------------

void write_path(const AlignmentPath& path, const std::filesystem::path& file) {
  std::string out = "# total_cost " + detail::format_double(path.total_cost) + "\n";
  for (auto [i, j] : path.pairs) out += std::to_string(i) + ' ' + std::to_string(j) + '\n';
  detail::write_file(file, out);
}

AlignmentPath read_path(const std::filesystem::path& file) {
  const std::string text = detail::read_file(file);
  const std::string ctx = file.string();
  AlignmentPath path;
  for (auto line : detail::split_lines(text)) {
    auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "#") {
      if (tokens.size() == 3 && tokens[1] == "total_cost") {
        path.total_cost = detail::parse_double(tokens[2], ctx);
      }
      continue;
    }
    require(tokens.size() == 2, ErrorKind::Io, ctx + ": path rows need two columns");
    path.pairs.emplace_back(static_cast<std::size_t>(detail::parse_int(tokens[0], ctx)),
                            static_cast<std::size_t>(detail::parse_int(tokens[1], ctx)));
  }
  return path;
}

}  // namespace ssr::align
