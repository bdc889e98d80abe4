#include "ssr/align.hpp"

#include "support.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>

using namespace ssr;
using namespace ssr::align;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

double euclid(const Matrix& a, const Matrix& b, Eigen::Index i, Eigen::Index j) {
  return (a.row(i) - b.row(j)).norm();
}

// Exhaustive minimum over every monotone path from (0,0) to (N-1,M-1).
double brute_force_cost(const Matrix& a, const Matrix& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Eigen::Index, Eigen::Index, double)> walk = [&](Eigen::Index i, Eigen::Index j, double acc) {
    acc += euclid(a, b, i, j);
    if (i == a.rows() - 1 && j == b.rows() - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.rows()) walk(i + 1, j, acc);
    if (j + 1 < b.rows()) walk(i, j + 1, acc);
    if (i + 1 < a.rows() && j + 1 < b.rows()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

void expect_valid_path(const AlignmentPath& p, std::size_t n, std::size_t m) {
  ASSERT_FALSE(p.pairs.empty());
  EXPECT_EQ(p.pairs.front(), std::make_pair(std::size_t{0}, std::size_t{0}));
  EXPECT_EQ(p.pairs.back(), std::make_pair(n - 1, m - 1));
  for (std::size_t s = 1; s < p.pairs.size(); ++s) {
    const auto di = p.pairs[s].first - p.pairs[s - 1].first;
    const auto dj = p.pairs[s].second - p.pairs[s - 1].second;
    EXPECT_TRUE((di == 1 && dj == 0) || (di == 0 && dj == 1) || (di == 1 && dj == 1));
  }
}

FeatureMatrix as_features(const Matrix& m) {
  FeatureMatrix fm;
  fm.data = m;
  for (Eigen::Index d = 0; d < m.cols(); ++d) fm.dim_labels.push_back("d" + std::to_string(d));
  return fm;
}

}  // namespace

TEST(Dtw, IdenticalInputsGiveDiagonal) {
  std::mt19937 rng(1);
  const Matrix a = random_matrix(9, 4, rng);
  for (auto metric : {Metric::Euclidean, Metric::Cosine}) {
    const auto p = dtw_align(a, a, metric);
    ASSERT_EQ(p.pairs.size(), 9u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(p.pairs[i], std::make_pair(i, i));
    EXPECT_NEAR(p.total_cost, 0.0, 1e-12);
  }
}

TEST(Dtw, SingleFrameAgainstMany) {
  std::mt19937 rng(2);
  const Matrix a = random_matrix(1, 3, rng);
  const Matrix b = random_matrix(6, 3, rng);
  const auto p = dtw_align(a, b);
  ASSERT_EQ(p.pairs.size(), 6u);
  double sum = 0.0;
  for (std::size_t j = 0; j < 6; ++j) {
    EXPECT_EQ(p.pairs[j], std::make_pair(std::size_t{0}, j));
    sum += euclid(a, b, 0, Eigen::Index(j));
  }
  EXPECT_NEAR(p.total_cost, sum, 1e-12);
}

TEST(Dtw, MatchesExhaustiveEnumeration) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix a = random_matrix(5, 3, rng);
    const Matrix b = random_matrix(7, 3, rng);
    const auto p = dtw_align(a, b);
    expect_valid_path(p, 5, 7);
    EXPECT_NEAR(p.total_cost, brute_force_cost(a, b), 1e-9);
    EXPECT_NEAR(p.total_cost, path_cost(a, b, p, Metric::Euclidean), 1e-9);
  }
}

TEST(Dtw, CostIsSymmetric) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(3 + trial % 7, 4, rng);
    const Matrix b = random_matrix(2 + trial % 5, 4, rng);
    for (auto metric : {Metric::Euclidean, Metric::Cosine}) {
      EXPECT_NEAR(dtw_align(a, b, metric).total_cost, dtw_align(b, a, metric).total_cost, 1e-9);
    }
  }
}

TEST(Dtw, NeverExceedsDiagonalPlusTail) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(4 + trial % 6, 2, rng);
    const Matrix b = random_matrix(3 + trial % 9, 2, rng);
    AlignmentPath naive;
    const std::size_t n = std::size_t(a.rows()), m = std::size_t(b.rows());
    for (std::size_t s = 0; s < std::min(n, m); ++s) naive.pairs.emplace_back(s, s);
    for (std::size_t i = m; i < n; ++i) naive.pairs.emplace_back(i, m - 1);
    for (std::size_t j = n; j < m; ++j) naive.pairs.emplace_back(n - 1, j);
    EXPECT_LE(dtw_align(a, b).total_cost, path_cost(a, b, naive, Metric::Euclidean) + 1e-12);
  }
}

TEST(Dtw, ErrorsAndMetricParsing) {
  std::mt19937 rng(6);
  EXPECT_SSR_ERROR(dtw_align(random_matrix(3, 2, rng), random_matrix(3, 4, rng)), ErrorKind::Parameter);
  EXPECT_SSR_ERROR(dtw_align(Matrix(0, 2), random_matrix(3, 2, rng)), ErrorKind::EmptyInput);
  EXPECT_EQ(parse_metric("cosine"), Metric::Cosine);
  EXPECT_EQ(parse_metric("euclidean"), Metric::Euclidean);
  EXPECT_SSR_ERROR(parse_metric("manhattan"), ErrorKind::Parameter);
}

TEST(Cca, IdenticalViewsCorrelateFully) {
  std::mt19937 rng(7);
  const Matrix a = random_matrix(100, 4, rng);
  const auto model = cca_fit(a, a, 2);
  ASSERT_EQ(model.correlations.size(), 2u);
  EXPECT_NEAR(model.correlations[0], 1.0, 1e-6);
  EXPECT_NEAR(model.correlations[1], 1.0, 1e-6);
}

TEST(Cca, LinearTransformKeepsTopCorrelation) {
  std::mt19937 rng(8);
  const Matrix a = random_matrix(150, 5, rng);
  Matrix r = random_matrix(5, 5, rng);
  r.diagonal().array() += 3.0;  // keep it well conditioned
  const auto model = cca_fit(a, a * r, 3);
  EXPECT_NEAR(model.correlations[0], 1.0, 1e-6);
}

TEST(Cca, InvariantToInvertibleTransforms) {
  std::mt19937 rng(9);
  const Matrix a = random_matrix(200, 4, rng);
  const Matrix noise = random_matrix(200, 4, rng);
  const Matrix b = a.leftCols(2) * random_matrix(2, 4, rng) + noise;
  Matrix r = random_matrix(4, 4, rng);
  r.diagonal().array() += 3.0;
  const double base = cca_fit(a, b, 2, 0.0).correlations[0];
  EXPECT_NEAR(cca_fit(a * r, b, 2, 0.0).correlations[0], base, 1e-6);
  EXPECT_NEAR(cca_fit(a, b * r, 2, 0.0).correlations[0], base, 1e-6);
}

TEST(Cca, CorrelationsBoundedAndSorted) {
  std::mt19937 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_matrix(60, 6, rng);
    const Matrix b = 0.5 * a + random_matrix(60, 6, rng);
    const auto model = cca_fit(a, b, 5);
    for (std::size_t i = 0; i < model.correlations.size(); ++i) {
      EXPECT_LE(std::abs(model.correlations[i]), 1.0 + 1e-12);
      if (i) EXPECT_LE(model.correlations[i], model.correlations[i - 1] + 1e-12);
    }
    EXPECT_TRUE(model.proj_a.allFinite());
    EXPECT_TRUE(model.proj_b.allFinite());
  }
}

TEST(Cca, IndependentViewsStayBelowNullBound) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(200, 3, rng);
    const Matrix b = random_matrix(200, 3, rng);
    EXPECT_LT(std::abs(cca_fit(a, b, 1).correlations[0]), 0.35);
  }
}

TEST(Cca, ProjectedComponentsHaveUnitVariance) {
  std::mt19937 rng(12);
  const Matrix a = random_matrix(300, 4, rng);
  const Matrix b = a * random_matrix(4, 4, rng) + 0.3 * random_matrix(300, 4, rng);
  const auto model = cca_fit(a, b, 3, 0.0);
  const Matrix pa = model.project_a(a);
  for (Eigen::Index c = 0; c < pa.cols(); ++c) {
    const double mean = pa.col(c).mean();
    const double var = (pa.col(c).array() - mean).square().sum() / double(pa.rows() - 1);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(Cca, Preconditions) {
  std::mt19937 rng(13);
  EXPECT_SSR_ERROR(cca_fit(random_matrix(5, 3, rng), random_matrix(5, 3, rng), 4), ErrorKind::Parameter);
  EXPECT_SSR_ERROR(cca_fit(random_matrix(9, 3, rng), random_matrix(9, 3, rng), 8), ErrorKind::Parameter);
  EXPECT_SSR_ERROR(cca_fit(random_matrix(9, 3, rng), random_matrix(8, 3, rng), 1), ErrorKind::Parameter);
}

TEST(Transfer, IdenticalInputsReturnVocalMel) {
  std::mt19937 rng(14);
  const auto feats = as_features(random_matrix(30, 6, rng));
  const Matrix mel = random_matrix(30, 5, rng);
  TransferOptions raw;
  raw.refine = false;
  TransferOptions refined;
  refined.cca_components = 3;
  EXPECT_EQ(audio_target_transfer(feats, feats, mel, raw).targets, mel);
  EXPECT_EQ(audio_target_transfer(feats, feats, mel, refined).targets, mel);
}

TEST(Transfer, DuplicatedFramesRepeatTargets) {
  std::mt19937 rng(15);
  const Matrix v = random_matrix(10, 4, rng);
  Matrix s(20, 4);
  for (Eigen::Index i = 0; i < 10; ++i) s.row(2 * i) = s.row(2 * i + 1) = v.row(i);
  const Matrix mel = random_matrix(10, 3, rng);
  TransferOptions raw;
  raw.refine = false;
  const auto out = audio_target_transfer(as_features(s), as_features(v), mel, raw);
  ASSERT_EQ(out.targets.rows(), 20);
  for (Eigen::Index i = 0; i < 20; ++i) EXPECT_EQ(out.targets.row(i), mel.row(i / 2)) << i;
}

TEST(Transfer, OutputHasOneRowPerSilentFrame) {
  std::mt19937 rng(16);
  for (int trial = 0; trial < 8; ++trial) {
    const auto s = as_features(random_matrix(12 + trial * 3, 5, rng));
    const auto v = as_features(random_matrix(20 - trial, 5, rng));
    const Matrix mel = random_matrix(20 - trial + trial % 3, 2, rng);  // within tolerance
    TransferOptions opts;
    opts.cca_components = 2;
    EXPECT_EQ(audio_target_transfer(s, v, mel, opts).targets.rows(), s.frames());
  }
}

TEST(Transfer, FrameCountMismatchIsAlignmentError) {
  std::mt19937 rng(17);
  const auto v = as_features(random_matrix(20, 3, rng));
  EXPECT_SSR_ERROR(audio_target_transfer(v, v, random_matrix(25, 2, rng)), ErrorKind::Alignment);
}

TEST(Transfer, PooledModelMatchesInputDims) {
  std::mt19937 rng(18);
  std::vector<FeatureMatrix> s, v;
  for (int u = 0; u < 4; ++u) {
    s.push_back(as_features(random_matrix(30, 5, rng)));
    v.push_back(as_features(s.back().data + 0.1 * random_matrix(30, 5, rng)));
  }
  const auto model = fit_transfer_cca(s, v);
  EXPECT_EQ(model.proj_a.rows(), 5);
  EXPECT_LE(model.k, 5u);
  const auto out = audio_target_transfer(s[0], v[0], random_matrix(30, 2, rng), {}, &model);
  EXPECT_EQ(out.targets.rows(), 30);
}

TEST(Resample, NearestFrameWithinTolerance) {
  Matrix mel(4, 1);
  mel << 0, 1, 2, 3;
  const Matrix up = match_frame_count(mel, 6, 2);
  ASSERT_EQ(up.rows(), 6);
  EXPECT_EQ(up(0, 0), 0.0);
  EXPECT_EQ(up(5, 0), 3.0);
  EXPECT_EQ(match_frame_count(mel, 4, 0), mel);
  EXPECT_SSR_ERROR(match_frame_count(mel, 7, 2), ErrorKind::Alignment);
}

TEST(PathIo, RoundTrip) {
  test::TempDir dir("path");
  std::mt19937 rng(19);
  const auto p = dtw_align(random_matrix(6, 2, rng), random_matrix(9, 2, rng));
  write_path(p, dir / "p.path");
  const auto back = read_path(dir / "p.path");
  EXPECT_EQ(back.pairs, p.pairs);
}
