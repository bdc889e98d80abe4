#include "ssr/acoustic.hpp"

#include "support.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace ssr;
using namespace ssr::acoustic;

namespace {

MelConfig small_config() {
  MelConfig cfg;
  cfg.n_mels = 4;
  cfg.n_fft = 16;
  cfg.sample_rate_hz = 1000.0;
  cfg.fmin_hz = 0.0;
  cfg.fmax_hz = 500.0;
  cfg.hop = 8;
  return cfg;
}

// Triangle weights straight from the mel edge points, without reusing the library.
Matrix filterbank_oracle(const MelConfig& cfg) {
  const auto to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  const auto to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double lo = to_mel(cfg.fmin_hz), hi = to_mel(cfg.fmax_hz);
  std::vector<double> pts;
  for (std::size_t i = 0; i < cfg.n_mels + 2; ++i) pts.push_back(to_hz(lo + (hi - lo) * double(i) / double(cfg.n_mels + 1)));
  const std::size_t bins = cfg.n_fft / 2 + 1;
  Matrix fb(Eigen::Index(cfg.n_mels), Eigen::Index(bins));
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    double peak_value = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = double(k) * cfg.sample_rate_hz / double(cfg.n_fft);
      const double up = (f - pts[m]) / (pts[m + 1] - pts[m]);
      const double down = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
      fb(Eigen::Index(m), Eigen::Index(k)) = std::max(0.0, std::min(up, down));
      peak_value = std::max(peak_value, fb(Eigen::Index(m), Eigen::Index(k)));
    }
    fb.row(Eigen::Index(m)) /= peak_value;
  }
  return fb;
}

std::vector<double> tone(double hz, double fs, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = amp * std::sin(2.0 * std::numbers::pi * hz * double(t) / fs);
  return x;
}

}  // namespace

TEST(MelScale, Examples) {
  EXPECT_DOUBLE_EQ(hz_to_mel(0.0), 0.0);
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(hz_to_mel(700.0), 781.17, 0.01);
  EXPECT_NEAR(hz_to_mel(8000.0), 2840.02, 0.01);
  EXPECT_SSR_ERROR(hz_to_mel(-1.0), ErrorKind::Parameter);
}

TEST(MelScale, StrictlyIncreasingAndInvertible) {
  double prev = -1.0;
  for (double f = 0.0; f <= 20000.0; f += 37.5) {
    const double m = hz_to_mel(f);
    EXPECT_GT(m, prev);
    prev = m;
    EXPECT_NEAR(mel_to_hz(m), f, 1e-9 * std::max(1.0, f));
  }
}

TEST(Filterbank, MatchesDirectTriangleEvaluation) {
  const auto cfg = small_config();
  const Matrix fb = mel_filterbank(cfg);
  const Matrix oracle = filterbank_oracle(cfg);
  ASSERT_EQ(fb.rows(), 4);
  ASSERT_EQ(fb.cols(), 9);
  EXPECT_LT((fb - oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Filterbank, RowsNonNegativeWithUnitPeak) {
  for (const auto& cfg : {MelConfig{}, small_config()}) {
    const Matrix fb = mel_filterbank(cfg);
    EXPECT_GE(fb.minCoeff(), 0.0);
    for (Eigen::Index m = 0; m < fb.rows(); ++m) EXPECT_DOUBLE_EQ(fb.row(m).maxCoeff(), 1.0);
  }
}

TEST(Filterbank, AdjacentFiltersShareSupport) {
  const MelConfig cfg;
  const Matrix fb = mel_filterbank(cfg);
  const auto centers = mel_band_centers(cfg);
  // Every bin strictly between the first and last peak is covered.
  for (Eigen::Index k = 0; k < fb.cols(); ++k) {
    const double f = double(k) * cfg.sample_rate_hz / double(cfg.n_fft);
    if (f > centers.front() && f < centers.back()) EXPECT_GT(fb.col(k).sum(), 0.0) << "bin " << k;
  }
  // Filter i falls over exactly the bins where filter i+1 rises.
  for (Eigen::Index m = 0; m + 1 < fb.rows(); ++m) {
    for (Eigen::Index k = 0; k < fb.cols(); ++k) {
      const double f = double(k) * cfg.sample_rate_hz / double(cfg.n_fft);
      if (f > centers[std::size_t(m)] && f < centers[std::size_t(m + 1)]) {
        EXPECT_GT(fb(m, k), 0.0);
        EXPECT_GT(fb(m + 1, k), 0.0);
      }
    }
  }
}

TEST(Filterbank, TooManyMelsIsParameterError) {
  auto cfg = small_config();
  cfg.n_mels = 40;
  EXPECT_SSR_ERROR(mel_filterbank(cfg), ErrorKind::Parameter);
}

TEST(Filterbank, ConfigValidation) {
  MelConfig cfg;
  cfg.fmax_hz = 9000.0;
  EXPECT_SSR_ERROR(cfg.validate(), ErrorKind::Parameter);
  cfg = {};
  cfg.log_floor = 0.0;
  EXPECT_SSR_ERROR(cfg.validate(), ErrorKind::Parameter);
  cfg = {};
  cfg.fmin_hz = 8000.0;
  EXPECT_SSR_ERROR(cfg.validate(), ErrorKind::Parameter);
}

TEST(LogMel, ZeroAudioHitsFloor) {
  const MelConfig cfg;
  const std::vector<double> z(4000, 0.0);
  const auto mel = log_mel(z, cfg);
  EXPECT_EQ(mel.data.rows(), 1 + (4000 - 512) / 186);
  for (Eigen::Index i = 0; i < mel.data.size(); ++i) EXPECT_DOUBLE_EQ(mel.data.data()[i], std::log(1e-10));
}

TEST(LogMel, FrameCountArithmetic) {
  const MelConfig cfg;
  for (std::size_t len : {512u, 513u, 697u, 698u, 16000u}) {
    const std::vector<double> x(len, 0.1);
    EXPECT_EQ(std::size_t(log_mel(x, cfg).frames()), 1 + (len - 512) / 186) << len;
    EXPECT_EQ(mel_frame_count(len, cfg), 1 + (len - 512) / 186);
  }
  EXPECT_SSR_ERROR(log_mel(std::vector<double>(511, 0.0), cfg), ErrorKind::EmptyInput);
}

TEST(LogMel, MatchesDirectComputation) {
  const auto cfg = small_config();
  std::mt19937 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> x(70);
  for (auto& v : x) v = g(rng);
  const auto mel = log_mel(x, cfg);
  const Matrix fb = filterbank_oracle(cfg);
  ASSERT_EQ(mel.frames(), Eigen::Index(1 + (70 - 16) / 8));
  for (Eigen::Index f = 0; f < mel.frames(); ++f) {
    Vector power(9);
    for (std::size_t k = 0; k < 9; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < 16; ++t) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(t) / 16.0);
        acc += w * x[std::size_t(f) * 8 + t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / 16.0);
      }
      power[Eigen::Index(k)] = std::norm(acc);
    }
    const Vector e = fb * power;
    for (Eigen::Index m = 0; m < 4; ++m) EXPECT_NEAR(mel.data(f, m), std::log(std::max(e[m], 1e-10)), 1e-9);
  }
}

TEST(LogMel, OneKilohertzToneLandsInNearestBand) {
  const MelConfig cfg;
  const auto centers = mel_band_centers(cfg);
  std::size_t nearest = 0;
  for (std::size_t i = 1; i < centers.size(); ++i) {
    if (std::abs(centers[i] - 1000.0) < std::abs(centers[nearest] - 1000.0)) nearest = i;
  }
  const auto mel = log_mel(tone(1000.0, 16000.0, 8000), cfg);
  for (Eigen::Index f = 0; f < mel.frames(); ++f) {
    Eigen::Index arg = 0;
    mel.data.row(f).maxCoeff(&arg);
    EXPECT_EQ(std::size_t(arg), nearest);
  }
}

TEST(LogMel, ScalingNeverDecreases) {
  std::mt19937 rng(6);
  std::normal_distribution<double> g;
  std::vector<double> x(3000);
  for (auto& v : x) v = 1e-3 * g(rng);
  const auto base = log_mel(x);
  for (double s : {1.5, 10.0, 1e4}) {
    auto y = x;
    for (auto& v : y) v *= s;
    const auto scaled = log_mel(y);
    EXPECT_TRUE(((scaled.data - base.data).array() >= -1e-12).all()) << s;
  }
}

TEST(LogMel, FiniteForExtremeInputs) {
  std::vector<double> x(2000, 0.0);
  x[100] = 1e150;
  x[900] = -1e-300;
  EXPECT_TRUE(log_mel(x).data.allFinite());
}

TEST(LogMel, FeatureMatrixRoundTrip) {
  const auto mel = log_mel(tone(440.0, 16000.0, 2000));
  const auto fm = to_feature_matrix(mel);
  EXPECT_EQ(fm.dim_labels.size(), 80u);
  EXPECT_NEAR(std::stod(fm.dim_labels[0]), mel_band_centers({})[0], 1e-6);
  EXPECT_EQ(from_feature_matrix(fm).data, mel.data);
}
