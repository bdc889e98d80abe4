#include "ssr/acoustic.hpp"

#include "ssr/error.hpp"
#include "ssr/spectral.hpp"
#include "text_io.hpp"

#include <cmath>

namespace ssr::acoustic {

std::vector<std::string> MelConfig::problems() const {
  std::vector<std::string> out;
  if (!(sample_rate_hz > 0.0)) out.emplace_back("mel sample rate must be positive");
  if (n_fft < 2) out.emplace_back("n_fft must be >= 2");
  if (hop < 1) out.emplace_back("hop must be >= 1");
  if (n_mels < 1) out.emplace_back("n_mels must be >= 1");
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz)) out.emplace_back("need 0 <= fmin < fmax");
  if (fmax_hz > sample_rate_hz / 2.0) out.emplace_back("fmax must not exceed Nyquist");
  if (!(log_floor > 0.0)) out.emplace_back("log_floor must be positive");
  return out;
}

void MelConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid mel config:";
  for (const auto& s : p) msg += "\n  - " + s;
  fail(ErrorKind::Parameter, msg);
}

double hz_to_mel(double hz) {
  require(hz >= 0.0, ErrorKind::Parameter, "frequency must be non-negative");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

// n_mels + 2 edge frequencies equally spaced in mel over [fmin, fmax].
std::vector<double> edge_frequencies(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin_hz);
  const double hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  edges.front() = cfg.fmin_hz;
  edges.back() = cfg.fmax_hz;
  return edges;
}

}  // namespace

std::vector<double> mel_band_centers(const MelConfig& cfg) {
  cfg.validate();
  auto edges = edge_frequencies(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

Matrix mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const auto edges = edge_frequencies(cfg);
  const std::size_t bins = cfg.bins();
  Matrix fb = Matrix::Zero(static_cast<Eigen::Index>(cfg.n_mels), static_cast<Eigen::Index>(bins));
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], peak = edges[m + 1], right = edges[m + 2];
    double row_max = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate_hz / static_cast<double>(cfg.n_fft);
      double w = 0.0;
      if (f > left && f <= peak) w = (f - left) / (peak - left);
      else if (f > peak && f < right) w = (right - f) / (right - peak);
      fb(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = w;
      row_max = std::max(row_max, w);
    }
    require(row_max > 0.0, ErrorKind::Parameter,
            "mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels or raise n_fft");
    fb.row(static_cast<Eigen::Index>(m)) /= row_max;
  }
  return fb;
}

std::size_t mel_frame_count(std::size_t audio_length, const MelConfig& cfg) {
  if (audio_length < cfg.n_fft) return 0;
  return 1 + (audio_length - cfg.n_fft) / cfg.hop;
}

MelSpectrogram log_mel(std::span<const double> audio, const MelConfig& cfg) {
  cfg.validate();
  require(audio.size() >= cfg.n_fft, ErrorKind::EmptyInput,
          "audio of " + std::to_string(audio.size()) + " samples is shorter than n_fft=" +
              std::to_string(cfg.n_fft));

  const Matrix fb = mel_filterbank(cfg);
  const auto window = spectral::hann_window(cfg.n_fft);
  const spectral::RealDft dft(cfg.n_fft);
  const std::size_t frames = mel_frame_count(audio.size(), cfg);

  MelSpectrogram mel;
  mel.config = cfg;
  mel.data.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(cfg.n_mels));
  std::vector<double> buf(cfg.n_fft);
  const double log_floor = std::log(cfg.log_floor);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto frame = audio.subspan(f * cfg.hop, cfg.n_fft);
    for (std::size_t i = 0; i < cfg.n_fft; ++i) buf[i] = frame[i] * window[i];
    const auto power = dft.power(buf);
    const Eigen::Map<const Vector> p(power.data(), static_cast<Eigen::Index>(power.size()));
    const Vector energies = fb * p;
    for (Eigen::Index m = 0; m < energies.size(); ++m) {
      mel.data(static_cast<Eigen::Index>(f), m) =
          energies[m] > cfg.log_floor ? std::log(energies[m]) : log_floor;
    }
  }
  return mel;
}

FeatureMatrix to_feature_matrix(const MelSpectrogram& mel) {
  FeatureMatrix fm;
  fm.data = mel.data;
  fm.frame_length_s = static_cast<double>(mel.config.n_fft) / mel.config.sample_rate_hz;
  fm.frame_stride_s = static_cast<double>(mel.config.hop) / mel.config.sample_rate_hz;
  for (double c : mel_band_centers(mel.config)) fm.dim_labels.push_back(detail::format_double(c));
  return fm;
}

MelSpectrogram from_feature_matrix(const FeatureMatrix& fm, const MelConfig& cfg) {
  require(static_cast<std::size_t>(fm.dims()) == cfg.n_mels, ErrorKind::Parameter,
          "feature matrix has " + std::to_string(fm.dims()) + " dims, expected " +
              std::to_string(cfg.n_mels) + " mel bands");
  return MelSpectrogram{fm.data, cfg};
}

}  // namespace ssr::acoustic
