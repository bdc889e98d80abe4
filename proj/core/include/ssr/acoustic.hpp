#pragma once

#include "ssr/feature_matrix.hpp"
#include "ssr/types.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ssr::acoustic {

struct MelConfig {
  double sample_rate_hz = 16000.0;
  std::size_t n_fft = 512;
  std::size_t hop = 186;  // ~11.6 ms at 16 kHz
  std::size_t n_mels = 80;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-10;

  std::vector<std::string> problems() const;
  void validate() const;
  std::size_t bins() const noexcept { return n_fft / 2 + 1; }
};

struct MelSpectrogram {
  Matrix data;  // frames x n_mels, natural-log power
  MelConfig config;

  Eigen::Index frames() const noexcept { return data.rows(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Peak frequencies (Hz) of the mel filters, one per band.
std::vector<double> mel_band_centers(const MelConfig& cfg);

/// n_mels x (n_fft/2 + 1) triangular filters. Each row is evaluated at the
/// FFT bin frequencies k*fs/n_fft and scaled so its largest weight is 1.
/// Throws Error(Parameter) if any filter covers no FFT bin.
Matrix mel_filterbank(const MelConfig& cfg);

/// Number of n_fft-long frames spaced `hop` samples apart.
std::size_t mel_frame_count(std::size_t audio_length, const MelConfig& cfg);

/// log(max(filterbank * |DFT(hann * frame)|^2, log_floor)) per frame.
MelSpectrogram log_mel(std::span<const double> audio, const MelConfig& cfg = {});

/// Packs a spectrogram into the shared container; labels are band centers in Hz.
FeatureMatrix to_feature_matrix(const MelSpectrogram& mel);
MelSpectrogram from_feature_matrix(const FeatureMatrix& fm, const MelConfig& cfg = {});

}  // namespace ssr::acoustic
