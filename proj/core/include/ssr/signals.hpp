#pragma once

#include "ssr/feature_matrix.hpp"
#include "ssr/types.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssr::signals {

enum class SpeechMode { Silent, Vocalized };

std::string_view to_string(SpeechMode mode) noexcept;
SpeechMode parse_speech_mode(std::string_view text);

/// Multichannel surface EMG capture. `samples` is channels x T.
struct EmgRecording {
  std::size_t channels = 8;
  double sample_rate_hz = 1000.0;
  Matrix samples;
  std::string session_id;
  std::string utterance_id;
  SpeechMode mode = SpeechMode::Vocalized;

  std::size_t length() const noexcept { return static_cast<std::size_t>(samples.cols()); }
  std::span<const double> channel(std::size_t c) const {
    return row_span(samples, static_cast<Eigen::Index>(c));
  }

  void validate() const;

  friend bool operator==(const EmgRecording&, const EmgRecording&) = default;
};

struct FramingConfig {
  double frame_length_s = 0.031;
  double frame_stride_s = 0.0116;
  double filter_cutoff_hz = 115.0;
  std::size_t stft_points = 16;

  std::vector<std::string> problems() const;
  void validate() const;
};

inline constexpr std::size_t kTimeDomainDescriptors = 5;

/// Unit-area symmetric triangular FIR taps of length 2*round(fs/cutoff)-1.
/// The first spectral null of the response sits at `cutoff_hz`.
std::vector<double> triangular_kernel(double sample_rate_hz, double cutoff_hz);

/// Same-length, center-aligned convolution with `triangular_kernel`; the
/// signal is zero-padded at both edges.
Signal triangular_filter(std::span<const double> signal, double sample_rate_hz, double cutoff_hz);

/// Number of frames that lie fully inside a signal of `length` samples.
std::size_t frame_count(std::size_t length, double sample_rate_hz, const FramingConfig& cfg);

/// Frame k starts at round(k * stride * fs) and spans round(length * fs)
/// samples. The returned spans view into `signal`.
std::vector<std::span<const double>> frame_signal(std::span<const double> signal,
                                                  double sample_rate_hz,
                                                  const FramingConfig& cfg);

/// [RMS, mean, energy, mean |x|, zero-crossing rate].
std::array<double, kTimeDomainDescriptors> td_descriptors(std::span<const double> frame);

/// Per-bin mean magnitude of `stft_points`-point DFTs taken over rectangular
/// windows with hop stft_points/2. Returns bins 0..stft_points/2.
std::vector<double> stft_mags(std::span<const double> frame, std::size_t stft_points);

std::size_t features_per_channel(const FramingConfig& cfg);

FeatureMatrix featurize_recording(const EmgRecording& rec, const FramingConfig& cfg = {});

// --- recording containers ------------------------------------------------

void write_recording(const EmgRecording& rec, const std::filesystem::path& path);
EmgRecording read_recording(const std::filesystem::path& path);

struct CsvRecordingInfo {
  double sample_rate_hz = 1000.0;
  std::string session_id;
  std::string utterance_id;
  SpeechMode mode = SpeechMode::Vocalized;
};

/// One column per channel, one row per sample. A first line that does not
/// parse as numbers is treated as a header.
EmgRecording read_recording_csv(const std::filesystem::path& path, const CsvRecordingInfo& info);
void write_recording_csv(const EmgRecording& rec, const std::filesystem::path& path);

}  // namespace ssr::signals
