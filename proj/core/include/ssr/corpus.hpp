#pragma once

#include "ssr/align.hpp"
#include "ssr/signals.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssr::corpus {

// Per-channel articulator activity for one word: an enveloped carrier whose
// frequency glides linearly over the word. The paired audio is a sum of
// gliding formant tones under the same envelope.
struct WordTemplate {
  std::size_t duration = 200;             // EMG samples
  std::vector<double> envelope;           // interior control points; zero at both ends
  std::vector<double> amplitude;          // per channel
  std::vector<double> carrier_start_hz;   // per channel
  std::vector<double> carrier_end_hz;     // per channel
  std::vector<double> phase;              // per channel
  std::vector<double> formant_start_hz;
  std::vector<double> formant_end_hz;
  std::vector<double> formant_amplitude;
};

using PhonemeMap = std::map<std::string, WordTemplate>;

PhonemeMap make_phoneme_map(const std::vector<std::string>& vocab, std::size_t channels, std::uint64_t seed);

std::vector<std::string> default_vocabulary();

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n_utterances = 20;
  std::vector<std::string> vocab = default_vocabulary();
  PhonemeMap phoneme_map;  // derived from vocab and seed when empty
  double time_warp_strength = 0.3;
  double noise_sigma = 0.02;
  std::size_t sessions = 2;
  std::size_t channels = 8;
  double emg_rate_hz = 1000.0;
  double audio_rate_hz = 16000.0;
  double audio_noise_sigma = 0.0;
  // Amplitude of a fixed multi-tone floor (every 100 Hz) that keeps pauses
  // away from the log floor without adding randomness.
  double background_level = 1e-3;
  std::size_t min_words = 2;
  std::size_t max_words = 4;
  std::size_t gap_samples = 60;  // silence between and around words
  double test_fraction = 0.25;

  std::vector<std::string> problems() const;
  void validate() const;
};

struct ManifestEntry {
  std::string utterance_id;
  std::string session_id;
  std::string transcript;
  std::string silent_emg_path;
  std::optional<std::string> vocal_emg_path;
  std::optional<std::string> audio_path;
  signals::SpeechMode mode = signals::SpeechMode::Silent;
  std::string split;  // "train", "test" or empty

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  // Relative entry paths resolve against this directory.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
  std::vector<ManifestEntry> split(std::string_view name) const;

  friend bool operator==(const CorpusManifest& a, const CorpusManifest& b) { return a.entries == b.entries; }
};

struct SynthUtterance {
  ManifestEntry entry;
  signals::EmgRecording silent;
  signals::EmgRecording vocal;
  signals::EmgRecording audio;  // single channel at audio_rate_hz
  // Vocalized sample position of every silent sample.
  std::vector<double> warp;
};

SynthUtterance synthesize_utterance(const SynthConfig& cfg, const PhonemeMap& map, std::size_t index);
std::vector<SynthUtterance> synthesize_corpus(const SynthConfig& cfg);

/// Silent feature frame i paired with the vocalized frame whose centre is
/// nearest to warp(centre of i).
align::AlignmentPath true_frame_alignment(std::span<const double> warp, std::size_t vocal_length,
                                          double sample_rate_hz, const signals::FramingConfig& framing);

/// Writes <id>.silent.sig, <id>.vocal.sig, <id>.audio.sig, <id>.truth.path and
/// manifest.jsonl under `out_dir`.
CorpusManifest generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                               const signals::FramingConfig& framing = {});

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
/// Validates ids, fields and the existence of every referenced file; failures
/// are Error(Ingestion) naming the offending entry.
CorpusManifest load_manifest(const std::filesystem::path& path);

}  // namespace ssr::corpus
