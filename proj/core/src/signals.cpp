#include "ssr/signals.hpp"

#include "ssr/error.hpp"
#include "ssr/spectral.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ssr::signals {

std::string_view to_string(SpeechMode mode) noexcept {
  return mode == SpeechMode::Silent ? "silent" : "vocalized";
}

SpeechMode parse_speech_mode(std::string_view text) {
  if (text == "silent") return SpeechMode::Silent;
  if (text == "vocalized") return SpeechMode::Vocalized;
  fail(ErrorKind::Parameter, "unknown speech mode '" + std::string(text) + "'");
}

void EmgRecording::validate() const {
  require(channels >= 1, ErrorKind::Parameter, "recording must have at least one channel");
  require(sample_rate_hz > 0.0, ErrorKind::Parameter, "sample rate must be positive");
  require(static_cast<std::size_t>(samples.rows()) == channels, ErrorKind::Parameter,
          "recording '" + utterance_id + "' declares " + std::to_string(channels) +
              " channels but holds " + std::to_string(samples.rows()));
  require(samples.cols() >= 1, ErrorKind::EmptyInput,
          "recording '" + utterance_id + "' has no samples");
  require(samples.allFinite(), ErrorKind::Parameter,
          "recording '" + utterance_id + "' contains NaN or Inf");
}

std::vector<std::string> FramingConfig::problems() const {
  std::vector<std::string> out;
  if (!(frame_length_s > 0.0)) out.emplace_back("frame_length_s must be positive");
  if (!(frame_stride_s > 0.0)) out.emplace_back("frame_stride_s must be positive");
  if (!(filter_cutoff_hz > 0.0)) out.emplace_back("filter_cutoff_hz must be positive");
  if (frame_length_s < frame_stride_s) out.emplace_back("frame length must be at least the frame stride");
  if (stft_points == 0 || stft_points % 2 != 0) out.emplace_back("stft_points must be even and positive");
  return out;
}

void FramingConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid framing config:";
  for (const auto& s : p) msg += "\n  - " + s;
  fail(ErrorKind::Parameter, msg);
}

std::vector<double> triangular_kernel(double sample_rate_hz, double cutoff_hz) {
  require(sample_rate_hz > 0.0, ErrorKind::Parameter, "sample rate must be positive");
  require(cutoff_hz > 0.0, ErrorKind::Parameter, "filter cutoff must be positive");
  require(sample_rate_hz > 2.0 * cutoff_hz, ErrorKind::Parameter,
          "filter cutoff must lie below the Nyquist frequency");

  // A triangle of length 2h-1 is the self-convolution of an h-tap box, whose
  // first null is at fs/h.
  const auto half = static_cast<std::size_t>(std::lround(sample_rate_hz / cutoff_hz));
  const std::size_t length = 2 * half - 1;
  std::vector<double> taps(length);
  for (std::size_t k = 0; k < length; ++k) {
    const auto offset = static_cast<double>(k) - static_cast<double>(half - 1);
    taps[k] = static_cast<double>(half) - std::abs(offset);
  }
  const double area = static_cast<double>(half * half);
  for (auto& t : taps) t /= area;
  return taps;
}

Signal triangular_filter(std::span<const double> signal, double sample_rate_hz, double cutoff_hz) {
  auto taps = triangular_kernel(sample_rate_hz, cutoff_hz);
  require(!signal.empty(), ErrorKind::EmptyInput, "cannot filter an empty signal");

  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  const auto center = static_cast<std::ptrdiff_t>(taps.size() / 2);
  Signal out(signal.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(taps.size()); ++k) {
      const auto j = i + k - center;
      if (j >= 0 && j < n) acc += taps[k] * signal[j];
    }
    out[i] = acc;
  }
  return out;
}

namespace {

std::size_t frame_start(std::size_t k, double sample_rate_hz, const FramingConfig& cfg) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(k) * cfg.frame_stride_s * sample_rate_hz));
}

std::size_t frame_samples(double sample_rate_hz, const FramingConfig& cfg) {
  return static_cast<std::size_t>(std::llround(cfg.frame_length_s * sample_rate_hz));
}

}  // namespace

std::size_t frame_count(std::size_t length, double sample_rate_hz, const FramingConfig& cfg) {
  cfg.validate();
  require(sample_rate_hz > 0.0, ErrorKind::Parameter, "sample rate must be positive");
  const std::size_t len = frame_samples(sample_rate_hz, cfg);
  require(len >= 1, ErrorKind::Parameter, "frame length rounds to zero samples");
  std::size_t k = 0;
  while (frame_start(k, sample_rate_hz, cfg) + len <= length) ++k;
  return k;
}

std::vector<std::span<const double>> frame_signal(std::span<const double> signal,
                                                  double sample_rate_hz,
                                                  const FramingConfig& cfg) {
  const std::size_t count = frame_count(signal.size(), sample_rate_hz, cfg);
  require(count > 0, ErrorKind::EmptyInput,
          "signal of " + std::to_string(signal.size()) + " samples is shorter than one frame");
  const std::size_t len = frame_samples(sample_rate_hz, cfg);
  std::vector<std::span<const double>> frames;
  frames.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    frames.push_back(signal.subspan(frame_start(k, sample_rate_hz, cfg), len));
  }
  return frames;
}

std::array<double, kTimeDomainDescriptors> td_descriptors(std::span<const double> frame) {
  require(!frame.empty(), ErrorKind::EmptyInput, "cannot describe an empty frame");
  const auto n = static_cast<double>(frame.size());
  double sum = 0.0, energy = 0.0, abs_sum = 0.0;
  for (double x : frame) {
    sum += x;
    energy += x * x;
    abs_sum += std::abs(x);
  }
  std::size_t crossings = 0;
  for (std::size_t i = 0; i + 1 < frame.size(); ++i) {
    if (frame[i] * frame[i + 1] < 0.0) ++crossings;
  }
  const double zcr =
      frame.size() > 1 ? static_cast<double>(crossings) / static_cast<double>(frame.size() - 1) : 0.0;
  return {std::sqrt(energy / n), sum / n, energy, abs_sum / n, zcr};
}

std::vector<double> stft_mags(std::span<const double> frame, std::size_t stft_points) {
  require(stft_points >= 2 && stft_points % 2 == 0, ErrorKind::Parameter,
          "stft_points must be even and >= 2");
  require(frame.size() >= stft_points, ErrorKind::Parameter,
          "frame of " + std::to_string(frame.size()) + " samples is shorter than the " +
              std::to_string(stft_points) + "-point STFT window");

  const spectral::RealDft dft(stft_points);
  const std::size_t hop = stft_points / 2;
  std::vector<double> acc(dft.bins(), 0.0);
  std::size_t windows = 0;
  for (std::size_t start = 0; start + stft_points <= frame.size(); start += hop) {
    auto mags = dft.magnitudes(frame.subspan(start, stft_points));
    for (std::size_t b = 0; b < acc.size(); ++b) acc[b] += mags[b];
    ++windows;
  }
  for (auto& v : acc) v /= static_cast<double>(windows);
  return acc;
}

std::size_t features_per_channel(const FramingConfig& cfg) {
  return kTimeDomainDescriptors + cfg.stft_points / 2 + 1;
}

FeatureMatrix featurize_recording(const EmgRecording& rec, const FramingConfig& cfg) {
  rec.validate();
  cfg.validate();

  const std::size_t per_channel = features_per_channel(cfg);
  const std::size_t frames = frame_count(rec.length(), rec.sample_rate_hz, cfg);
  require(frames > 0, ErrorKind::EmptyInput,
          "recording '" + rec.utterance_id + "' is shorter than one frame");

  FeatureMatrix fm;
  fm.frame_length_s = cfg.frame_length_s;
  fm.frame_stride_s = cfg.frame_stride_s;
  fm.data.resize(static_cast<Eigen::Index>(frames),
                 static_cast<Eigen::Index>(rec.channels * per_channel));

  static constexpr std::array<const char*, kTimeDomainDescriptors> kNames = {"rms", "mean", "energy",
                                                                             "abs", "zcr"};
  for (std::size_t c = 0; c < rec.channels; ++c) {
    const std::string prefix = "ch" + std::to_string(c) + "_";
    for (auto* name : kNames) fm.dim_labels.push_back(prefix + name);
    for (std::size_t b = 0; b <= cfg.stft_points / 2; ++b) {
      fm.dim_labels.push_back(prefix + "stft" + std::to_string(b));
    }

    const Signal filtered = triangular_filter(rec.channel(c), rec.sample_rate_hz, cfg.filter_cutoff_hz);
    const auto frame_views = frame_signal(filtered, rec.sample_rate_hz, cfg);
    for (std::size_t f = 0; f < frame_views.size(); ++f) {
      const auto row = static_cast<Eigen::Index>(f);
      auto col = static_cast<Eigen::Index>(c * per_channel);
      for (double v : td_descriptors(frame_views[f])) fm.data(row, col++) = v;
      for (double v : stft_mags(frame_views[f], cfg.stft_points)) fm.data(row, col++) = v;
    }
  }
  fm.validate();
  return fm;
}

// --- containers ------------------------------------------------------------

namespace {

// Ids may contain spaces, so they take everything after the key.
std::string rest_of_line(std::string_view line, std::string_view key) {
  const auto at = line.find(key);
  return std::string(detail::trim(line.substr(at + key.size())));
}

}  // namespace

void write_recording(const EmgRecording& rec, const std::filesystem::path& path) {
  rec.validate();
  std::string out = "ssr-signal 1\n";
  out += "channels " + std::to_string(rec.channels) + "\n";
  out += "sample_rate_hz " + detail::format_double(rec.sample_rate_hz) + "\n";
  out += "session_id " + rec.session_id + "\n";
  out += "utterance_id " + rec.utterance_id + "\n";
  out += "mode " + std::string(to_string(rec.mode)) + "\n";
  out += "length " + std::to_string(rec.length()) + "\n";
  out += "data\n";
  for (Eigen::Index c = 0; c < rec.samples.rows(); ++c) {
    for (Eigen::Index t = 0; t < rec.samples.cols(); ++t) {
      if (t) out += ' ';
      detail::append_double(out, rec.samples(c, t));
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

EmgRecording read_recording(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  const auto lines = detail::split_lines(text);
  const std::string ctx = path.string();
  require(!lines.empty() && detail::trim(lines[0]) == "ssr-signal 1", ErrorKind::Io,
          ctx + ": not an ssr-signal container");

  EmgRecording rec;
  long long length = -1;
  std::size_t i = 1;
  for (; i < lines.size(); ++i) {
    auto tokens = detail::split_ws(lines[i]);
    if (tokens.empty()) continue;
    if (tokens[0] == "data") break;
    const std::string_view value = tokens.size() > 1 ? tokens[1] : std::string_view{};
    if (tokens[0] == "channels") rec.channels = static_cast<std::size_t>(detail::parse_int(value, ctx));
    else if (tokens[0] == "sample_rate_hz") rec.sample_rate_hz = detail::parse_double(value, ctx);
    else if (tokens[0] == "session_id") rec.session_id = rest_of_line(lines[i], tokens[0]);
    else if (tokens[0] == "utterance_id") rec.utterance_id = rest_of_line(lines[i], tokens[0]);
    else if (tokens[0] == "mode") rec.mode = parse_speech_mode(value);
    else if (tokens[0] == "length") length = detail::parse_int(value, ctx);
    else fail(ErrorKind::Io, ctx + ": unknown header field '" + std::string(tokens[0]) + "'");
  }
  require(i < lines.size() && length >= 1, ErrorKind::Io, ctx + ": missing length/data header");
  rec.samples.resize(static_cast<Eigen::Index>(rec.channels), length);
  for (std::size_t c = 0; c < rec.channels; ++c) {
    require(i + 1 + c < lines.size(), ErrorKind::Io, ctx + ": truncated data section");
    auto tokens = detail::split_ws(lines[i + 1 + c]);
    require(static_cast<long long>(tokens.size()) == length, ErrorKind::Io,
            ctx + ": channel " + std::to_string(c) + " has " + std::to_string(tokens.size()) +
                " samples, expected " + std::to_string(length));
    for (long long t = 0; t < length; ++t) {
      rec.samples(static_cast<Eigen::Index>(c), t) = detail::parse_double(tokens[t], ctx);
    }
  }
  rec.validate();
  return rec;
}

EmgRecording read_recording_csv(const std::filesystem::path& path, const CsvRecordingInfo& info) {
  const std::string text = detail::read_file(path);
  const std::string ctx = path.string();
  std::vector<std::vector<double>> rows;
  bool first = true;
  for (auto line : detail::split_lines(text)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      cells.push_back(detail::trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    std::vector<double> values;
    try {
      for (auto cell : cells) values.push_back(detail::parse_double(cell, ctx));
    } catch (const Error&) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw;
    }
    first = false;
    require(rows.empty() || values.size() == rows.front().size(), ErrorKind::Io,
            ctx + ": ragged CSV row");
    rows.push_back(std::move(values));
  }
  require(!rows.empty(), ErrorKind::EmptyInput, ctx + ": CSV holds no samples");

  EmgRecording rec;
  rec.channels = rows.front().size();
  rec.sample_rate_hz = info.sample_rate_hz;
  rec.session_id = info.session_id;
  rec.utterance_id = info.utterance_id;
  rec.mode = info.mode;
  rec.samples.resize(static_cast<Eigen::Index>(rec.channels), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t c = 0; c < rec.channels; ++c) {
      rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = rows[t][c];
    }
  }
  rec.validate();
  return rec;
}

void write_recording_csv(const EmgRecording& rec, const std::filesystem::path& path) {
  rec.validate();
  std::string out;
  for (std::size_t c = 0; c < rec.channels; ++c) {
    if (c) out += ',';
    out += "ch" + std::to_string(c);
  }
  out += '\n';
  for (Eigen::Index t = 0; t < rec.samples.cols(); ++t) {
    for (Eigen::Index c = 0; c < rec.samples.rows(); ++c) {
      if (c) out += ',';
      detail::append_double(out, rec.samples(c, t));
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace ssr::signals
