#include "ssr/corpus.hpp"

#include "ssr/error.hpp"
#include "text_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace ssr::corpus {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double envelope_at(const std::vector<double>& interior, double frac) {
  const std::size_t n = interior.size() + 2;
  const double pos = std::clamp(frac, 0.0, 1.0) * static_cast<double>(n - 1);
  const auto k = std::min(static_cast<std::size_t>(pos), n - 2);
  auto point = [&](std::size_t i) { return (i == 0 || i == n - 1) ? 0.0 : interior[i - 1]; };
  const double w = pos - static_cast<double>(k);
  return (1.0 - w) * point(k) + w * point(k + 1);
}

// Phase of a tone gliding linearly from f0 to f1 over `span_s` seconds.
double glide_phase(double f0, double f1, double t, double span_s) {
  return kTwoPi * (f0 * t + 0.5 * (f1 - f0) * t * t / span_s);
}

}  // namespace

std::vector<std::string> default_vocabulary() {
  return {"the", "cat", "sat", "on", "mat", "dog", "ran", "big", "red", "hat", "sun", "fox"};
}

PhonemeMap make_phoneme_map(const std::vector<std::string>& vocab, std::size_t channels, std::uint64_t seed) {
  require(!vocab.empty(), ErrorKind::Parameter, "vocabulary is empty");
  require(channels >= 1, ErrorKind::Parameter, "need at least one channel");
  PhonemeMap map;
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    std::mt19937_64 rng(splitmix(seed ^ splitmix(0x70686f6eULL + w)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    WordTemplate t;
    t.duration = static_cast<std::size_t>(range(150.0, 300.0));
    for (int k = 0; k < 4; ++k) t.envelope.push_back(range(0.3, 1.0));
    for (std::size_t c = 0; c < channels; ++c) {
      t.amplitude.push_back(range(0.2, 1.0));
      t.carrier_start_hz.push_back(range(20.0, 100.0));
      t.carrier_end_hz.push_back(range(20.0, 100.0));
      t.phase.push_back(range(0.0, kTwoPi));
    }
    for (int f = 0; f < 3; ++f) {
      t.formant_start_hz.push_back(range(250.0, 3500.0));
      t.formant_end_hz.push_back(range(250.0, 3500.0));
      t.formant_amplitude.push_back(range(0.2, 1.0));
    }
    require(map.emplace(vocab[w], std::move(t)).second, ErrorKind::Parameter,
            "duplicate vocabulary word '" + vocab[w] + "'");
  }
  return map;
}

std::vector<std::string> SynthConfig::problems() const {
  std::vector<std::string> out;
  if (vocab.empty()) out.push_back("vocab must not be empty");
  if (time_warp_strength < 0.0) out.push_back("time_warp_strength must be >= 0");
  if (noise_sigma < 0.0) out.push_back("noise_sigma must be >= 0");
  if (audio_noise_sigma < 0.0) out.push_back("audio_noise_sigma must be >= 0");
  if (background_level < 0.0) out.push_back("background_level must be >= 0");
  if (sessions == 0) out.push_back("sessions must be >= 1");
  if (channels == 0) out.push_back("channels must be >= 1");
  if (!(emg_rate_hz > 0.0)) out.push_back("emg_rate_hz must be positive");
  if (!(audio_rate_hz > 0.0)) out.push_back("audio_rate_hz must be positive");
  if (min_words == 0 || min_words > max_words) out.push_back("need 1 <= min_words <= max_words");
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) out.push_back("test_fraction must lie in [0, 1]");
  for (const auto& w : vocab) {
    if (!phoneme_map.empty() && !phoneme_map.count(w)) out.push_back("phoneme_map lacks word '" + w + "'");
  }
  for (const auto& [word, t] : phoneme_map) {
    if (t.amplitude.size() != channels || t.carrier_start_hz.size() != channels ||
        t.carrier_end_hz.size() != channels || t.phase.size() != channels) {
      out.push_back("phoneme_map entry '" + word + "' does not cover every channel");
    }
    if (t.duration < 2) out.push_back("phoneme_map entry '" + word + "' is shorter than 2 samples");
  }
  return out;
}

void SynthConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid synthesis config:";
  for (const auto& s : p) msg += "\n  " + s;
  fail(ErrorKind::Config, msg);
}

std::filesystem::path CorpusManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<ManifestEntry> CorpusManifest::split(std::string_view name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(e);
  }
  return out;
}

SynthUtterance synthesize_utterance(const SynthConfig& cfg, const PhonemeMap& map, std::size_t index) {
  std::mt19937_64 rng(splitmix(cfg.seed ^ splitmix(index + 1)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::uniform_int_distribution<std::size_t> n_words(cfg.min_words, cfg.max_words);
  std::uniform_int_distribution<std::size_t> pick(0, cfg.vocab.size() - 1);
  std::vector<std::string> words(n_words(rng));
  for (auto& w : words) w = cfg.vocab[pick(rng)];

  SynthUtterance out;
  auto& e = out.entry;
  char id[32];
  std::snprintf(id, sizeof id, "utt%04zu", index);
  e.utterance_id = id;
  e.session_id = "s" + std::to_string(index % cfg.sessions);
  for (const auto& w : words) e.transcript += (e.transcript.empty() ? "" : " ") + w;
  e.mode = signals::SpeechMode::Silent;

  // Session gain shared by both recordings of the utterance.
  std::mt19937_64 session_rng(splitmix(cfg.seed ^ splitmix(0x5e55ULL + index % cfg.sessions)));
  std::vector<double> session_gain(cfg.channels);
  for (auto& g : session_gain) g = std::exp(0.4 * (std::uniform_real_distribution<double>(0.0, 1.0)(session_rng) - 0.5));

  std::size_t length = cfg.gap_samples;
  for (const auto& w : words) length += map.at(w).duration + cfg.gap_samples;

  const auto ch = static_cast<Eigen::Index>(cfg.channels);
  Matrix clean = Matrix::Zero(ch, static_cast<Eigen::Index>(length));
  const double ratio = cfg.audio_rate_hz / cfg.emg_rate_hz;
  const auto audio_len = static_cast<std::size_t>(std::llround(static_cast<double>(length) * ratio));
  Matrix audio = Matrix::Zero(1, static_cast<Eigen::Index>(audio_len));

  std::size_t start = cfg.gap_samples;
  for (const auto& w : words) {
    const WordTemplate& t = map.at(w);
    const double span_s = static_cast<double>(t.duration) / cfg.emg_rate_hz;
    for (std::size_t n = 0; n < t.duration; ++n) {
      const double frac = static_cast<double>(n) / static_cast<double>(t.duration - 1);
      const double env = envelope_at(t.envelope, frac);
      const double ts = static_cast<double>(n) / cfg.emg_rate_hz;
      for (Eigen::Index c = 0; c < ch; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        clean(c, static_cast<Eigen::Index>(start + n)) =
            session_gain[ci] * t.amplitude[ci] * env *
            std::sin(glide_phase(t.carrier_start_hz[ci], t.carrier_end_hz[ci], ts, span_s) + t.phase[ci]);
      }
    }
    const auto a0 = static_cast<std::size_t>(std::llround(static_cast<double>(start) * ratio));
    const auto an = static_cast<std::size_t>(std::llround(static_cast<double>(t.duration) * ratio));
    for (std::size_t n = 0; n < an && a0 + n < audio_len; ++n) {
      const double ts = static_cast<double>(n) / cfg.audio_rate_hz;
      const double env = envelope_at(t.envelope, static_cast<double>(n) / static_cast<double>(an - 1));
      double v = 0.0;
      for (std::size_t f = 0; f < t.formant_amplitude.size(); ++f) {
        v += t.formant_amplitude[f] * std::sin(glide_phase(t.formant_start_hz[f], t.formant_end_hz[f], ts, span_s));
      }
      audio(0, static_cast<Eigen::Index>(a0 + n)) = env * v;
    }
    start += t.duration + cfg.gap_samples;
  }
  if (cfg.background_level > 0.0) {
    for (double f = 50.0; f < cfg.audio_rate_hz / 2.0; f += 100.0) {
      const double phase = kTwoPi * std::fmod(f * 0.618033988749895, 1.0);
      for (Eigen::Index n = 0; n < audio.cols(); ++n) {
        audio(0, n) += cfg.background_level * std::sin(kTwoPi * f * static_cast<double>(n) / cfg.audio_rate_hz + phase);
      }
    }
  }
  if (cfg.audio_noise_sigma > 0.0) {
    for (Eigen::Index n = 0; n < audio.cols(); ++n) audio(0, n) += cfg.audio_noise_sigma * gauss(rng);
  }

  // Monotone warp: silent sample k reads the vocalized signal at position
  // warp[k], built by integrating smooth positive step sizes.
  const double s = cfg.time_warp_strength;
  const double rate = std::exp(s * (u(rng) - 0.5));
  std::array<double, 3> amp{}, ph{};
  for (std::size_t m = 0; m < 3; ++m) {
    amp[m] = u(rng);
    ph[m] = kTwoPi * u(rng);
  }
  const double last = static_cast<double>(length - 1);
  out.warp.push_back(0.0);
  while (true) {
    const double k = static_cast<double>(out.warp.size());
    double z = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
      z += amp[m] * std::sin(kTwoPi * static_cast<double>(m + 1) * k / static_cast<double>(length) + ph[m]);
    }
    const double next = out.warp.back() + rate * std::exp(s * z);
    if (next > last) break;
    out.warp.push_back(next);
  }
  std::vector<double> channel_scale(cfg.channels);
  for (auto& a : channel_scale) a = std::exp(s * (u(rng) - 0.5));

  const auto silent_len = static_cast<Eigen::Index>(out.warp.size());
  Matrix silent(ch, silent_len);
  for (Eigen::Index k = 0; k < silent_len; ++k) {
    const double pos = out.warp[static_cast<std::size_t>(k)];
    const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
    const auto i1 = std::min<Eigen::Index>(i0 + 1, static_cast<Eigen::Index>(length) - 1);
    const double w = pos - static_cast<double>(i0);
    for (Eigen::Index c = 0; c < ch; ++c) {
      silent(c, k) = channel_scale[static_cast<std::size_t>(c)] * ((1.0 - w) * clean(c, i0) + w * clean(c, i1));
    }
  }

  Matrix vocal = clean;
  if (cfg.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < vocal.size(); ++i) vocal.data()[i] += cfg.noise_sigma * gauss(rng);
    for (Eigen::Index i = 0; i < silent.size(); ++i) silent.data()[i] += cfg.noise_sigma * gauss(rng);
  }

  auto make = [&](Matrix data, signals::SpeechMode mode, double rate_hz) {
    signals::EmgRecording r;
    r.channels = static_cast<std::size_t>(data.rows());
    r.sample_rate_hz = rate_hz;
    r.samples = std::move(data);
    r.session_id = e.session_id;
    r.utterance_id = e.utterance_id;
    r.mode = mode;
    r.validate();
    return r;
  };
  out.silent = make(std::move(silent), signals::SpeechMode::Silent, cfg.emg_rate_hz);
  out.vocal = make(std::move(vocal), signals::SpeechMode::Vocalized, cfg.emg_rate_hz);
  out.audio = make(std::move(audio), signals::SpeechMode::Vocalized, cfg.audio_rate_hz);
  return out;
}

std::vector<SynthUtterance> synthesize_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const PhonemeMap map = cfg.phoneme_map.empty() ? make_phoneme_map(cfg.vocab, cfg.channels, cfg.seed)
                                                 : cfg.phoneme_map;
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(cfg.n_utterances)));
  std::vector<SynthUtterance> out;
  for (std::size_t i = 0; i < cfg.n_utterances; ++i) {
    out.push_back(synthesize_utterance(cfg, map, i));
    out.back().entry.split = i + n_test >= cfg.n_utterances ? "test" : "train";
  }
  return out;
}

align::AlignmentPath true_frame_alignment(std::span<const double> warp, std::size_t vocal_length,
                                          double sample_rate_hz, const signals::FramingConfig& framing) {
  const std::size_t ns = signals::frame_count(warp.size(), sample_rate_hz, framing);
  const std::size_t nv = signals::frame_count(vocal_length, sample_rate_hz, framing);
  require(ns > 0 && nv > 0, ErrorKind::EmptyInput, "recordings shorter than one frame");
  const double len = std::round(framing.frame_length_s * sample_rate_hz);
  const double stride = framing.frame_stride_s * sample_rate_hz;
  const double half = (len - 1.0) / 2.0;
  align::AlignmentPath path;
  for (std::size_t i = 0; i < ns; ++i) {
    const double centre = std::round(static_cast<double>(i) * stride) + half;
    const auto k0 = static_cast<std::size_t>(std::floor(centre));
    const double w = centre - static_cast<double>(k0);
    const double pos = k0 + 1 < warp.size() ? (1.0 - w) * warp[k0] + w * warp[k0 + 1] : warp.back();
    const double j = std::round((pos - half) / stride);
    path.pairs.emplace_back(i, static_cast<std::size_t>(std::clamp(j, 0.0, static_cast<double>(nv - 1))));
  }
  return path;
}

namespace {

nlohmann::json entry_to_json(const ManifestEntry& e) {
  nlohmann::json j;
  j["utterance_id"] = e.utterance_id;
  j["session_id"] = e.session_id;
  j["transcript"] = e.transcript;
  j["silent_emg_path"] = e.silent_emg_path;
  if (e.vocal_emg_path) j["vocal_emg_path"] = *e.vocal_emg_path;
  if (e.audio_path) j["audio_path"] = *e.audio_path;
  j["mode"] = std::string(signals::to_string(e.mode));
  if (!e.split.empty()) j["split"] = e.split;
  return j;
}

}  // namespace

CorpusManifest generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                               const signals::FramingConfig& framing) {
  const auto utterances = synthesize_corpus(cfg);
  CorpusManifest manifest;
  manifest.base_dir = out_dir;
  for (const auto& u : utterances) {
    ManifestEntry e = u.entry;
    const std::string stem = e.utterance_id;
    e.silent_emg_path = stem + ".silent.sig";
    e.vocal_emg_path = stem + ".vocal.sig";
    e.audio_path = stem + ".audio.sig";
    signals::write_recording(u.silent, out_dir / e.silent_emg_path);
    signals::write_recording(u.vocal, out_dir / *e.vocal_emg_path);
    signals::write_recording(u.audio, out_dir / *e.audio_path);
    if (signals::frame_count(u.silent.length(), cfg.emg_rate_hz, framing) > 0 &&
        signals::frame_count(u.vocal.length(), cfg.emg_rate_hz, framing) > 0) {
      align::write_path(true_frame_alignment(u.warp, u.vocal.length(), cfg.emg_rate_hz, framing),
                        out_dir / (stem + ".truth.path"));
    }
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::string out;
  for (const auto& e : manifest.entries) out += entry_to_json(e).dump() + '\n';
  detail::write_file(path, out);
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::Ingestion, "manifest not found: " + path.string());
  CorpusManifest m;
  m.base_dir = path.parent_path();
  const std::string text = detail::read_file(path);
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    ManifestEntry e;
    try {
      const auto j = nlohmann::json::parse(line);
      e.utterance_id = j.at("utterance_id").get<std::string>();
      e.session_id = j.at("session_id").get<std::string>();
      e.transcript = j.at("transcript").get<std::string>();
      e.silent_emg_path = j.at("silent_emg_path").get<std::string>();
      if (j.contains("vocal_emg_path")) e.vocal_emg_path = j.at("vocal_emg_path").get<std::string>();
      if (j.contains("audio_path")) e.audio_path = j.at("audio_path").get<std::string>();
      e.mode = signals::parse_speech_mode(j.at("mode").get<std::string>());
      if (j.contains("split")) e.split = j.at("split").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorKind::Ingestion, where + ": malformed entry: " + ex.what());
    } catch (const Error& ex) {
      fail(ErrorKind::Ingestion, where + ": " + ex.what());
    }
    const std::string who = "entry '" + e.utterance_id + "' (" + where + ")";
    if (e.utterance_id.empty()) fail(ErrorKind::Ingestion, where + ": empty utterance_id");
    if (!seen.insert(e.utterance_id).second) fail(ErrorKind::Ingestion, who + ": duplicate utterance_id");
    auto check = [&](const std::string& p, const char* field) {
      if (!std::filesystem::exists(m.resolve(p))) {
        fail(ErrorKind::Ingestion, who + ": " + field + " '" + p + "' does not exist");
      }
    };
    check(e.silent_emg_path, "silent_emg_path");
    if (e.vocal_emg_path) check(*e.vocal_emg_path, "vocal_emg_path");
    if (e.audio_path) check(*e.audio_path, "audio_path");
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace ssr::corpus
