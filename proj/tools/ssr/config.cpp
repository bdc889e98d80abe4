#include "config.hpp"

#include "ssr/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <sstream>
#include <tuple>

extern char** environ;

namespace ssr::cli {
namespace {

namespace fs = std::filesystem;

struct Value {
  std::string text;
  fs::path base;  // directory relative paths resolve against
  std::string origin;
};

using Problems = std::vector<std::string>;

struct Field {
  const char* name;
  std::function<void(PipelineConfig&, const Value&, const std::string&, Problems&)> apply;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Inline comments start at ';' or '#' preceded by whitespace.
std::string strip_inline_comment(const std::string& value) {
  for (std::size_t i = 1; i < value.size(); ++i) {
    if ((value[i] == ';' || value[i] == '#') && std::isspace(static_cast<unsigned char>(value[i - 1]))) {
      return trimmed(std::string_view(value).substr(0, i));
    }
  }
  return trimmed(value);
}

std::string bad(const std::string& key, const Value& v, std::string_view expected) {
  return key + ": expected " + std::string(expected) + ", got '" + v.text + "' (" + v.origin + ")";
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

// Setters for typed fields; each records a problem instead of throwing.
template <class Get>
Field size_field(const char* name, Get get) {
  return {name, [get](PipelineConfig& c, const Value& v, const std::string& key, Problems& p) {
            std::size_t out = 0;
            if (!parse_number(v.text, out)) return p.push_back(bad(key, v, "a non-negative integer"));
            get(c) = out;
          }};
}

template <class Get>
Field u64_field(const char* name, Get get) {
  return {name, [get](PipelineConfig& c, const Value& v, const std::string& key, Problems& p) {
            std::uint64_t out = 0;
            if (!parse_number(v.text, out)) return p.push_back(bad(key, v, "a non-negative integer"));
            get(c) = out;
          }};
}

template <class Get>
Field real_field(const char* name, Get get) {
  return {name, [get](PipelineConfig& c, const Value& v, const std::string& key, Problems& p) {
            double out = 0.0;
            if (!parse_number(v.text, out)) return p.push_back(bad(key, v, "a number"));
            get(c) = out;
          }};
}

template <class Get>
Field bool_field(const char* name, Get get) {
  return {name, [get](PipelineConfig& c, const Value& v, const std::string& key, Problems& p) {
            const std::string t = lower(v.text);
            if (t == "true" || t == "yes" || t == "on" || t == "1") get(c) = true;
            else if (t == "false" || t == "no" || t == "off" || t == "0") get(c) = false;
            else p.push_back(bad(key, v, "true or false"));
          }};
}

template <class Get>
Field text_field(const char* name, Get get) {
  return {name, [get](PipelineConfig& c, const Value& v, const std::string&, Problems&) { get(c) = v.text; }};
}

Field preset_field(const char* name, nn::TransformerConfig PipelineConfig::*member) {
  return {name, [member](PipelineConfig& c, const Value& v, const std::string& key, Problems& p) {
            try {
              const auto seed = (c.*member).seed;
              c.*member = nn::preset_by_name(v.text);
              (c.*member).seed = seed;
            } catch (const Error&) {
              p.push_back(bad(key, v, "one of transduction, asr, toy, tiny"));
            }
          }};
}

std::string resolve(const Value& v) {
  const fs::path p(v.text);
  if (p.is_absolute() || v.base.empty()) return p.string();
  return (v.base / p).lexically_normal().string();
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  for (char ch : text + ',') {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!word.empty()) out.push_back(std::move(word));
      word.clear();
    } else {
      word += ch;
    }
  }
  return out;
}

const std::map<std::string, std::vector<Field>>& schema() {
  using C = PipelineConfig;
  static const std::map<std::string, std::vector<Field>> s = {
      {"run", {u64_field("seed", [](C& c) -> auto& { return c.seed; })}},
      {"corpus",
       {
           size_field("utterances", [](C& c) -> auto& { return c.corpus.n_utterances; }),
           size_field("sessions", [](C& c) -> auto& { return c.corpus.sessions; }),
           size_field("channels", [](C& c) -> auto& { return c.corpus.channels; }),
           real_field("time_warp_strength", [](C& c) -> auto& { return c.corpus.time_warp_strength; }),
           real_field("noise_sigma", [](C& c) -> auto& { return c.corpus.noise_sigma; }),
           real_field("emg_rate_hz", [](C& c) -> auto& { return c.corpus.emg_rate_hz; }),
           real_field("audio_rate_hz", [](C& c) -> auto& { return c.corpus.audio_rate_hz; }),
           real_field("audio_noise_sigma", [](C& c) -> auto& { return c.corpus.audio_noise_sigma; }),
           real_field("background_level", [](C& c) -> auto& { return c.corpus.background_level; }),
           size_field("min_words", [](C& c) -> auto& { return c.corpus.min_words; }),
           size_field("max_words", [](C& c) -> auto& { return c.corpus.max_words; }),
           size_field("gap_samples", [](C& c) -> auto& { return c.corpus.gap_samples; }),
           real_field("test_fraction", [](C& c) -> auto& { return c.corpus.test_fraction; }),
           {"vocabulary",
            [](C& c, const Value& v, const std::string& key, Problems& p) {
              auto words = split_words(v.text);
              if (words.empty()) return p.push_back(bad(key, v, "a comma-separated word list"));
              c.corpus.vocab = std::move(words);
            }},
       }},
      {"signals",
       {
           real_field("frame_length_s", [](C& c) -> auto& { return c.framing.frame_length_s; }),
           real_field("frame_stride_s", [](C& c) -> auto& { return c.framing.frame_stride_s; }),
           real_field("filter_cutoff_hz", [](C& c) -> auto& { return c.framing.filter_cutoff_hz; }),
           size_field("stft_points", [](C& c) -> auto& { return c.framing.stft_points; }),
       }},
      {"mel",
       {
           real_field("sample_rate_hz", [](C& c) -> auto& { return c.mel.sample_rate_hz; }),
           size_field("n_fft", [](C& c) -> auto& { return c.mel.n_fft; }),
           size_field("hop", [](C& c) -> auto& { return c.mel.hop; }),
           size_field("n_mels", [](C& c) -> auto& { return c.mel.n_mels; }),
           real_field("fmin_hz", [](C& c) -> auto& { return c.mel.fmin_hz; }),
           real_field("fmax_hz", [](C& c) -> auto& { return c.mel.fmax_hz; }),
           real_field("log_floor", [](C& c) -> auto& { return c.mel.log_floor; }),
       }},
      {"align",
       {
           bool_field("refine", [](C& c) -> auto& { return c.transfer.refine; }),
           {"metric",
            [](C& c, const Value& v, const std::string& key, Problems& p) {
              try {
                c.transfer.metric = align::parse_metric(v.text);
              } catch (const Error&) {
                p.push_back(bad(key, v, "euclidean or cosine"));
              }
            }},
           size_field("cca_components", [](C& c) -> auto& { return c.transfer.cca_components; }),
           real_field("cca_ridge", [](C& c) -> auto& { return c.transfer.cca_ridge; }),
           size_field("frame_tolerance", [](C& c) -> auto& { return c.transfer.frame_tolerance; }),
       }},
      {"transducer",
       {
           preset_field("preset", &C::transducer),
           size_field("d_model", [](C& c) -> auto& { return c.transducer.d_model; }),
           size_field("n_heads", [](C& c) -> auto& { return c.transducer.n_heads; }),
           size_field("d_ff", [](C& c) -> auto& { return c.transducer.d_ff; }),
           size_field("layers", [](C& c) -> auto& { return c.transducer.n_enc_layers; }),
           real_field("dropout", [](C& c) -> auto& { return c.transducer.dropout; }),
           size_field("relpos_clip", [](C& c) -> auto& { return c.transducer.relpos_clip; }),
           size_field("session_dim", [](C& c) -> auto& { return c.transducer.session_dim; }),
           size_field("steps", [](C& c) -> auto& { return c.transducer_train.steps; }),
           size_field("batch_size", [](C& c) -> auto& { return c.transducer_train.batch_size; }),
           real_field("lr", [](C& c) -> auto& { return c.transducer_train.lr; }),
           real_field("grad_clip", [](C& c) -> auto& { return c.transducer_train.grad_clip; }),
           {"loss",
            [](C& c, const Value& v, const std::string& key, Problems& p) {
              try {
                c.transducer_train.loss = nn::parse_loss_kind(v.text);
              } catch (const Error&) {
                p.push_back(bad(key, v, "euclidean or mse"));
              }
            }},
           bool_field("mixed_training", [](C& c) -> auto& { return c.mixed_training; }),
       }},
      {"asr",
       {
           preset_field("preset", &C::asr),
           size_field("d_model", [](C& c) -> auto& { return c.asr.d_model; }),
           size_field("n_heads", [](C& c) -> auto& { return c.asr.n_heads; }),
           size_field("d_ff", [](C& c) -> auto& { return c.asr.d_ff; }),
           size_field("enc_layers", [](C& c) -> auto& { return c.asr.n_enc_layers; }),
           size_field("dec_layers", [](C& c) -> auto& { return c.asr.n_dec_layers; }),
           real_field("dropout", [](C& c) -> auto& { return c.asr.dropout; }),
           size_field("relpos_clip", [](C& c) -> auto& { return c.asr.relpos_clip; }),
           size_field("steps", [](C& c) -> auto& { return c.asr_train.steps; }),
           size_field("batch_size", [](C& c) -> auto& { return c.asr_train.batch_size; }),
           real_field("lr", [](C& c) -> auto& { return c.asr_train.lr; }),
           real_field("grad_clip", [](C& c) -> auto& { return c.asr_train.grad_clip; }),
       }},
      {"decode",
       {
           size_field("beam_width", [](C& c) -> auto& { return c.beam.beam_width; }),
           size_field("max_len", [](C& c) -> auto& { return c.beam.max_len; }),
           bool_field("length_norm", [](C& c) -> auto& { return c.beam.length_norm; }),
           bool_field("early_stop", [](C& c) -> auto& { return c.beam.early_stop; }),
           size_field("n_best", [](C& c) -> auto& { return c.n_best; }),
       }},
      {"filter",
       {
           real_field("confidence_threshold", [](C& c) -> auto& { return c.filter.confidence_threshold; }),
           size_field("min_edit_chars", [](C& c) -> auto& { return c.filter.min_edit_chars; }),
           size_field("max_seq_tokens", [](C& c) -> auto& { return c.filter.max_seq_tokens; }),
           {"stoplist",
            [](C& c, const Value& v, const std::string& key, Problems& p) {
              if (v.text.empty() || lower(v.text) == "none") return c.filter.generic_stoplist.clear();
              try {
                c.filter.generic_stoplist = correction::load_word_list(resolve(v));
              } catch (const Error& e) {
                p.push_back(key + ": " + e.what());
              }
            }},
           {"lexicon",
            [](C& c, const Value& v, const std::string&, Problems&) {
              const std::string t = lower(v.text);
              c.lexicon_source = (t == "corpus" || t == "none" || t.empty()) ? (t.empty() ? "none" : t) : resolve(v);
            }},
       }},
      {"provider",
       {
           text_field("kind", [](C& c) -> auto& { return c.provider.kind; }),
           text_field("endpoint", [](C& c) -> auto& { return c.provider.remote.endpoint; }),
           real_field("timeout_s", [](C& c) -> auto& { return c.provider.remote.timeout_s; }),
           size_field("retries", [](C& c) -> auto& { return c.provider.remote.retries; }),
           size_field("mock_alternatives", [](C& c) -> auto& { return c.provider.mock_alternatives; }),
       }},
  };
  return s;
}

const Field* find_field(const std::string& section, const std::string& key) {
  const auto& s = schema();
  const auto it = s.find(section);
  if (it == s.end()) return nullptr;
  for (const auto& f : it->second) {
    if (key == f.name) return &f;
  }
  return nullptr;
}

void read_file_layer(const fs::path& file, std::map<std::string, Value>& merged, Problems& problems) {
  if (!fs::exists(file)) fail(ErrorKind::Config, "config file not found: " + file.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(file.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::Config, "cannot parse " + file.string() + ": " + e.what());
  }
  const fs::path base = fs::absolute(file).parent_path();
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      problems.push_back(file.string() + ": key '" + section + "' is outside any section");
      continue;
    }
    for (const auto& [key, value] : body) {
      merged[lower(section) + "." + lower(key)] = {strip_inline_comment(value.data()), base, file.filename().string()};
    }
  }
}

void read_env_layer(std::map<std::string, Value>& merged, Problems& problems) {
  for (char** env = environ; env && *env; ++env) {
    const std::string_view entry(*env);
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos || !entry.starts_with(kEnvPrefix)) continue;
    const std::string name(entry.substr(0, eq));
    const std::string rest = name.substr(kEnvPrefix.size());
    for (const auto& [section, fields] : schema()) {
      const std::string head = upper(section) + "_";
      if (!rest.starts_with(head)) continue;
      const std::string key = lower(rest.substr(head.size()));
      if (!find_field(section, key)) {
        problems.push_back(name + ": no key '" + key + "' in section [" + section + "]");
      } else {
        merged[section + "." + key] = {trimmed(entry.substr(eq + 1)), fs::current_path(), name};
      }
    }
  }
}

void prefixed(Problems& out, const std::string& section, const std::vector<std::string>& list) {
  for (const auto& p : list) out.push_back("[" + section + "] " + p);
}

void cross_checks(const PipelineConfig& c, Problems& p) {
  prefixed(p, "corpus", c.corpus.problems());
  prefixed(p, "signals", c.framing.problems());
  prefixed(p, "mel", c.mel.problems());
  prefixed(p, "transducer", c.transducer.problems());
  prefixed(p, "asr", c.asr.problems());
  prefixed(p, "filter", c.filter.problems());
  if (c.asr.n_dec_layers < 1) p.push_back("[asr] dec_layers must be >= 1");
  if (c.mel.sample_rate_hz != c.corpus.audio_rate_hz) {
    p.push_back("[mel] sample_rate_hz must equal [corpus] audio_rate_hz");
  }
  if (c.transfer.cca_components < 1) p.push_back("[align] cca_components must be >= 1");
  if (!(c.transfer.cca_ridge >= 0.0)) p.push_back("[align] cca_ridge must be >= 0");
  for (const auto& [section, batch, lr, clip] :
       {std::tuple{"transducer", c.transducer_train.batch_size, c.transducer_train.lr,
                   c.transducer_train.grad_clip},
        std::tuple{"asr", c.asr_train.batch_size, c.asr_train.lr, c.asr_train.grad_clip}}) {
    if (batch < 1) p.push_back(std::string("[") + section + "] batch_size must be >= 1");
    if (!(lr > 0.0)) p.push_back(std::string("[") + section + "] lr must be > 0");
    if (!(clip >= 0.0)) p.push_back(std::string("[") + section + "] grad_clip must be >= 0");
  }
  if (c.beam.beam_width < 1) p.push_back("[decode] beam_width must be >= 1");
  if (c.beam.max_len < 1) p.push_back("[decode] max_len must be >= 1");
  if (c.n_best < 1) p.push_back("[decode] n_best must be >= 1");
  if (c.provider.kind != "mock" && c.provider.kind != "remote") {
    p.push_back("[provider] kind must be mock or remote, got '" + c.provider.kind + "'");
  }
  if (c.provider.kind == "remote" && c.provider.remote.endpoint.empty()) {
    p.push_back("[provider] endpoint is required when kind = remote");
  }
  if (!(c.provider.remote.timeout_s > 0.0)) p.push_back("[provider] timeout_s must be > 0");
  if (c.provider.mock_alternatives < 1) p.push_back("[provider] mock_alternatives must be >= 1");
}

}  // namespace

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [section, fields] : schema()) {
    for (const auto& f : fields) out.push_back(section + "." + f.name);
  }
  return out;
}

PipelineConfig load_config(const std::optional<fs::path>& file, const Overrides& flags) {
  std::map<std::string, Value> merged;
  Problems problems;
  if (file) read_file_layer(*file, merged, problems);
  read_env_layer(merged, problems);
  for (const auto& [key, value] : flags) merged[key] = {value, fs::current_path(), "command line"};

  PipelineConfig cfg;
  cfg.transducer = nn::toy_preset();
  cfg.transducer.n_dec_layers = 0;
  cfg.asr = nn::toy_preset();

  // Presets replace whole shapes, so they go before individual overrides.
  std::vector<std::pair<std::string, const Value*>> ordered;
  for (const auto& [key, value] : merged) {
    const bool preset = key.ends_with(".preset");
    ordered.insert(preset ? ordered.begin() : ordered.end(), {key, &value});
  }
  for (const auto& [key, value] : ordered) {
    const auto dot = key.find('.');
    const Field* field = dot == std::string::npos ? nullptr : find_field(key.substr(0, dot), key.substr(dot + 1));
    if (!field) {
      problems.push_back(key + ": unknown key (" + value->origin + ")");
      continue;
    }
    field->apply(cfg, *value, key, problems);
  }
  cfg.transducer.n_dec_layers = 0;

  cfg.corpus.seed = cfg.seed;
  cfg.transducer.seed = cfg.seed;
  cfg.transducer_train.seed = cfg.seed + 1;
  cfg.asr.seed = cfg.seed + 2;
  cfg.asr_train.seed = cfg.seed + 3;
  cross_checks(cfg, problems);

  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration (" << problems.size() << " problem" << (problems.size() == 1 ? "" : "s") << "):";
    for (const auto& p : problems) msg << "\n  - " << p;
    fail(ErrorKind::Config, msg.str());
  }
  return cfg;
}

}  // namespace ssr::cli
