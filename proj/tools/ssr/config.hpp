#pragma once

#include "ssr/acoustic.hpp"
#include "ssr/align.hpp"
#include "ssr/asr.hpp"
#include "ssr/corpus.hpp"
#include "ssr/correction.hpp"
#include "ssr/nn/transducer.hpp"
#include "ssr/nn/transformer.hpp"
#include "ssr/signals.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssr::cli {

inline constexpr std::string_view kEnvPrefix = "SSR_";

struct ProviderSettings {
  std::string kind = "mock";  // mock | remote
  correction::RemoteConfig remote;
  std::size_t mock_alternatives = 3;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  corpus::SynthConfig corpus;
  signals::FramingConfig framing;
  acoustic::MelConfig mel;
  align::TransferOptions transfer;

  nn::TransformerConfig transducer;
  nn::TrainOptions transducer_train;
  bool mixed_training = true;

  nn::TransformerConfig asr;
  asr::AsrTrainOptions asr_train;

  asr::BeamOptions beam;
  std::size_t n_best = 5;

  correction::FilterConfig filter;
  std::string lexicon_source = "corpus";  // corpus | none | path to a word list
  ProviderSettings provider;
};

// Flat "section.key" -> value overrides, applied last.
using Overrides = std::map<std::string, std::string>;

/// Built-in defaults, then the INI file, then SSR_<SECTION>_<KEY> variables,
/// then `flags`. Relative paths in the file resolve against its directory.
/// Any unknown key, unparsable value or violated module invariant is
/// collected; all of them are reported in one Error(Config).
PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const Overrides& flags);

/// Every key the loader understands, as "section.key".
std::vector<std::string> known_keys();

}  // namespace ssr::cli
