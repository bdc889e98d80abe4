#include "commands.hpp"
#include "config.hpp"

#include "ssr/error.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

using ssr::ErrorKind;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::Ingestion: return 4;
    case ErrorKind::Timeout: return 5;
    case ErrorKind::Provider: return 6;
    case ErrorKind::Parameter: return 10;
    case ErrorKind::EmptyInput: return 11;
    case ErrorKind::Alignment: return 12;
    case ErrorKind::DegenerateMask: return 13;
    case ErrorKind::Lookup: return 14;
    case ErrorKind::State: return 15;
    case ErrorKind::TrainingDivergence: return 16;
    case ErrorKind::Vocabulary: return 17;
  }
  return 1;
}

constexpr int kUsage = 64;
constexpr int kInternal = 70;

}  // namespace

int main(int argc, char** argv) {
  namespace cli = ssr::cli;
  using std::filesystem::path;

  CLI::App app{"Silent speech recognition pipeline: EMG -> mel -> transcript -> correction -> WER"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(
      "Settings come from built-in defaults, then --config, then environment variables\n"
      "named SSR_<SECTION>_<KEY> (e.g. SSR_DECODE_BEAM_WIDTH=8), then command-line flags.\n"
      "Exit codes: 0 ok, 2 config, 3 io, 4 ingestion, 5 timeout, 6 provider,\n"
      "10-17 data errors (parameter, empty input, alignment, mask, lookup, state,\n"
      "training divergence, vocabulary), 64 usage, 70 internal.");

  std::optional<path> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> beam_width;
  std::optional<double> threshold, timeout_s;
  std::optional<std::string> provider, endpoint;
  app.add_option("--config", config_file, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for generation, initialization and shuffling");
  app.add_option("--beam-width", beam_width, "Beam width for transcribe");
  app.add_option("--confidence-threshold", threshold, "Minimum candidate confidence for correct");
  app.add_option("--provider", provider, "Correction provider")->check(CLI::IsMember({"mock", "remote"}));
  app.add_option("--provider-endpoint", endpoint, "http://host:port/path of the remote provider");
  app.add_option("--timeout-s", timeout_s, "Remote provider deadline per request");

  path manifest, out, features, targets, model, mels, nbest, in;
  std::optional<path> predicted, opt_manifest, references, report_out;
  std::string split = "test", suffix = "pred", format = "table-text";
  bool fallback = false;
  std::vector<std::string> system_specs;

  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic parallel corpus and its manifest");
  gen->add_option("--out", out, "Output directory")->required();

  auto* fz = app.add_subcommand("featurize", "EMG features and log-mel spectrograms for every utterance");
  fz->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  fz->add_option("--out", out, "Feature directory")->required();

  auto* al = app.add_subcommand("align", "Transfer vocalized mel targets onto silent EMG frames");
  al->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  al->add_option("--features", features)->required()->check(CLI::ExistingDirectory);
  al->add_option("--out", out, "Target directory")->required();

  auto* tt = app.add_subcommand("train-transducer", "Train the EMG-to-mel transducer");
  tt->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  tt->add_option("--features", features)->required()->check(CLI::ExistingDirectory);
  tt->add_option("--targets", targets)->required()->check(CLI::ExistingDirectory);
  tt->add_option("--out", out, "Model file (JSON); the loss curve goes next to it")->required();

  auto* td = app.add_subcommand("transduce", "Predict mel spectrograms from silent EMG");
  td->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  td->add_option("--features", features)->required()->check(CLI::ExistingDirectory);
  td->add_option("--model", model)->required()->check(CLI::ExistingFile);
  td->add_option("--split", split, "train, test or all")->capture_default_str();
  td->add_option("--out", out, "Prediction directory")->required();

  auto* ta = app.add_subcommand("train-asr", "Train the recognizer on mel spectrograms");
  ta->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  ta->add_option("--features", features)->required()->check(CLI::ExistingDirectory);
  ta->add_option("--predicted", predicted, "Also train on transduced mels from this directory");
  ta->add_option("--out", out, "Model file (JSON)")->required();

  auto* tr = app.add_subcommand("transcribe", "Greedy and beam transcripts plus n-best lists");
  tr->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  tr->add_option("--mels", mels)->required()->check(CLI::ExistingDirectory);
  tr->add_option("--suffix", suffix, "Mel file kind: <id>.<suffix>.feat")->capture_default_str();
  tr->add_option("--model", model)->required()->check(CLI::ExistingFile);
  tr->add_option("--split", split, "train, test or all")->capture_default_str();
  tr->add_option("--out", out, "Output directory")->required();

  auto* co = app.add_subcommand("correct", "Filtered correction of the top hypothesis");
  co->add_option("--nbest", nbest)->required()->check(CLI::ExistingFile);
  co->add_option("--manifest", opt_manifest, "Source of the domain lexicon when [filter] lexicon = corpus");
  co->add_option("--out", out, "Corrected transcripts (TSV); a JSONL log goes next to it")->required();
  co->add_flag("--fallback-on-error", fallback, "Keep the input when the provider fails or times out");

  auto* ev = app.add_subcommand("evaluate", "Score transcript sets and write a report");
  ev->add_option("--manifest", opt_manifest, "References from this manifest");
  ev->add_option("--references", references, "References from a transcript file");
  ev->add_option("--split", split, "Manifest split to score")->capture_default_str();
  ev->add_option("--system", system_specs, "NAME=FILE, repeatable; the first is the baseline")->required();
  ev->add_option("--out", out, "Report CSV")->required();

  auto* rp = app.add_subcommand("report", "Render a report CSV");
  rp->add_option("--in", in)->required()->check(CLI::ExistingFile);
  rp->add_option("--format", format)->check(CLI::IsMember({"table-text", "csv", "plot-data"}))->capture_default_str();
  rp->add_option("--out", report_out, "Output file; stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    cli::Overrides flags;
    if (seed) flags["run.seed"] = std::to_string(*seed);
    if (beam_width) flags["decode.beam_width"] = std::to_string(*beam_width);
    if (threshold) flags["filter.confidence_threshold"] = CLI::detail::to_string(*threshold);
    if (provider) flags["provider.kind"] = *provider;
    if (endpoint) flags["provider.endpoint"] = *endpoint;
    if (timeout_s) flags["provider.timeout_s"] = CLI::detail::to_string(*timeout_s);
    const auto cfg = cli::load_config(config_file, flags);

    if (*gen) cli::gen_corpus(cfg, out);
    if (*fz) cli::featurize(cfg, manifest, out);
    if (*al) cli::align_targets(cfg, manifest, features, out);
    if (*tt) cli::train_transducer(cfg, manifest, features, targets, out);
    if (*td) cli::transduce(cfg, manifest, features, model, out, split);
    if (*ta) cli::train_asr(cfg, manifest, features, predicted, out);
    if (*tr) cli::transcribe(cfg, manifest, mels, suffix, model, out, split);
    if (*co) cli::correct(cfg, nbest, opt_manifest, out, fallback);
    if (*ev) {
      std::vector<cli::SystemInput> systems;
      for (const auto& spec : system_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
          ssr::fail(ErrorKind::Parameter, "--system expects NAME=FILE, got '" + spec + "'");
        }
        systems.push_back({spec.substr(0, eq), spec.substr(eq + 1)});
      }
      cli::evaluate(opt_manifest, references, split, systems, out);
    }
    if (*rp) cli::report(in, format, report_out);
  } catch (const ssr::Error& e) {
    std::cerr << "ssr: error [" << ssr::to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "ssr: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return 0;
}
