#include "commands.hpp"

#include "artifacts.hpp"

#include "ssr/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

namespace ssr::cli {
namespace {

using corpus::CorpusManifest;
using corpus::ManifestEntry;

fs::path feat(const fs::path& dir, const std::string& id, std::string_view kind) {
  return dir / (id + "." + std::string(kind) + ".feat");
}

// Entries of `split`; "all" selects everything. An unlabeled manifest counts
// as all-train.
std::vector<ManifestEntry> select(const CorpusManifest& m, const std::string& split) {
  if (split == kAllSplits) return m.entries;
  const bool labeled = std::any_of(m.entries.begin(), m.entries.end(), [](const auto& e) { return !e.split.empty(); });
  if (!labeled && split == "train") return m.entries;
  auto out = m.split(split);
  require(!out.empty(), ErrorKind::EmptyInput, "manifest has no '" + split + "' entries");
  return out;
}

void require_split_name(const std::string& split) {
  require(split == "train" || split == "test" || split == kAllSplits, ErrorKind::Parameter,
          "split must be train, test or all, got '" + split + "'");
}

fs::path loss_curve_path(fs::path model) { return model.replace_extension(".loss.csv"); }

std::atomic<bool> verbose{true};

void log(const std::string& line) {
  if (verbose) std::cerr << "ssr: " << line << '\n';
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

}  // namespace

void set_verbose(bool on) { verbose = on; }

void gen_corpus(const PipelineConfig& cfg, const fs::path& out) {
  const auto m = corpus::generate_corpus(cfg.corpus, out, cfg.framing);
  log("wrote " + std::to_string(m.entries.size()) + " utterances to " + (out / "manifest.jsonl").string());
}

void featurize(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& out) {
  const auto m = corpus::load_manifest(manifest);
  fs::create_directories(out);
  parallel_for(m.entries.size(), [&](std::size_t i) {
    const auto& e = m.entries[i];
    const auto silent = signals::read_recording(m.resolve(e.silent_emg_path));
    require(silent.mode == e.mode, ErrorKind::Ingestion,
            e.utterance_id + ": recording mode disagrees with the manifest");
    write_feature_matrix(signals::featurize_recording(silent, cfg.framing), feat(out, e.utterance_id, "silent"));
    if (e.vocal_emg_path) {
      const auto vocal = signals::read_recording(m.resolve(*e.vocal_emg_path));
      write_feature_matrix(signals::featurize_recording(vocal, cfg.framing), feat(out, e.utterance_id, "vocal"));
    }
    if (e.audio_path) {
      const auto audio = signals::read_recording(m.resolve(*e.audio_path));
      require(audio.sample_rate_hz == cfg.mel.sample_rate_hz, ErrorKind::Parameter,
              e.utterance_id + ": audio is " + fixed(audio.sample_rate_hz, 0) + " Hz but [mel] expects " +
                  fixed(cfg.mel.sample_rate_hz, 0) + " Hz");
      const auto mel = acoustic::log_mel(audio.channel(0), cfg.mel);
      write_feature_matrix(acoustic::to_feature_matrix(mel), feat(out, e.utterance_id, "mel"));
    }
  });
  log("featurized " + std::to_string(m.entries.size()) + " utterances into " + out.string());
}

void align_targets(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& features,
                   const fs::path& out) {
  const auto m = corpus::load_manifest(manifest);
  std::vector<ManifestEntry> parallel;
  for (const auto& e : m.entries) {
    if (e.vocal_emg_path && e.audio_path) parallel.push_back(e);
  }
  require(!parallel.empty(), ErrorKind::EmptyInput, "no utterance has both vocalized EMG and audio");

  std::vector<FeatureMatrix> silent(parallel.size()), vocal(parallel.size()), mel(parallel.size());
  parallel_for(parallel.size(), [&](std::size_t i) {
    const auto& id = parallel[i].utterance_id;
    silent[i] = read_feature_matrix(feat(features, id, "silent"));
    vocal[i] = read_feature_matrix(feat(features, id, "vocal"));
    mel[i] = read_feature_matrix(feat(features, id, "mel"));
  });

  std::optional<align::CcaModel> shared;
  if (cfg.transfer.refine) {
    std::vector<FeatureMatrix> pool_s, pool_v;
    const bool labeled = std::any_of(parallel.begin(), parallel.end(), [](const auto& e) { return e.split == "train"; });
    for (std::size_t i = 0; i < parallel.size(); ++i) {
      if (labeled && parallel[i].split != "train") continue;
      pool_s.push_back(silent[i]);
      pool_v.push_back(vocal[i]);
    }
    shared = align::fit_transfer_cca(pool_s, pool_v, cfg.transfer);
    log("pooled CCA over " + std::to_string(pool_s.size()) + " utterances, top correlation " +
        fixed(shared->correlations.empty() ? 0.0 : shared->correlations.front()));
  }

  fs::create_directories(out);
  std::vector<std::string> rows(parallel.size());
  parallel_for(parallel.size(), [&](std::size_t i) {
    const auto& e = parallel[i];
    const auto res = align::audio_target_transfer(silent[i], vocal[i], mel[i].data, cfg.transfer,
                                                  shared ? &*shared : nullptr);
    FeatureMatrix target{res.targets, mel[i].dim_labels, silent[i].frame_stride_s, silent[i].frame_length_s};
    write_feature_matrix(target, feat(out, e.utterance_id, "target"));
    align::write_path(res.path, out / (e.utterance_id + ".path"));

    // Mean vocalized-frame offset from the generator's alignment, when it shipped one.
    std::string truth_error = "nan";
    const fs::path truth = m.base_dir / (e.utterance_id + ".truth.path");
    if (fs::exists(truth)) {
      const auto n = static_cast<std::size_t>(silent[i].frames());
      const auto got = align::last_partner(res.path, n);
      const auto want = align::last_partner(align::read_path(truth), n);
      double sum = 0.0;
      for (std::size_t f = 0; f < n; ++f) sum += std::abs(double(got[f]) - double(want[f]));
      truth_error = fixed(sum / double(n));
    }
    rows[i] = e.utterance_id + '\t' + std::to_string(silent[i].frames()) + '\t' + std::to_string(vocal[i].frames()) +
              '\t' + fixed(res.path.total_cost) + '\t' + truth_error + '\n';
  });
  std::ofstream summary(out / "summary.tsv");
  summary << "utterance_id\tsilent_frames\tvocal_frames\tpath_cost\ttruth_frame_error\n";
  for (const auto& r : rows) summary << r;
  if (!summary) fail(ErrorKind::Io, "cannot write " + (out / "summary.tsv").string());
  log("aligned " + std::to_string(parallel.size()) + " utterances into " + out.string());
}

void train_transducer(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& features,
                      const fs::path& targets, const fs::path& out_model) {
  const auto m = corpus::load_manifest(manifest);
  std::vector<nn::TrainingPair> pairs;
  std::size_t silent_pairs = 0;
  for (const auto& e : select(m, "train")) {
    const fs::path target = feat(targets, e.utterance_id, "target");
    if (fs::exists(target)) {
      pairs.push_back({read_feature_matrix(feat(features, e.utterance_id, "silent")).data,
                       read_feature_matrix(target).data, e.session_id});
      ++silent_pairs;
    }
    if (cfg.mixed_training && e.vocal_emg_path && e.audio_path) {
      const Matrix vocal = read_feature_matrix(feat(features, e.utterance_id, "vocal")).data;
      const Matrix mel = read_feature_matrix(feat(features, e.utterance_id, "mel")).data;
      pairs.push_back({vocal, align::match_frame_count(mel, vocal.rows(), cfg.transfer.frame_tolerance), e.session_id});
    }
  }
  require(!pairs.empty(), ErrorKind::EmptyInput, "no training pairs: run align first or enable mixed_training");
  log("training transducer on " + std::to_string(pairs.size()) + " pairs (" + std::to_string(silent_pairs) +
      " silent)");
  const auto result = nn::train_transducer(pairs, cfg.transducer, cfg.transducer_train);
  nn::save_transducer(result.model, out_model);
  nn::write_loss_curve(result.losses, loss_curve_path(out_model));
  if (!result.losses.empty()) {
    log("loss " + fixed(result.losses.front()) + " -> " + fixed(result.losses.back()));
  }
}

void transduce(const PipelineConfig&, const fs::path& manifest, const fs::path& features, const fs::path& model_path,
               const fs::path& out, const std::string& split) {
  require_split_name(split);
  const auto m = corpus::load_manifest(manifest);
  const auto entries = select(m, split);
  const auto model = nn::load_transducer(model_path);
  fs::create_directories(out);
  std::vector<double> seconds(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const auto& e = entries[i];
    require(e.mode == signals::SpeechMode::Silent, ErrorKind::Parameter,
            e.utterance_id + ": inference takes silent EMG only");
    const auto silent = read_feature_matrix(feat(features, e.utterance_id, "silent"));
    Matrix pred;
    seconds[i] = eval::time_utterance([&] { pred = nn::transduce(model, silent.data, e.session_id); });
    std::vector<std::string> labels;
    for (Eigen::Index c = 0; c < pred.cols(); ++c) labels.push_back("mel" + std::to_string(c));
    write_feature_matrix({pred, labels, silent.frame_stride_s, silent.frame_length_s}, feat(out, e.utterance_id, "pred"));
  });
  std::map<std::string, double> timings;
  for (std::size_t i = 0; i < entries.size(); ++i) timings[entries[i].utterance_id] = seconds[i];
  write_timings(timings, out / "timings.tsv");
  log("transduced " + std::to_string(entries.size()) + " utterances into " + out.string());
}

void train_asr(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& features,
               const std::optional<fs::path>& predicted, const fs::path& out_model) {
  const auto m = corpus::load_manifest(manifest);
  std::vector<asr::AsrExample> examples;
  for (const auto& e : select(m, "train")) {
    const fs::path mel = feat(features, e.utterance_id, "mel");
    if (fs::exists(mel)) examples.push_back({read_feature_matrix(mel).data, e.transcript});
    if (predicted) {
      const fs::path pred = feat(*predicted, e.utterance_id, "pred");
      if (fs::exists(pred)) examples.push_back({read_feature_matrix(pred).data, e.transcript});
    }
  }
  require(!examples.empty(), ErrorKind::EmptyInput, "no recognizer training examples");
  log("training recognizer on " + std::to_string(examples.size()) + " examples");
  const auto result = asr::train_asr(examples, cfg.asr, cfg.asr_train);
  asr::save_asr(result.model, out_model);
  nn::write_loss_curve(result.losses, loss_curve_path(out_model));
  if (!result.losses.empty()) {
    log("loss " + fixed(result.losses.front()) + " -> " + fixed(result.losses.back()));
  }
}

void transcribe(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& mels, const std::string& suffix,
                const fs::path& model_path, const fs::path& out, const std::string& split) {
  require_split_name(split);
  const auto m = corpus::load_manifest(manifest);
  const auto entries = select(m, split);
  const auto model = asr::load_asr(model_path);
  std::map<std::string, double> upstream;
  if (fs::exists(mels / "timings.tsv")) upstream = read_timings(mels / "timings.tsv");

  const std::size_t n = entries.size();
  std::vector<eval::Transcript> greedy(n), beam(n);
  std::vector<NBestRecord> nbest(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& id = entries[i].utterance_id;
    const Matrix mel = read_feature_matrix(feat(mels, id, suffix)).data;
    const auto it = upstream.find(id);
    const double before = it == upstream.end() ? 0.0 : it->second;

    asr::Hypothesis g;
    const double g_s = eval::time_utterance([&] { g = asr::greedy_decode(model, mel, cfg.beam.max_len); });
    greedy[i] = {id, asr::detokenize(model.vocab, g.tokens), before + g_s};

    std::vector<asr::Hypothesis> hyps;
    const double b_s = eval::time_utterance([&] { hyps = asr::beam_search(model, mel, cfg.beam); });
    beam[i] = {id, asr::detokenize(model.vocab, hyps.front().tokens), before + b_s};
    nbest[i] = {id, before + b_s, {}};
    for (std::size_t k = 0; k < std::min(cfg.n_best, hyps.size()); ++k) {
      nbest[i].hypotheses.push_back({asr::detokenize(model.vocab, hyps[k].tokens), hyps[k].log_prob});
    }
  });
  fs::create_directories(out);
  write_transcripts(greedy, out / "greedy.tsv");
  write_transcripts(beam, out / "beam.tsv");
  std::sort(nbest.begin(), nbest.end(), [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });
  write_nbest(nbest, out / "nbest.jsonl");
  log("transcribed " + std::to_string(n) + " utterances into " + out.string());
}

void correct(const PipelineConfig& cfg, const fs::path& nbest_path, const std::optional<fs::path>& manifest,
             const fs::path& out, bool fallback_on_error) {
  auto records = read_nbest(nbest_path);
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.utterance_id < b.utterance_id; });

  std::vector<std::string> lexicon;
  if (cfg.lexicon_source == "corpus") {
    require(manifest.has_value(), ErrorKind::Config, "[filter] lexicon = corpus needs --manifest");
    std::set<std::string> words;
    for (const auto& e : select(corpus::load_manifest(*manifest), "train")) {
      for (auto& w : eval::normalize_words(e.transcript)) words.insert(std::move(w));
    }
    lexicon.assign(words.begin(), words.end());
  } else if (cfg.lexicon_source != "none") {
    lexicon = correction::load_word_list(cfg.lexicon_source);
  }
  auto filter = cfg.filter;
  filter.domain_lexicon = lexicon;
  filter.validate();

  auto make_provider = [&]() -> std::unique_ptr<correction::CorrectionProvider> {
    if (cfg.provider.kind == "remote") return std::make_unique<correction::RemoteProvider>(cfg.provider.remote);
    return std::make_unique<correction::MockProvider>(
        correction::MockConfig{cfg.seed, lexicon, cfg.provider.mock_alternatives});
  };

  const std::size_t n = records.size();
  std::vector<eval::Transcript> rows(n);
  std::vector<std::string> log_lines(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& r = records[i];
    const std::string& input = r.hypotheses.front().text;
    std::vector<correction::CorrectionCandidate> candidates;
    std::string output;
    std::string error;
    const double s = eval::time_utterance([&] {
      try {
        candidates = make_provider()->propose({input, r.hypotheses, filter.max_seq_tokens});
      } catch (const Error& e) {
        if (!fallback_on_error || (e.kind() != ErrorKind::Timeout && e.kind() != ErrorKind::Provider)) throw;
        error = e.what();
      }
      output = correction::apply_correction(input, correction::filter_candidates(input, candidates, filter));
    });
    rows[i] = {r.utterance_id, output, r.seconds + s};

    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : candidates) {
      cands.push_back({{"text", c.text},
                       {"confidence", c.confidence},
                       {"verdict", std::string(correction::to_string(correction::judge(input, c, filter)))}});
    }
    nlohmann::json line{{"utterance_id", r.utterance_id}, {"input", input}, {"output", output}, {"candidates", cands}};
    if (!error.empty()) line["provider_error"] = error;
    log_lines[i] = line.dump() + '\n';
  });
  write_transcripts(rows, out);
  fs::path log_path = out;
  log_path.replace_extension(".jsonl");
  std::ofstream lf(log_path);
  for (const auto& l : log_lines) lf << l;
  if (!lf) fail(ErrorKind::Io, "cannot write " + log_path.string());
  const auto changed = std::count_if(rows.begin(), rows.end(), [&](const auto& row) {
    const auto& rec = *std::find_if(records.begin(), records.end(),
                                    [&](const auto& x) { return x.utterance_id == row.utterance_id; });
    return row.text != rec.hypotheses.front().text;
  });
  log("corrected " + std::to_string(changed) + " of " + std::to_string(n) + " transcripts");
}

void evaluate(const std::optional<fs::path>& manifest, const std::optional<fs::path>& references,
              const std::string& split, const std::vector<SystemInput>& systems, const fs::path& out) {
  require(!systems.empty(), ErrorKind::Parameter, "at least one --system NAME=FILE is required");
  require(manifest.has_value() != references.has_value(), ErrorKind::Parameter,
          "give exactly one of --manifest or --references");
  std::vector<eval::Reference> refs;
  if (manifest) {
    require_split_name(split);
    for (const auto& e : select(corpus::load_manifest(*manifest), split)) refs.push_back({e.utterance_id, e.transcript});
  } else {
    for (const auto& t : read_transcripts(*references)) refs.push_back({t.utterance_id, t.text});
  }
  require(!refs.empty(), ErrorKind::EmptyInput, "no references");
  std::set<std::string> wanted;
  for (const auto& r : refs) wanted.insert(r.utterance_id);

  std::vector<eval::SystemDetails> scored;
  for (const auto& sys : systems) {
    auto hyps = read_transcripts(sys.transcripts);
    std::erase_if(hyps, [&](const auto& h) { return !wanted.count(h.utterance_id); });
    scored.push_back(eval::score_system(sys.name, refs, hyps));
  }
  const auto rep = eval::build_report(std::move(scored));
  eval::emit_report(rep, eval::ReportFormat::Csv, out);
  fs::path details = out;
  details.replace_extension(".details.csv");
  std::ofstream df(details);
  df << eval::render_details_csv(rep);
  if (!df) fail(ErrorKind::Io, "cannot write " + details.string());
  std::cout << eval::render_report(rep, eval::ReportFormat::TableText);
}

void report(const fs::path& in, const std::string& format, const std::optional<fs::path>& out) {
  const auto fmt = eval::parse_report_format(format);
  std::ifstream f(in);
  if (!f) fail(ErrorKind::Ingestion, "report not found: " + in.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  auto rep = eval::parse_report_csv(ss.str());
  eval::recompute_relative_improvements(rep);
  if (out) {
    eval::emit_report(rep, fmt, *out);
  } else {
    std::cout << eval::render_report(rep, fmt);
  }
}

}  // namespace ssr::cli
