#include "ssr/corpus.hpp"
#include "ssr/eval.hpp"

#include "support.hpp"

#include <set>

using namespace ssr;
using namespace ssr::corpus;

namespace {

SynthConfig small_config(std::uint64_t seed = 3) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_utterances = 6;
  return cfg;
}

}  // namespace

TEST(Synth, SameSeedGivesByteIdenticalCorpus) {
  test::TempDir a("corpus-a"), b("corpus-b");
  generate_corpus(small_config(), a.path());
  generate_corpus(small_config(), b.path());
  std::set<std::string> names;
  for (const auto& f : std::filesystem::directory_iterator(a.path())) names.insert(f.path().filename().string());
  EXPECT_EQ(names.size(), 6u * 4u + 1u);
  for (const auto& n : names) {
    ASSERT_TRUE(std::filesystem::exists(b / n)) << n;
    EXPECT_EQ(test::read_text(a / n), test::read_text(b / n)) << n;
  }
  test::TempDir c("corpus-c");
  generate_corpus(small_config(4), c.path());
  EXPECT_NE(test::read_text(a / "manifest.jsonl"), test::read_text(c / "manifest.jsonl"));
}

TEST(Synth, NoWarpNoNoiseMakesSilentEqualVocal) {
  auto cfg = small_config();
  cfg.time_warp_strength = 0.0;
  cfg.noise_sigma = 0.0;
  for (const auto& u : synthesize_corpus(cfg)) {
    EXPECT_EQ(u.silent.samples, u.vocal.samples) << u.entry.utterance_id;
    const auto fs = signals::featurize_recording(u.silent);
    const auto fv = signals::featurize_recording(u.vocal);
    const auto path = align::dtw_align(fs, fv);
    ASSERT_EQ(path.pairs.size(), std::size_t(fs.frames()));
    for (std::size_t i = 0; i < path.pairs.size(); ++i) EXPECT_EQ(path.pairs[i], std::make_pair(i, i));
  }
}

TEST(Synth, TwentyUtterancesOverTwoSessions) {
  SynthConfig cfg;
  cfg.seed = 1;
  const auto utts = synthesize_corpus(cfg);
  ASSERT_EQ(utts.size(), 20u);
  std::set<std::string> sessions, ids;
  std::size_t test_count = 0;
  for (const auto& u : utts) {
    sessions.insert(u.entry.session_id);
    ids.insert(u.entry.utterance_id);
    test_count += u.entry.split == "test";
    // Parallel structure and signal validity.
    EXPECT_NO_THROW(u.silent.validate());
    EXPECT_NO_THROW(u.vocal.validate());
    EXPECT_NO_THROW(u.audio.validate());
    EXPECT_EQ(u.silent.channels, 8u);
    EXPECT_EQ(u.silent.mode, signals::SpeechMode::Silent);
    EXPECT_EQ(u.vocal.mode, signals::SpeechMode::Vocalized);
    EXPECT_EQ(u.audio.sample_rate_hz, 16000.0);
    EXPECT_NEAR(double(u.audio.length()), 16.0 * double(u.vocal.length()), 16.0);
    const auto words = u.entry.transcript;
    EXPECT_FALSE(words.empty());
  }
  EXPECT_EQ(sessions.size(), 2u);
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_EQ(test_count, 5u);
}

TEST(Synth, WarpIsMonotoneAndInRange) {
  auto cfg = small_config();
  cfg.time_warp_strength = 0.6;
  for (const auto& u : synthesize_corpus(cfg)) {
    ASSERT_EQ(u.warp.size(), std::size_t(u.silent.length()));
    EXPECT_EQ(u.warp.front(), 0.0);
    for (std::size_t i = 1; i < u.warp.size(); ++i) EXPECT_GT(u.warp[i], u.warp[i - 1]);
    EXPECT_LE(u.warp.back(), double(u.vocal.length() - 1) + 1e-9);
  }
}

TEST(Synth, TranscriptsUseVocabulary) {
  const auto cfg = small_config();
  const std::set<std::string> vocab(cfg.vocab.begin(), cfg.vocab.end());
  for (const auto& u : synthesize_corpus(cfg)) {
    std::size_t n = 0;
    for (const auto& w : eval::normalize_words(u.entry.transcript)) {
      EXPECT_TRUE(vocab.count(w)) << w;
      ++n;
    }
    EXPECT_GE(n, cfg.min_words);
    EXPECT_LE(n, cfg.max_words);
  }
}

TEST(Synth, TrueAlignmentIsMonotonePath) {
  const auto u = synthesize_utterance(small_config(), make_phoneme_map(default_vocabulary(), 8, 3), 0);
  const auto path = true_frame_alignment(u.warp, std::size_t(u.vocal.length()), 1000.0, {});
  const auto frames = signals::frame_count(std::size_t(u.silent.length()), 1000.0, {});
  ASSERT_EQ(path.pairs.size(), frames);
  for (std::size_t i = 0; i < frames; ++i) {
    EXPECT_EQ(path.pairs[i].first, i);
    if (i) EXPECT_GE(path.pairs[i].second, path.pairs[i - 1].second);
  }
}

TEST(Synth, ConfigProblems) {
  SynthConfig cfg;
  cfg.vocab.clear();
  cfg.sessions = 0;
  cfg.min_words = 5;
  cfg.max_words = 2;
  EXPECT_EQ(cfg.problems().size(), 3u);
  EXPECT_SSR_ERROR(cfg.validate(), ErrorKind::Config);
}

TEST(Manifest, RoundTrip) {
  test::TempDir dir("manifest");
  const auto written = generate_corpus(small_config(), dir.path());
  const auto loaded = load_manifest(dir / "manifest.jsonl");
  EXPECT_EQ(loaded, written);
  EXPECT_EQ(loaded.base_dir, dir.path());
  const auto rec = signals::read_recording(loaded.resolve(loaded.entries[0].silent_emg_path));
  EXPECT_EQ(rec.utterance_id, loaded.entries[0].utterance_id);
  for (const auto& e : loaded.entries) {
    EXPECT_TRUE(e.vocal_emg_path.has_value());
    EXPECT_TRUE(e.audio_path.has_value());
  }
  EXPECT_EQ(loaded.split("test").size() + loaded.split("train").size(), loaded.entries.size());
}

TEST(Manifest, MissingFileNamesTheEntry) {
  test::TempDir dir("manifest-missing");
  const auto m = generate_corpus(small_config(), dir.path());
  std::filesystem::remove(dir / m.entries[2].silent_emg_path);
  try {
    load_manifest(dir / "manifest.jsonl");
    FAIL() << "expected ingestion error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Ingestion);
    EXPECT_NE(std::string(e.what()).find(m.entries[2].utterance_id), std::string::npos) << e.what();
  }
}

TEST(Manifest, MalformedAndDuplicateEntries) {
  test::TempDir dir("manifest-bad");
  test::write_text(dir / "a.sig", "x");
  const std::string good =
      R"({"utterance_id":"u1","session_id":"s","transcript":"t","silent_emg_path":"a.sig","mode":"silent"})";
  test::write_text(dir / "m1.jsonl", good + "\n{not json\n");
  EXPECT_SSR_ERROR(load_manifest(dir / "m1.jsonl"), ErrorKind::Ingestion);
  test::write_text(dir / "m2.jsonl", good + "\n" + good + "\n");
  EXPECT_SSR_ERROR(load_manifest(dir / "m2.jsonl"), ErrorKind::Ingestion);
  test::write_text(dir / "m3.jsonl", R"({"utterance_id":"u1","mode":"silent"})" "\n");
  EXPECT_SSR_ERROR(load_manifest(dir / "m3.jsonl"), ErrorKind::Ingestion);
  EXPECT_SSR_ERROR(load_manifest(dir / "absent.jsonl"), ErrorKind::Ingestion);
}

TEST(Manifest, EmptyIsValid) {
  test::TempDir dir("manifest-empty");
  test::write_text(dir / "m.jsonl", "");
  EXPECT_TRUE(load_manifest(dir / "m.jsonl").entries.empty());
  write_manifest(CorpusManifest{}, dir / "n.jsonl");
  EXPECT_TRUE(load_manifest(dir / "n.jsonl").entries.empty());
}
