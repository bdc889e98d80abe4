#include "ssr/correction.hpp"

#include "support.hpp"

#include "httplib.h"

#include <chrono>
#include <thread>

using namespace ssr;
using namespace ssr::correction;

namespace {

CorrectionCandidate cand(std::string text, double conf) { return {std::move(text), conf, "test"}; }

FilterConfig default_filter() {
  FilterConfig cfg;
  cfg.generic_stoplist = load_word_list(std::filesystem::path(SSR_SOURCE_DIR) / "data" / "generic_stoplist.txt");
  return cfg;
}

// Local HTTP endpoint serving canned responses on an ephemeral port.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/correct", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/correct"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Filter, LowConfidenceRejectedRegardlessOfContent) {
  const auto cfg = default_filter();
  EXPECT_EQ(judge("the cat zat on the mat", cand("the cat sat on the mat", 0.65), cfg), Verdict::LowConfidence);
  EXPECT_EQ(judge("x", cand("completely different words here", 0.69999), cfg), Verdict::LowConfidence);
  EXPECT_EQ(judge("the cat zat", cand("the cat sat", std::nan("")), cfg), Verdict::LowConfidence);
}

TEST(Filter, IdenticalTextIsTrivial) {
  const auto cfg = default_filter();
  EXPECT_EQ(judge("the cat sat", cand("the cat sat", 1.0), cfg), Verdict::TrivialEdit);
  EXPECT_EQ(judge("the cat sat", cand("The cat, sat.", 1.0), cfg), Verdict::TrivialEdit);
  EXPECT_EQ(judge("i saw x", cand("i saw y", 1.0), cfg), Verdict::TrivialEdit);
}

TEST(Filter, WorkedExampleIsAccepted) {
  auto cfg = default_filter();
  cfg.domain_lexicon = {"sat"};
  const std::string input = "the cat zat on the mat";
  const std::vector<CorrectionCandidate> candidates{cand("the cat sat on the mat", 0.9)};
  EXPECT_EQ(judge(input, candidates[0], cfg), Verdict::Accepted);
  const auto kept = filter_candidates(input, candidates, cfg);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].text, "the cat sat on the mat");
}

TEST(Filter, GenericSubstitutionRejected) {
  const auto cfg = default_filter();
  EXPECT_EQ(judge("the cat sat on the mat", cand("an cat sat on that mat", 0.95), cfg),
            Verdict::GenericSubstitution);
  EXPECT_EQ(judge("the cat sat on the mat", cand("the cat sat on the hat", 0.95), cfg), Verdict::Accepted);
}

TEST(Filter, DomainLexiconLimitsNewWords) {
  auto cfg = default_filter();
  cfg.domain_lexicon = {"sat", "mat"};
  EXPECT_EQ(judge("the cat zat", cand("the cat sat", 0.9), cfg), Verdict::Accepted);
  EXPECT_EQ(judge("the cat zat", cand("the cat spat", 0.9), cfg), Verdict::OutOfDomain);
  // Words already in the input are always allowed.
  EXPECT_EQ(judge("zebra cat zat", cand("zebra cat sat", 0.9), cfg), Verdict::Accepted);
}

TEST(Filter, RanksByConfidence) {
  const auto cfg = default_filter();
  const std::vector<CorrectionCandidate> c{cand("red dog ran", 0.8), cand("big dog ran", 0.9), cand("sun dog ran", 0.8)};
  const auto kept = filter_candidates("fox dog ran", c, cfg);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].text, "big dog ran");
  EXPECT_EQ(kept[1].text, "red dog ran");
  EXPECT_EQ(kept[2].text, "sun dog ran");
}

TEST(Filter, ThresholdIsMonotone) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> words{"cat", "sat", "mat", "hat", "dog", "ran"};
  std::vector<CorrectionCandidate> c;
  for (int i = 0; i < 60; ++i) {
    c.push_back(cand(words[std::size_t(i) % 6] + " " + words[std::size_t(i * 7) % 6] + " ran", u(rng)));
  }
  auto cfg = default_filter();
  std::size_t prev = c.size() + 1;
  for (double t = 0.0; t <= 1.0001; t += 0.05) {
    cfg.confidence_threshold = t;
    const auto n = filter_candidates("cat cat ran", c, cfg).size();
    EXPECT_LE(n, prev) << t;
    prev = n;
  }
}

TEST(Apply, FallbackAndRanking) {
  const std::string input = "the  cat zat\ton the mat ";
  EXPECT_EQ(apply_correction(input, {}), input);  // bit-exact
  EXPECT_EQ(apply_correction(input, {cand("one", 0.8)}), "one");
  const auto cfg = default_filter();
  const std::vector<CorrectionCandidate> c{cand("the cat sat on the mat", 0.8), cand("the cat hat on the mat", 0.9)};
  EXPECT_EQ(apply_correction(input, filter_candidates(input, c, cfg)), "the cat hat on the mat");
}

TEST(Apply, OutputIsInputOrCandidate) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto cfg = default_filter();
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<CorrectionCandidate> c{cand("big red fox", u(rng)), cand("big red box", u(rng)), cand("bag red fox", u(rng))};
    const std::string out = apply_correction("bog red fox", filter_candidates("bog red fox", c, cfg));
    EXPECT_TRUE(out == "bog red fox" || out == c[0].text || out == c[1].text || out == c[2].text);
  }
}

TEST(Filter, ConfigValidationListsEveryProblem) {
  FilterConfig cfg;
  cfg.confidence_threshold = 1.5;
  cfg.max_seq_tokens = 0;
  EXPECT_EQ(cfg.problems().size(), 2u);
  EXPECT_SSR_ERROR(cfg.validate(), ErrorKind::Config);
}

TEST(Mock, InLexiconTranscriptIsReturnedWhole) {
  MockProvider mock({0, {"the", "cat", "sat"}, 3});
  const auto c = mock.propose({"the cat sat", {}, 128});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].text, "the cat sat");
  EXPECT_EQ(c[0].confidence, 1.0);
  EXPECT_EQ(c[0].provider_id, "mock");
}

TEST(Mock, NearestWordsByEditDistance) {
  MockProvider mock({0, {"sat", "it"}, 3});
  const auto c = mock.propose({"zat", {}, 128});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].text, "sat");
  EXPECT_DOUBLE_EQ(c[0].confidence, 0.5);
  EXPECT_EQ(c[1].text, "it");
  EXPECT_DOUBLE_EQ(c[1].confidence, 1.0 / 3.0);

  // Under unit-cost Levenshtein "at" is one deletion away, tying with "sat".
  MockProvider tie({0, {"sat", "at"}, 3});
  const auto t = tie.propose({"zat", {}, 128});
  ASSERT_EQ(t.size(), 2u);
  for (const auto& x : t) EXPECT_DOUBLE_EQ(x.confidence, 0.5);
}

TEST(Mock, EmptyTranscriptGivesNothing) {
  MockProvider mock({0, {"sat"}, 3});
  EXPECT_TRUE(mock.propose({"", {}, 128}).empty());
  EXPECT_TRUE(mock.propose({"   ", {}, 128}).empty());
}

TEST(Mock, DeterministicPerSeedAndCombinesWords) {
  const std::vector<std::string> lex{"cat", "hat", "mat", "bat", "sat", "the"};
  MockProvider a({5, lex, 2}), b({5, lex, 2});
  const CorrectionRequest req{"the zat qat", {}, 128};
  const auto ca = a.propose(req);
  EXPECT_EQ(ca, b.propose(req));
  // Two alternatives per unknown word plus one combined candidate.
  ASSERT_EQ(ca.size(), 5u);
  EXPECT_DOUBLE_EQ(ca.back().confidence, 0.25);
}

TEST(Mock, RespectsMaxTokens) {
  MockProvider mock({0, {"cat"}, 1});
  const auto c = mock.propose({"cat cat zat", {}, 2});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].text, "cat cat zat");
}

TEST(WireFormat, RoundTrip) {
  CorrectionRequest req{"the cat zat", {{"the cat zat", -1.5}, {"the cat sat", -2.0}}, 64};
  const auto back = decode_request(encode_request(req));
  EXPECT_EQ(back.transcript, req.transcript);
  ASSERT_EQ(back.n_best.size(), 2u);
  EXPECT_EQ(back.n_best[1].log_prob, -2.0);
  EXPECT_EQ(back.max_tokens, 64u);
  const std::vector<CorrectionCandidate> c{cand("a b", 0.25)};
  const auto decoded = decode_response(encode_response(c), "test");
  EXPECT_EQ(decoded, c);
  EXPECT_SSR_ERROR(decode_response("{\"candidates\": [{\"text\": \"x\", \"confidence\": 2}]}", "r"),
                   ErrorKind::Provider);
  EXPECT_SSR_ERROR(decode_response("not json", "r"), ErrorKind::Provider);
}

TEST(Remote, ServesCandidates) {
  LocalServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto r = decode_request(req.body);
    res.set_content(encode_response({{r.transcript + " fixed", 0.9, ""}}), "application/json");
  });
  RemoteProvider remote({server.endpoint(), 5.0, 0});
  const auto c = remote.propose({"the cat", {}, 128});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].text, "the cat fixed");
  EXPECT_EQ(c[0].provider_id, "remote");
}

TEST(Remote, HttpErrorIsProviderError) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  RemoteProvider remote({server.endpoint(), 5.0, 1});
  EXPECT_SSR_ERROR(remote.propose({"x", {}, 128}), ErrorKind::Provider);
}

TEST(Remote, SlowServerTimesOut) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1200));
    res.set_content(encode_response({}), "application/json");
  });
  RemoteProvider remote({server.endpoint(), 0.2, 0});
  const auto start = std::chrono::steady_clock::now();
  EXPECT_SSR_ERROR(remote.propose({"x", {}, 128}), ErrorKind::Timeout);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(Remote, UnreachableEndpointFails) {
  EXPECT_SSR_ERROR(RemoteProvider({"not a url", 1.0, 0}), ErrorKind::Config);
  RemoteProvider remote({"http://127.0.0.1:1/correct", 0.5, 0});
  EXPECT_THROW(remote.propose({"x", {}, 128}), ssr::Error);
}

TEST(WordList, SkipsCommentsAndNormalizes) {
  test::TempDir dir("words");
  test::write_text(dir / "w.txt", "# header\n\nThe\n  Cat, \n#x\nsat\n");
  EXPECT_EQ(load_word_list(dir / "w.txt"), (std::vector<std::string>{"the", "cat", "sat"}));
  EXPECT_SSR_ERROR(load_word_list(dir / "missing.txt"), ErrorKind::Io);
}
