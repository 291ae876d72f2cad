#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "dialoforge/errors.hpp"
#include "dialoforge/manifest.hpp"
#include "dialoforge/mock_speech.hpp"
#include "dialoforge/quality_gate.hpp"
#include "dialoforge/review_store.hpp"
#include "dialoforge/text.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dialoforge;
using namespace testing_support;

namespace {

std::vector<std::string> random_sentence(std::mt19937_64& gen, int min_words, int max_words) {
  static const char* kVocab[] = {"a", "b", "c", "d", "e"};
  std::uniform_int_distribution<int> len(min_words, max_words), w(0, 4);
  std::vector<std::string> out(static_cast<std::size_t>(len(gen)));
  for (auto& s : out) s = kVocab[w(gen)];
  return out;
}

/// Looks embeddings up by (first sample, second sample) = (group key, index).
class TableEmbedder final : public SpeakerEmbedClient {
 public:
  explicit TableEmbedder(std::map<int, std::vector<std::vector<double>>> table) : table_(std::move(table)) {}
  std::vector<double> embed(const Waveform& w) override {
    const int key = static_cast<int>(w.samples.at(0));
    const int idx = static_cast<int>(w.samples.at(1));
    return table_.at(key).at(static_cast<std::size_t>(idx));
  }

 private:
  std::map<int, std::vector<std::vector<double>>> table_;
};

Waveform tagged(int speaker, int idx) {
  Waveform w;
  w.samples = {static_cast<double>(speaker), static_cast<double>(idx), 0.0};
  return w;
}

struct Rendered {
  std::shared_ptr<MockSpeechRegistry> registry = std::make_shared<MockSpeechRegistry>();
  MockTtsClient tts{registry};
  MockAsrClient asr{registry};
  SpectralSpeakerEmbedder embedder;

  SpokenDialogue render(const DialogueScript& script) {
    SpokenDialogue d;
    d.script = script;
    for (std::size_t k = 0; k < script.turns.size(); ++k) {
      const int speaker = script.turns[k].role == Role::human ? 0 : 1;
      d.utterances.push_back(synthesize_turn(tts, script.turns[k], speaker, 100 + k));
      d.speaker_ids.push_back(speaker);
    }
    return d;
  }
};

std::string words_string(int n, int offset = 0) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i + offset);
  return s;
}

/// `ref` with the first `errors` words substituted.
std::string with_substitutions(int n, int errors) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + (i < errors ? "zz" + std::to_string(i) : "w" + std::to_string(i));
  return s;
}

}  // namespace

TEST(Wer, IdenticalIsZero) { EXPECT_EQ(wer("The cat, sat!", "the cat sat"), 0.0); }

TEST(Wer, OneInsertionOverThreeWords) { EXPECT_DOUBLE_EQ(wer("the cat sat", "the cat sat down"), 1.0 / 3.0); }

TEST(Wer, EmptyHypothesisIsAllDeletions) { EXPECT_EQ(wer("one two three four", ""), 1.0); }

TEST(Wer, EmptyReferenceIsContractError) { EXPECT_THROW(wer("  ", "x"), ContractError); }

TEST(Wer, MayExceedOne) { EXPECT_DOUBLE_EQ(wer("a", "b c d"), 3.0); }

TEST(Wer, MatchesBruteForceOracleOnRandomPairs) {
  std::mt19937_64 gen(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto ref = random_sentence(gen, 1, 8);
    const auto hyp = random_sentence(gen, 0, 8);
    const double w = wer(text::join(ref, " "), text::join(hyp, " "));
    EXPECT_EQ(static_cast<std::size_t>(std::llround(w * ref.size())), oracle::edit_distance(ref, hyp));
    EXPECT_EQ(word_edit_distance(ref, hyp), oracle::edit_distance(ref, hyp));
    const double lower = std::abs(static_cast<double>(ref.size()) - static_cast<double>(hyp.size())) / ref.size();
    EXPECT_GE(w + 1e-12, lower);
  }
}

TEST(SpeakerConsistency, IdenticalEmbeddingsGiveOne) {
  TableEmbedder emb({{0, {{1, 0}, {1, 0}, {1, 0}}}});
  const auto a = tagged(0, 0), b = tagged(0, 1), c = tagged(0, 2);
  const auto r = check_speaker_consistency({{0, {&a, &b, &c}}}, emb);
  EXPECT_DOUBLE_EQ(r.at(0), 1.0);
}

TEST(SpeakerConsistency, OrthogonalEmbeddingsGiveZero) {
  TableEmbedder emb({{3, {{1, 0}, {0, 1}}}});
  const auto a = tagged(3, 0), b = tagged(3, 1);
  EXPECT_NEAR(check_speaker_consistency({{3, {&a, &b}}}, emb).at(3), 0.0, 1e-15);
}

TEST(SpeakerConsistency, SingleUtteranceGroupIsOne) {
  TableEmbedder emb({{0, {{0.6, 0.8}}}});
  const auto a = tagged(0, 0);
  EXPECT_EQ(check_speaker_consistency({{0, {&a}}}, emb).at(0), 1.0);
}

TEST(SpeakerConsistency, MockSpeakersAreSelfConsistent) {
  Rendered r;
  const auto d = r.render(simple_script("s", 8, 6));
  SpeakerGroups groups;
  for (std::size_t i = 0; i < d.utterances.size(); ++i) groups[d.speaker_ids[i]].push_back(&d.utterances[i]);
  const auto c = check_speaker_consistency(groups, r.embedder);
  ASSERT_EQ(c.size(), 2u);
  for (const auto& [speaker, v] : c) EXPECT_GE(v, 0.99) << speaker;
  // and the two mock speakers are distinguishable
  const double cross = cosine_similarity(r.embedder.embed(d.utterances[0]), r.embedder.embed(d.utterances[1]));
  EXPECT_LT(cross, 0.75);
}

TEST(Verify, CleanMocksPass) {
  Rendered r;
  const auto d = r.render(simple_script("s", 4));
  std::vector<std::string> transcripts;
  const auto rec = verify_dialogue(d, r.asr, r.embedder, GateConfig{}, &transcripts);
  EXPECT_TRUE(rec.machine_verdict.pass);
  EXPECT_EQ(rec.per_utterance_wer, std::vector<double>(4, 0.0));
  EXPECT_EQ(transcripts.size(), 4u);
  EXPECT_EQ(transcripts[1], d.script.turns[1].content);
  EXPECT_EQ(rec.human_verdict.status, ReviewStatus::pending);
}

TEST(Verify, UtteranceAboveThresholdNamed) {
  Rendered r;
  auto script = simple_script("s", 4);
  script.turns[2].content = words_string(50);
  const auto d = r.render(script);
  // 3 substitutions in 50 words = 0.06
  QueuedAsr asr(r.asr, {script.turns[0].content, script.turns[1].content, with_substitutions(50, 3)});
  const auto rec = verify_dialogue(d, asr, r.embedder, GateConfig{});
  EXPECT_FALSE(rec.machine_verdict.pass);
  EXPECT_EQ(rec.machine_verdict.reason, "wer_exceeded");
  EXPECT_EQ(rec.machine_verdict.detail, "utterance 2");
  EXPECT_DOUBLE_EQ(rec.per_utterance_wer[2], 0.06);
}

TEST(Verify, ThresholdBoundaryAtFivePercent) {
  Rendered r;
  auto script = simple_script("s", 2);
  script.turns[0].content = words_string(1000);
  const auto d = r.render(script);
  {
    QueuedAsr asr(r.asr, {with_substitutions(1000, 51)});
    const auto rec = verify_dialogue(d, asr, r.embedder, GateConfig{});
    EXPECT_DOUBLE_EQ(rec.per_utterance_wer[0], 0.051);
    EXPECT_FALSE(rec.machine_verdict.pass);
  }
  {
    QueuedAsr asr(r.asr, {with_substitutions(1000, 49)});
    const auto rec = verify_dialogue(d, asr, r.embedder, GateConfig{});
    EXPECT_DOUBLE_EQ(rec.per_utterance_wer[0], 0.049);
    EXPECT_TRUE(rec.machine_verdict.pass);
  }
  {
    QueuedAsr asr(r.asr, {with_substitutions(1000, 50)});
    EXPECT_TRUE(verify_dialogue(d, asr, r.embedder, GateConfig{}).machine_verdict.pass);
  }
}

TEST(Verify, DialogueAverageModeAveragesUtterances) {
  Rendered r;
  auto script = simple_script("s", 2);
  script.turns[0].content = words_string(10);
  script.turns[1].content = words_string(10, 100);
  const auto d = r.render(script);
  GateConfig cfg;
  cfg.wer_mode = WerMode::dialogue_average;
  cfg.wer_threshold = 0.06;
  // 0.1 and 0.0 average to 0.05
  QueuedAsr asr(r.asr, {with_substitutions(10, 1)});
  EXPECT_TRUE(verify_dialogue(d, asr, r.embedder, cfg).machine_verdict.pass);
  cfg.wer_mode = WerMode::per_utterance;
  QueuedAsr asr2(r.asr, {with_substitutions(10, 1)});
  EXPECT_FALSE(verify_dialogue(d, asr2, r.embedder, cfg).machine_verdict.pass);
}

TEST(Verify, LowCosineFailsTimbre) {
  Rendered r;
  auto d = r.render(simple_script("s", 4));
  // 0.5 cosine between speaker 0's two utterances
  const double s3 = std::sqrt(3.0) / 2.0;
  TableEmbedder emb({{0, {{1, 0}, {0.5, s3}}}, {1, {{1, 0}, {1, 0}}}});
  d.utterances[0].samples[0] = 0, d.utterances[0].samples[1] = 0;
  d.utterances[2].samples[0] = 0, d.utterances[2].samples[1] = 1;
  d.utterances[1].samples[0] = 1, d.utterances[1].samples[1] = 0;
  d.utterances[3].samples[0] = 1, d.utterances[3].samples[1] = 1;
  QueuedAsr asr(r.asr, {d.script.turns[0].content, d.script.turns[1].content, d.script.turns[2].content,
                        d.script.turns[3].content});
  const auto rec = verify_dialogue(d, asr, emb, GateConfig{});
  EXPECT_FALSE(rec.machine_verdict.pass);
  EXPECT_EQ(rec.machine_verdict.reason, "timbre_inconsistent");
  EXPECT_EQ(rec.machine_verdict.detail, "speaker 0");
  EXPECT_NEAR(rec.speaker_min_cosine, 0.5, 1e-12);
}

TEST(Verify, DeterministicWithDeterministicClients) {
  Rendered r;
  const auto d = r.render(simple_script("s", 6));
  MockAsrClient noisy(r.registry, 0.3, 8);
  EXPECT_EQ(verify_dialogue(d, noisy, r.embedder, GateConfig{}), verify_dialogue(d, noisy, r.embedder, GateConfig{}));
}

TEST(Retry, CleanMocksUseOneAttempt) {
  Rendered r;
  CountingTts tts(r.tts);
  const auto script = simple_script("s", 4);
  const auto d = synthesize_with_retry(script, tts, r.asr, r.embedder, GateConfig{}, SynthesisPlan{7});
  EXPECT_EQ(d.verification.attempts_used, 1);
  EXPECT_EQ(tts.calls(), 4);
  EXPECT_EQ(d.transcripts.size(), 4u);
}

TEST(Retry, TwoCorruptedAttemptsThenSuccess) {
  Rendered r;
  const auto script = simple_script("s", 4);
  // every ASR call of attempts 1 and 2 (4 turns each) is garbled
  FlakyAsr asr(r.asr, 8);
  const auto d = synthesize_with_retry(script, r.tts, asr, r.embedder, GateConfig{}, SynthesisPlan{7});
  EXPECT_EQ(d.verification.attempts_used, 3);
  EXPECT_TRUE(d.verification.machine_verdict.pass);
}

TEST(Retry, PermanentFailureRejectedAfterExactlyTenAttempts) {
  Rendered r;
  CountingTts tts(r.tts);
  const auto script = simple_script("s", 4);
  FlakyAsr asr(r.asr, 1 << 30);
  try {
    synthesize_with_retry(script, tts, asr, r.embedder, GateConfig{}, SynthesisPlan{7});
    FAIL();
  } catch (const RejectionError& e) {
    EXPECT_EQ(e.record().attempts_used, 10);
    EXPECT_EQ(e.record().max_attempts, 10);
    EXPECT_EQ(e.record().machine_verdict.reason, "wer_exceeded");
    ASSERT_TRUE(e.last_dialogue().has_value());
  }
  EXPECT_EQ(tts.calls(), 10 * 4);
  EXPECT_EQ(asr.calls(), 10 * 4);
}

TEST(Retry, AttemptsUseFreshSeeds) {
  std::set<std::uint64_t> seeds;
  for (int a = 0; a < 10; ++a) seeds.insert(attempt_seed(5, a));
  EXPECT_EQ(seeds.size(), 10u);
}

TEST(Retry, SynthesisErrorsCountAsAttempts) {
  struct Broken final : TtsClient {
    int calls = 0;
    Waveform synthesize(const std::string&, const StyleSpec&, int, std::uint64_t) override {
      ++calls;
      throw SynthesisError("backend down");
    }
  } tts;
  Rendered r;
  GateConfig cfg;
  cfg.max_attempts = 3;
  try {
    synthesize_with_retry(simple_script("s", 2), tts, r.asr, r.embedder, cfg, SynthesisPlan{});
    FAIL();
  } catch (const RejectionError& e) {
    EXPECT_EQ(e.record().machine_verdict.reason, "synthesis_error");
    EXPECT_FALSE(e.last_dialogue().has_value());
  }
  EXPECT_EQ(tts.calls, 3);
}

TEST(GateConfig, Validation) {
  GateConfig c;
  c.max_attempts = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GateConfig{};
  c.wer_threshold = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---- review queue ----

namespace {

std::vector<ManifestEntry> review_fixture() {
  std::vector<ManifestEntry> out;
  for (int i = 0; i < 4; ++i) {
    ManifestEntry e;
    e.script = simple_script("emo-000" + std::to_string(i + 1), 2);
    for (int t = 0; t < 2; ++t) {
      e.utterances.push_back({t, "audio/x/turn_0" + std::to_string(t) + ".wav", 1.0, e.script.turns[t].content,
                              e.script.turns[t].style});
      e.verification.per_utterance_wer.push_back(0.0);
    }
    e.mixed_track_path = "audio/x/mixed.wav";
    e.mixed_duration_s = 2.3;
    e.verification.machine_verdict =
        i == 2 ? MachineVerdict::failed("wer_exceeded", "utterance 0") : MachineVerdict::passed();
    out.push_back(e);
  }
  return out;
}

}  // namespace

TEST(Review, EmptyManifestHasNoPending) { EXPECT_TRUE(list_pending_reviews({}).empty()); }

TEST(Review, OnlyMachinePassedPendingAreListedInOrder) {
  const auto p = list_pending_reviews(review_fixture());
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].id, "emo-0001");
  EXPECT_EQ(p[1].id, "emo-0002");
  EXPECT_EQ(p[2].id, "emo-0004");
  EXPECT_EQ(p[0].turn_count, 2u);
}

TEST(Review, ApproveThenSecondVerdictIsAlreadyDecided) {
  auto entries = review_fixture();
  const auto rec = record_review_verdict(entries, "emo-0001", ReviewStatus::approved, "", "ana");
  EXPECT_EQ(rec.human_verdict.status, ReviewStatus::approved);
  EXPECT_EQ(entries[0].verification.human_verdict.reviewer, "ana");
  EXPECT_EQ(list_pending_reviews(entries).size(), 2u);
  try {
    record_review_verdict(entries, "emo-0001", ReviewStatus::rejected, "changed my mind", "bo");
    FAIL();
  } catch (const StateError& e) {
    EXPECT_EQ(e.code(), "already_decided");
  }
  EXPECT_EQ(entries[0].verification.human_verdict.status, ReviewStatus::approved);
}

TEST(Review, RejectStoresReasonAndReviewer) {
  auto entries = review_fixture();
  record_review_verdict(entries, "emo-0002", ReviewStatus::rejected, "unnatural reply", "bo");
  EXPECT_EQ(entries[1].verification.human_verdict, (HumanVerdict{ReviewStatus::rejected, "unnatural reply", "bo"}));
}

TEST(Review, ErrorCases) {
  auto entries = review_fixture();
  auto code = [&](const std::string& id, ReviewStatus v, const std::string& reason) {
    try {
      record_review_verdict(entries, id, v, reason, "r");
    } catch (const StateError& e) {
      return e.code();
    }
    return std::string("ok");
  };
  EXPECT_EQ(code("nope", ReviewStatus::approved, ""), "not_found");
  EXPECT_EQ(code("emo-0003", ReviewStatus::approved, ""), "not_reviewable");
  EXPECT_THROW(record_review_verdict(entries, "emo-0001", ReviewStatus::rejected, "  ", "r"), ContractError);
  EXPECT_THROW(record_review_verdict(entries, "emo-0001", ReviewStatus::pending, "", "r"), ContractError);
  EXPECT_EQ(entries[0].verification.human_verdict.status, ReviewStatus::pending);
}

TEST(Review, ExportKeepsOnlyPassedAndApproved) {
  auto entries = review_fixture();
  record_review_verdict(entries, "emo-0001", ReviewStatus::approved, "", "r");
  record_review_verdict(entries, "emo-0002", ReviewStatus::rejected, "robotic", "r");
  const auto fin = export_finalized(entries);
  ASSERT_EQ(fin.size(), 1u);
  EXPECT_EQ(fin[0].id(), "emo-0001");
  for (const auto& e : fin) {
    EXPECT_TRUE(e.verification.machine_verdict.pass);
    EXPECT_EQ(e.verification.human_verdict.status, ReviewStatus::approved);
  }
}

TEST(ReviewStore, VerdictIsPersistedAtomically) {
  TempDir dir("store");
  const auto path = dir.path() / "c.manifest.jsonl";
  write_manifest_file(path, review_fixture());
  ReviewStore store(path);
  EXPECT_EQ(store.pending().size(), 3u);
  store.record("emo-0004", ReviewStatus::approved, "", "r");
  EXPECT_EQ(store.pending().size(), 2u);
  const auto reread = read_manifest_file(path);
  EXPECT_EQ(reread[3].verification.human_verdict.status, ReviewStatus::approved);
  EXPECT_EQ(ReviewStore(path).pending().size(), 2u);
  EXPECT_THROW(ReviewStore(dir.path() / "missing.manifest.jsonl"), StartupError);
}

TEST(ReviewStore, ConcurrentDecisionsOnlyOneWins) {
  TempDir dir("store_cas");
  const auto path = dir.path() / "c.manifest.jsonl";
  write_manifest_file(path, review_fixture());
  ReviewStore store(path);
  std::atomic<int> wins{0}, conflicts{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      try {
        store.record("emo-0001", t % 2 ? ReviewStatus::approved : ReviewStatus::rejected, "reason", "r" + std::to_string(t));
        ++wins;
      } catch (const StateError& e) {
        if (e.code() == "already_decided") ++conflicts;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(wins.load(), 1);
  EXPECT_EQ(conflicts.load(), 7);
  EXPECT_EQ(read_manifest_file(path), store.snapshot());
}
