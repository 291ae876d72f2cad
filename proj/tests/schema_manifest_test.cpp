#include <gtest/gtest.h>

#include <random>

#include "dialoforge/errors.hpp"
#include "dialoforge/manifest.hpp"
#include "dialoforge/pipeline.hpp"
#include "dialoforge/schema.hpp"
#include "test_support.hpp"

using namespace dialoforge;

namespace {

ManifestEntry minimal_entry() {
  ManifestEntry e;
  e.script.id = "emo-0001";
  e.script.subset = Subset::emotion;
  e.script.seed.topic = "Artistic hobbies";
  TurnScript h;
  h.role = Role::human;
  h.style = {Gender::female, Pitch::normal, Speed::normal, "happy"};
  h.content = "I started painting again.";
  TurnScript a;
  a.role = Role::assistant;
  a.style = {Gender::male, Pitch::low, Speed::slow, "neutral"};
  a.content = "That sounds wonderful.";
  e.script.turns = {h, a};
  e.utterances = {{0, "audio/emo-0001/turn_00.wav", 1.5, h.content, h.style},
                  {1, "audio/emo-0001/turn_01.wav", 1.25, a.content, a.style}};
  e.mixed_track_path = "audio/emo-0001/mixed.wav";
  e.mixed_duration_s = 3.0;
  e.verification.per_utterance_wer = {0.0, 0.0};
  e.verification.machine_verdict = MachineVerdict::passed();
  return e;
}

ManifestEntry random_entry(std::mt19937_64& gen, int index) {
  static const char* kEmo[] = {"neutral", "happy", "sad", "angry", "surprised", "fearful", "disgusted"};
  static const char* kWords[] = {"why", "the", "rain", "feels", "heavy", "today", "hmm", "sure", "ok", "\"quoted\"",
                                 "naïve", "tab\there"};
  std::uniform_int_distribution<int> pick(0, 1000);
  ManifestEntry e;
  const Subset subset = static_cast<Subset>(pick(gen) % 3);
  e.script.subset = subset;
  char id[16];
  std::snprintf(id, sizeof id, "x-%04d", index);
  e.script.id = id;
  if (subset == Subset::emotion) e.script.seed.topic = "topic " + std::to_string(pick(gen));
  if (subset == Subset::audio) {
    e.script.seed.caption = "a door slamming";
    e.script.seed.event_class = pick(gen) % 2 ? EventClass::temporary : EventClass::continuous;
    e.script.seed.source_id = "yt" + std::to_string(pick(gen));
  }
  if (subset == Subset::music) {
    e.script.seed.aspect_list = std::vector<std::string>{"calm piano", "lo-fi"};
    e.script.seed.source_id = "mc" + std::to_string(pick(gen));
  }
  const int n = 1 + pick(gen) % 4;
  const int turns = 2 * n + 2;
  for (int t = 0; t < turns; ++t) {
    TurnScript ts;
    ts.role = t % 2 ? Role::assistant : Role::human;
    ts.style = {pick(gen) % 2 ? Gender::male : Gender::female, static_cast<Pitch>(pick(gen) % 3),
                static_cast<Speed>(pick(gen) % 3), kEmo[pick(gen) % 7]};
    const int words = 1 + pick(gen) % 6;
    for (int w = 0; w < words; ++w) ts.content += (w ? " " : "") + std::string(kWords[pick(gen) % 12]);
    e.script.turns.push_back(ts);
    char path[64];
    std::snprintf(path, sizeof path, "audio/%s/turn_%02d.wav", id, t);
    e.utterances.push_back({t, path, 0.25 * (1 + pick(gen) % 20), ts.content, ts.style});
    e.verification.per_utterance_wer.push_back((pick(gen) % 7) / 100.0);
  }
  e.mixed_track_path = std::string("audio/") + id + "/mixed.wav";
  e.mixed_duration_s = 0.5 * (1 + pick(gen) % 40);
  e.verification.attempts_used = 1 + pick(gen) % 10;
  e.verification.speaker_min_cosine = (pick(gen) % 1000) / 1000.0;
  e.verification.machine_verdict =
      pick(gen) % 3 ? MachineVerdict::passed() : MachineVerdict::failed("wer_exceeded", "utterance 1");
  if (e.verification.machine_verdict.pass && pick(gen) % 2)
    e.verification.human_verdict = {ReviewStatus::rejected, "unnatural reply", "rev"};
  if (subset != Subset::emotion) {
    MixPlan p;
    p.method = subset == Subset::music ? MixMethod::music_intro_segment : MixMethod::splice_prefix;
    p.target_snr_db = 5.0 + (pick(gen) % 150) / 10.0;
    p.peak_rescale = pick(gen) % 2 ? 1.0 : 0.87;
    e.scene = p;
  }
  return e;
}

}  // namespace

TEST(Manifest, EmptyListSerializesToEmptyStream) {
  EXPECT_EQ(serialize_manifest({}), "");
  EXPECT_TRUE(parse_manifest("").empty());
}

TEST(Manifest, MinimalEntryMatchesGoldenLine) {
  const std::string golden = read_text_file(std::filesystem::path(DIALOFORGE_TEST_DATA) / "minimal_entry.manifest.jsonl");
  EXPECT_EQ(serialize_manifest({minimal_entry()}), golden);
  const auto parsed = parse_manifest(golden);
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0], minimal_entry());
}

TEST(Manifest, SevenTurnEntryRoundTrips) {
  // Seven turns break the 2n+2 shape, so this exercises the codec only
  // (serialize_entry skips validation).
  auto e = minimal_entry();
  e.script.turns.clear();
  e.utterances.clear();
  e.verification.per_utterance_wer.clear();
  for (int t = 0; t < 7; ++t) {
    TurnScript ts;
    ts.role = t % 2 ? Role::assistant : Role::human;
    ts.content = "turn number " + std::to_string(t);
    e.script.turns.push_back(ts);
    e.utterances.push_back({t, "audio/emo-0001/turn_0" + std::to_string(t) + ".wav", 1.0, ts.content, ts.style});
    e.verification.per_utterance_wer.push_back(0.0);
  }
  const std::string line = serialize_entry(e);
  EXPECT_TRUE(validate_script(e.script).empty());
  const auto back = parse_manifest(line);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], e);
}

TEST(Manifest, RandomValidManifestsRoundTrip) {
  std::mt19937_64 gen(42);
  for (int round = 0; round < 30; ++round) {
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < 1 + round % 5; ++i) entries.push_back(random_entry(gen, round * 10 + i));
    const std::string text = serialize_manifest(entries);
    EXPECT_EQ(parse_manifest(text), entries);
    EXPECT_EQ(serialize_manifest(parse_manifest(text)), text);
  }
}

TEST(Manifest, ConsecutiveHumanTurnsFailValidation) {
  auto e = minimal_entry();
  e.script.turns[1].role = Role::human;
  const std::string line = serialize_entry(e);
  try {
    parse_manifest(line);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& err) {
    EXPECT_EQ(err.entry_id(), "emo-0001");
    EXPECT_NE(std::string(err.what()).find("non-alternating"), std::string::npos);
  }
}

TEST(Manifest, TruncatedFinalLineReportsItsLineNumber) {
  auto a = minimal_entry();
  auto b = minimal_entry();
  b.script.id = "emo-0002";
  std::string text = serialize_manifest({a, b});
  text.resize(text.size() - 20);
  try {
    parse_manifest(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& err) {
    EXPECT_EQ(err.line(), 2u);
  }
}

TEST(Manifest, BlankLinesAreSkipped) {
  const std::string line = serialize_entry(minimal_entry());
  EXPECT_EQ(parse_manifest("\n" + line + "\n\n").size(), 1u);
}

TEST(Manifest, FileWriteIsReadBack) {
  testing_support::TempDir dir("manifest");
  const auto path = dir.path() / "x.manifest.jsonl";
  write_manifest_file(path, {minimal_entry()});
  EXPECT_EQ(read_manifest_file(path), std::vector<ManifestEntry>{minimal_entry()});
}

TEST(ValidateScript, AlternatingWithKnownEmotionsPasses) {
  EXPECT_TRUE(validate_script(testing_support::simple_script("s", 8)).empty());
}

TEST(ValidateScript, ConsecutiveHumanTurnsNamed) {
  auto s = testing_support::simple_script("s", 4);
  s.turns[2].role = Role::assistant;
  const auto v = validate_script(s);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].message, "non-alternating at index 2");
}

TEST(ValidateScript, UnknownEmotionReported) {
  auto s = testing_support::simple_script("s", 2);
  s.turns[0].style.emotion = "ecstatic";
  const auto v = validate_script(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].message.find("unknown emotion"), std::string::npos);
}

TEST(ValidateScript, TotalOnDegenerateInput) {
  DialogueScript s;
  EXPECT_NO_THROW({
    const auto v = validate_script(s);
    EXPECT_FALSE(v.empty());
  });
  s.turns.resize(3);
  s.turns[1].role = Role::human;
  s.turns[2].style.emotion = "";
  EXPECT_NO_THROW(validate_script(s));
}

TEST(EmotionVocabulary, CustomLabelsAreEnforced) {
  EmotionVocabulary v({"calm", "tense"});
  auto s = testing_support::simple_script("s", 2);
  s.turns[0].style.emotion = "calm";
  s.turns[1].style.emotion = "tense";
  EXPECT_TRUE(validate_script(s, v).empty());
  EXPECT_FALSE(validate_script(s).empty());
  EXPECT_THROW(EmotionVocabulary({"Calm"}), ConfigError);
  EXPECT_THROW(EmotionVocabulary({"a", "a"}), ConfigError);
  EXPECT_THROW(EmotionVocabulary(std::vector<std::string>{}), ConfigError);
}

TEST(CorpusStats, EmptyManifestIsAllZero) {
  const auto s = corpus_stats({});
  EXPECT_EQ(s.dialogues, 0u);
  EXPECT_EQ(s.turns, 0u);
  EXPECT_EQ(s.avg_turns, 0.0);
  EXPECT_EQ(s.total_hours, 0.0);
}

TEST(CorpusStats, SixAndEightTurnsAverageSeven) {
  std::mt19937_64 gen(1);
  auto a = random_entry(gen, 1);
  auto b = random_entry(gen, 2);
  a.script = testing_support::simple_script("a", 6);
  b.script = testing_support::simple_script("b", 8);
  const auto s = corpus_stats({a, b});
  EXPECT_EQ(s.dialogues, 2u);
  EXPECT_EQ(s.turns, 14u);
  EXPECT_DOUBLE_EQ(s.avg_turns, 7.0);
  EXPECT_DOUBLE_EQ(s.total_duration_s, a.mixed_duration_s + b.mixed_duration_s);
  EXPECT_DOUBLE_EQ(s.total_hours, s.total_duration_s / 3600.0);
}
