#include <gtest/gtest.h>

#include <json.hpp>
#include <random>

#include "dialoforge/errors.hpp"
#include "dialoforge/eval_metrics.hpp"
#include "dialoforge/evaluate.hpp"
#include "dialoforge/stemmer.hpp"
#include "dialoforge/text.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dialoforge;
using namespace dialoforge::eval;

namespace {

std::string random_sentence(std::mt19937_64& gen) {
  static const char* kVocab[] = {"the", "cat", "sat", "on", "mat", "dog"};
  const int n = 1 + static_cast<int>(gen() % 8);
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string(kVocab[gen() % 6]);
  return s;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

/// Embeds each token as a fixed basis vector, so distinct tokens are orthogonal.
class OneHotEmbedder final : public TokenEmbedClient {
 public:
  std::vector<std::vector<double>> embed_tokens(const std::vector<std::string>& tokens) override {
    std::vector<std::vector<double>> out;
    for (const auto& t : tokens) {
      auto [it, inserted] = ids_.emplace(t, ids_.size());
      std::vector<double> v(64, 0.0);
      v.at(it->second) = 1.0;
      out.push_back(v);
    }
    return out;
  }

 private:
  std::map<std::string, std::size_t> ids_;
};

}  // namespace

TEST(Bleu, IdenticalIsOne) {
  EXPECT_NEAR(bleu({"the cat sat on the mat", "hello there"}, {"the cat sat on the mat", "hello there"}), 1.0, 1e-12);
}

TEST(Bleu, NoSharedUnigramIsZero) { EXPECT_EQ(bleu({"alpha beta gamma"}, {"one two three"}), 0.0); }

TEST(Bleu, HandCountedSixWordPair) {
  // p1 = 5/6; smoothed p2 = 4/6, p3 = 2/5, p4 = 1/4; equal lengths so no brevity penalty.
  const double expected = std::pow(5.0 / 6 * 4.0 / 6 * 2.0 / 5 * 1.0 / 4, 0.25);
  EXPECT_NEAR(bleu({"the cat sat on the mat"}, {"the cat is on the mat"}), expected, 1e-9);
}

TEST(Bleu, MatchesOracleOnRandomPairs) {
  std::mt19937_64 gen(17);
  std::vector<std::string> cands, refs;
  oracle::BleuCounts pooled;
  for (int i = 0; i < 200; ++i) {
    const auto c = random_sentence(gen), r = random_sentence(gen);
    const auto cw = text::normalize_words(c), rw = text::normalize_words(r);
    EXPECT_NEAR(bleu({c}, {r}), oracle::bleu(cw, rw), 1e-9) << c << " | " << r;
    EXPECT_NEAR(bleu({c}, {r}, BleuLevel::sentence), oracle::bleu(cw, rw), 1e-9);
    const auto k = oracle::bleu_counts(cw, rw);
    for (int n = 0; n < 4; ++n) {
      pooled.matched[n] += k.matched[n];
      pooled.total[n] += k.total[n];
    }
    pooled.cand_len += k.cand_len;
    pooled.ref_len += k.ref_len;
    cands.push_back(c);
    refs.push_back(r);
  }
  EXPECT_NEAR(bleu(cands, refs), oracle::bleu_from(pooled), 1e-9);
}

TEST(Bleu, BrevityPenaltyApplies) {
  const double short_c = bleu({"the cat"}, {"the cat sat on the mat"});
  EXPECT_NEAR(short_c, std::exp(1.0 - 3.0) * std::pow(1.0 * 2.0 / 2.0 * 1.0 * 1.0, 0.25), 1e-12);
}

TEST(RougeL, IdenticalAndDisjoint) {
  EXPECT_DOUBLE_EQ(rouge_l("a b c d", "a b c d"), 1.0);
  EXPECT_DOUBLE_EQ(rouge_l("a b c", "x y z"), 0.0);
}

TEST(RougeL, CatSatExample) {
  EXPECT_EQ(lcs_length({"the", "cat", "sat"}, {"the", "cat"}), 2u);
  EXPECT_NEAR(rouge_l("the cat sat", "the cat"), 0.8, 1e-12);
}

TEST(RougeL, MatchesSubsetEnumerationOracle) {
  std::mt19937_64 gen(18);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_sentence(gen), r = random_sentence(gen);
    const auto cw = text::normalize_words(c), rw = text::normalize_words(r);
    EXPECT_EQ(lcs_length(cw, rw), oracle::lcs_bruteforce(cw, rw));
    EXPECT_NEAR(rouge_l(c, r), oracle::rouge_l(cw, rw), 1e-9);
    EXPECT_NEAR(rouge_l(c, r, 1.2), oracle::rouge_l(cw, rw, 1.2), 1e-9);
  }
}

TEST(Meteor, NoMatchesIsZero) { EXPECT_EQ(meteor("alpha beta", "gamma delta"), 0.0); }

TEST(Meteor, IdenticalFourWords) {
  const auto s = meteor_stats("one two three four", "one two three four");
  EXPECT_EQ(s.matches, 4u);
  EXPECT_EQ(s.chunks, 1u);
  EXPECT_EQ(s.score, 0.9921875);
}

TEST(Meteor, IdenticalSentencesHitPenaltyFloorExactly) {
  for (int n = 1; n <= 12; ++n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
    const double expected = 1.0 - 0.5 * std::pow(1.0 / n, 3.0);
    EXPECT_EQ(meteor(s, s), expected) << n;
  }
}

TEST(Meteor, StemMatchCounts) {
  EXPECT_EQ(text::porter_stem("running"), "run");
  const auto s = meteor_stats("running fast", "run fast");
  EXPECT_EQ(s.matches, 2u);
  EXPECT_EQ(s.chunks, 1u);
  EXPECT_EQ(s.score, 1.0 - 0.5 * std::pow(0.5, 3.0));
}

TEST(Meteor, FragmentationRaisesPenalty) {
  const auto s = meteor_stats("c b a", "a b c");
  EXPECT_EQ(s.matches, 3u);
  EXPECT_EQ(s.chunks, 3u);
  EXPECT_NEAR(s.score, 1.0 - 0.5, 1e-12);
}

TEST(Stemmer, ClassicExamples) {
  const std::pair<const char*, const char*> cases[] = {
      {"caresses", "caress"}, {"ponies", "poni"},      {"cats", "cat"},        {"agreed", "agre"},
      {"plastered", "plaster"}, {"motoring", "motor"}, {"hopping", "hop"},     {"happy", "happi"},
      {"relational", "relat"}, {"generalizations", "gener"}, {"adjustable", "adjust"}, {"controll", "control"},
      {"is", "is"}};
  for (const auto& [in, out] : cases) EXPECT_EQ(text::porter_stem(in), out) << in;
}

TEST(EmbedScore, SelfMatchIsOne) {
  MockTokenEmbedder e;
  EXPECT_NEAR(embed_score("the quick brown fox", "the quick brown fox", e), 1.0, 1e-12);
  OneHotEmbedder o;
  EXPECT_NEAR(embed_score("a b", "a b", o), 1.0, 1e-12);
}

TEST(EmbedScore, OrthogonalEmbeddingsGiveZero) {
  OneHotEmbedder o;
  EXPECT_EQ(embed_score("a b c", "x y z", o), 0.0);
}

TEST(EmbedScore, MatchesExhaustivePairOracle) {
  MockTokenEmbedder e(16, 3);
  const std::vector<std::string> cand{"bright", "morning", "sun"}, ref{"sunny", "morning", "sky"};
  const auto ce = e.embed_tokens(cand), re = e.embed_tokens(ref);
  double p = 0, r = 0;
  for (const auto& c : ce) {
    double best = -1;
    for (const auto& x : re) best = std::max(best, cosine(c, x));
    p += best;
  }
  for (const auto& x : re) {
    double best = -1;
    for (const auto& c : ce) best = std::max(best, cosine(c, x));
    r += best;
  }
  p = std::clamp(p / 3, 0.0, 1.0);
  r = std::clamp(r / 3, 0.0, 1.0);
  const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  EXPECT_NEAR(embed_score("bright morning sun", "sunny morning sky", e), f, 1e-12);
}

TEST(WeightedF1, PerfectIsOne) { EXPECT_EQ(weighted_f1({"a", "b", "b"}, {"a", "b", "b"}), 1.0); }

TEST(WeightedF1, SingleClassAllWrongIsZero) { EXPECT_EQ(weighted_f1({"b", "c", "b"}, {"a", "a", "a"}), 0.0); }

TEST(WeightedF1, ThreeClassFixture) {
  // supports a:3 b:2 c:1, one a predicted as b: F1 a = 0.8, b = 0.8, c = 1.
  EXPECT_NEAR(weighted_f1({"a", "a", "b", "b", "b", "c"}, {"a", "a", "a", "b", "b", "c"}), 5.0 / 6.0, 1e-15);
}

TEST(WeightedF1, MatchesConfusionMatrixOracle) {
  std::mt19937_64 gen(19);
  const char* labels[] = {"neutral", "happy", "sad", "angry"};
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + gen() % 30;
    std::vector<std::string> p(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = labels[gen() % 4];
      g[k] = labels[gen() % 4];
    }
    EXPECT_NEAR(weighted_f1(p, g), oracle::weighted_f1(p, g), 1e-12);
  }
}

TEST(Normalization, CaseAndWhitespaceInvariant) {
  MockTokenEmbedder e;
  const std::string a = "  The Cat, sat ON the mat! ", b = "the cat sat on the mat";
  EXPECT_DOUBLE_EQ(bleu({a}, {"the dog sat"}), bleu({b}, {"the dog sat"}));
  EXPECT_DOUBLE_EQ(rouge_l(a, "the dog sat"), rouge_l(b, "the dog sat"));
  EXPECT_DOUBLE_EQ(meteor(a, "the dog sat"), meteor(b, "the dog sat"));
  EXPECT_DOUBLE_EQ(embed_score(a, "the dog sat", e), embed_score(b, "the dog sat", e));
}

TEST(Normalization, EmptyInputsRejected) {
  EXPECT_THROW(rouge_l("", "a"), ContractError);
  EXPECT_THROW(meteor("a", " , "), ContractError);
  EXPECT_THROW(bleu({"a"}, {"a", "b"}), ContractError);
}

TEST(GptEval, BareDigit) {
  testing_support::ScriptedChat chat({"4"});
  EXPECT_EQ(gpt_eval({"hi"}, "hello", chat, 0), 4.0);
}

TEST(GptEval, ScorePatternWins) {
  testing_support::ScriptedChat chat({"Quality is good. Score: 3"});
  EXPECT_EQ(gpt_eval({"hi"}, "hello", chat, 0), 3.0);
  EXPECT_EQ(parse_eval_score("2 of the turns were fine. Score: 5"), 5.0);
}

TEST(GptEval, NoNumberIsEvalError) {
  testing_support::ScriptedChat chat({"excellent"});
  try {
    gpt_eval({"hi"}, "hello", chat, 0);
    FAIL();
  } catch (const EvalError& e) {
    EXPECT_EQ(e.raw_reply(), "excellent");
  }
  EXPECT_THROW(parse_eval_score("Score: 9"), EvalError);
  EXPECT_THROW(parse_eval_score("0"), EvalError);
}

TEST(GptEval, PromptCarriesContextAndResponse) {
  const auto p = render_eval_prompt({"I lost my keys."}, "That sounds stressful.");
  EXPECT_NE(p.find("I lost my keys."), std::string::npos);
  EXPECT_NE(p.find("That sounds stressful."), std::string::npos);
  EXPECT_NE(p.find(kEvalMarker), std::string::npos);
}

TEST(MetricReport, RangesValidated) {
  MetricReport r;
  EXPECT_NO_THROW(r.validate());
  r.bleu = 1.5;
  EXPECT_THROW(r.validate(), ContractError);
  r.bleu = 0.5;
  r.gpt_eval = 0.5;
  EXPECT_THROW(r.validate(), ContractError);
}

// ---- corpus evaluation ----

namespace {

ManifestEntry entry(const std::string& id, const std::string& last_reply, const std::string& emotion) {
  ManifestEntry e;
  e.script = testing_support::simple_script(id, 4);
  e.script.turns[3].content = last_reply;
  e.script.turns[3].style.emotion = emotion;
  return e;
}

}  // namespace

TEST(Evaluate, ScoresLastAssistantTurn) {
  const std::vector<ManifestEntry> entries{entry("a", "that sounds lovely", "happy"),
                                           entry("b", "i am sorry to hear that", "sad")};
  const auto preds = parse_predictions(
      "{\"id\":\"a\",\"text\":\"that sounds lovely\",\"emotion\":\"happy\"}\n"
      "\n"
      "{\"id\":\"zzz\",\"text\":\"orphan\",\"emotion\":\"sad\"}\n");
  MockTokenEmbedder emb;
  MockChatClient judge;
  EvaluateOptions opts;
  opts.judge = &judge;
  const auto rep = evaluate_corpus(entries, preds, emb, opts);
  // dialogues without a prediction are listed, not scored
  ASSERT_EQ(rep.per_dialogue.size(), 1u);
  EXPECT_NEAR(rep.per_dialogue[0].bleu, 1.0, 1e-12);
  EXPECT_EQ(rep.missing_predictions, std::vector<std::string>{"b"});
  EXPECT_EQ(rep.unmatched_predictions, std::vector<std::string>{"zzz"});
  EXPECT_TRUE(rep.corpus.gpt_eval.has_value());
  EXPECT_NO_THROW(rep.corpus.validate());

  const auto j = nlohmann::json::parse(report_to_json(rep));
  for (const char* k : {"dialogues", "corpus", "config", "per_dialogue", "missing_predictions", "unmatched_predictions"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["config"]["bleu_level"], "corpus");
  EXPECT_EQ(j["per_dialogue"][0]["id"], "a");
}

TEST(Evaluate, MalformedPredictionNamesLine) {
  try {
    parse_predictions("{\"id\":\"a\",\"text\":\"x\",\"emotion\":\"happy\"}\n{\"id\": 3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}
