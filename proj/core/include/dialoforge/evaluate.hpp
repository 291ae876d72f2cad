#pragma once

// Scores predicted final responses against a manifest's reference responses.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialoforge/eval_metrics.hpp"
#include "dialoforge/schema.hpp"

namespace dialoforge::eval {

/// One line of a predictions file: {"id": ..., "text": ..., "emotion": ...}.
struct Prediction {
  std::string id;
  std::string text;
  std::string emotion;
};

/// Throws ParseError with the 1-based line on malformed lines; blank lines are skipped.
std::vector<Prediction> parse_predictions(std::string_view jsonl);

struct DialogueScore {
  std::string id;
  double bleu = 0.0;  // sentence level
  double rouge_l = 0.0;
  double meteor = 0.0;
  double embed_score = 0.0;
  std::string gold_emotion;
  std::string predicted_emotion;
  std::optional<double> gpt_eval;
};

struct EvaluationReport {
  MetricReport corpus;
  std::vector<DialogueScore> per_dialogue;
  std::vector<std::string> missing_predictions;    // manifest ids without a prediction
  std::vector<std::string> unmatched_predictions;  // prediction ids not in the manifest
  BleuLevel bleu_level = BleuLevel::corpus;
  double rouge_beta = 1.0;
};

struct EvaluateOptions {
  BleuLevel bleu_level = BleuLevel::corpus;
  double rouge_beta = 1.0;
  ChatClient* judge = nullptr;  // GPT-eval is skipped when null
  std::uint64_t seed = 0;
};

/// The reference is the last assistant turn; earlier turns are the judge's context.
/// Empty prediction texts score 0 on every text metric.
EvaluationReport evaluate_corpus(const std::vector<ManifestEntry>& entries, const std::vector<Prediction>& predictions,
                                 TokenEmbedClient& embedder, const EvaluateOptions& options = {});

std::string report_to_json(const EvaluationReport& report);

}  // namespace dialoforge::eval
