#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dialoforge/errors.hpp"

namespace dialoforge {
class ChatClient;
}

namespace dialoforge::eval {

/// A judge reply that carries no usable 1..5 score.
class EvalError : public Error {
 public:
  EvalError(const std::string& message, std::string raw_reply)
      : Error(message), raw_reply_(std::move(raw_reply)) {}
  const std::string& raw_reply() const { return raw_reply_; }

 private:
  std::string raw_reply_;
};

/// The token embedder failed or returned malformed vectors.
class MetricError : public Error {
 public:
  using Error::Error;
};

struct MetricReport {
  double bleu = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double embed_score = 0.0;
  double f1_emotion = 0.0;
  std::optional<double> gpt_eval;

  /// Throws ContractError when a value is outside its range.
  void validate() const;
};

class TokenEmbedClient {
 public:
  virtual ~TokenEmbedClient() = default;
  /// One unit-norm vector per token.
  virtual std::vector<std::vector<double>> embed_tokens(const std::vector<std::string>& tokens) = 0;
};

/// Gaussian vectors seeded by the token's hash, normalized to unit length.
class MockTokenEmbedder : public TokenEmbedClient {
 public:
  explicit MockTokenEmbedder(int dim = 32, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
  std::vector<std::vector<double>> embed_tokens(const std::vector<std::string>& tokens) override;

 private:
  int dim_;
  std::uint64_t seed_;
};

enum class BleuLevel { corpus, sentence };

/// BLEU-4 over normalized words: clipped n-gram precisions, add-1 smoothing
/// on orders >= 2, brevity penalty. Corpus level pools counts over all pairs;
/// sentence level averages per-pair scores.
double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
            BleuLevel level = BleuLevel::corpus);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// LCS-based F-measure; beta weights recall.
double rouge_l(const std::string& candidate, const std::string& reference, double beta = 1.0);

struct MeteorStats {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

/// Exact matches first, then Porter-stem matches among the leftovers.
/// Fmean = 10PR / (R + 9P), penalty = 0.5 (chunks / matches)^3.
MeteorStats meteor_stats(const std::string& candidate, const std::string& reference);
double meteor(const std::string& candidate, const std::string& reference);

/// Greedy max-cosine matching in both directions; precision and recall are
/// clamped to [0, 1] before the harmonic mean.
double embed_score(const std::string& candidate, const std::string& reference, TokenEmbedClient& client);

/// Per-class F1 weighted by gold support.
double weighted_f1(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

/// Contains kEvalMarker so mock judges can recognise it.
std::string render_eval_prompt(const std::vector<std::string>& context, const std::string& response);

/// "Score: k" wins over any other number; otherwise the first integer. Must be in [1, 5].
double parse_eval_score(const std::string& reply);

double gpt_eval(const std::vector<std::string>& context, const std::string& response, ChatClient& client,
                std::uint64_t seed);

}  // namespace dialoforge::eval
