#include "dialoforge/eval_metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <regex>
#include <set>

#include "dialoforge/rng.hpp"
#include "dialoforge/script_forge.hpp"
#include "dialoforge/stemmer.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge::eval {

namespace {

using Words = std::vector<std::string>;

Words words(const std::string& s) { return text::normalize_words(s); }

Words nonempty_words(const std::string& s, const char* what) {
  Words w = words(s);
  if (w.empty()) throw ContractError(std::string(what) + " has no words after normalization");
  return w;
}

void check_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi)) throw ContractError(std::string(name) + " outside [" + std::to_string(lo) + ", " +
                                                 std::to_string(hi) + "]: " + std::to_string(v));
}

struct NgramCounts {
  std::array<double, 4> matched{};
  std::array<double, 4> total{};
  double cand_len = 0.0;
  double ref_len = 0.0;

  void add(const NgramCounts& o) {
    for (std::size_t n = 0; n < 4; ++n) {
      matched[n] += o.matched[n];
      total[n] += o.total[n];
    }
    cand_len += o.cand_len;
    ref_len += o.ref_len;
  }
};

std::map<Words, int> ngrams(const Words& w, std::size_t n) {
  std::map<Words, int> out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) ++out[Words(w.begin() + i, w.begin() + i + n)];
  return out;
}

NgramCounts count_pair(const Words& cand, const Words& ref) {
  NgramCounts c;
  c.cand_len = static_cast<double>(cand.size());
  c.ref_len = static_cast<double>(ref.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cg = ngrams(cand, n);
    const auto rg = ngrams(ref, n);
    for (const auto& [g, k] : cg) {
      auto it = rg.find(g);
      if (it != rg.end()) c.matched[n - 1] += std::min(k, it->second);
    }
    c.total[n - 1] = cand.size() >= n ? static_cast<double>(cand.size() - n + 1) : 0.0;
  }
  return c;
}

double bleu_from_counts(const NgramCounts& c) {
  if (c.matched[0] == 0.0 || c.total[0] == 0.0) return 0.0;
  double log_sum = std::log(c.matched[0] / c.total[0]);
  for (std::size_t n = 1; n < 4; ++n) log_sum += std::log((c.matched[n] + 1.0) / (c.total[n] + 1.0));
  const double bp = c.cand_len > c.ref_len ? 1.0 : std::exp(1.0 - c.ref_len / c.cand_len);
  return bp * std::exp(log_sum / 4.0);
}

}  // namespace

void MetricReport::validate() const {
  check_range(bleu, 0.0, 1.0, "bleu");
  check_range(rouge_l, 0.0, 1.0, "rouge_l");
  check_range(meteor, 0.0, 1.0, "meteor");
  check_range(embed_score, 0.0, 1.0, "embed_score");
  check_range(f1_emotion, 0.0, 1.0, "f1_emotion");
  if (gpt_eval) check_range(*gpt_eval, 1.0, 5.0, "gpt_eval");
}

std::vector<std::vector<double>> MockTokenEmbedder::embed_tokens(const std::vector<std::string>& tokens) {
  if (dim_ < 1) throw MetricError("embedding dimension must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    CounterRng rng(derive_seed(seed_, {hash_string(t)}));
    std::vector<double> v(static_cast<std::size_t>(dim_));
    double norm = 0.0;
    for (auto& x : v) {
      x = rng.gaussian();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references, BleuLevel level) {
  if (candidates.empty()) throw ContractError("BLEU needs a nonempty corpus");
  if (candidates.size() != references.size()) throw ContractError("candidate and reference counts differ");
  if (level == BleuLevel::sentence) {
    double total = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      total += bleu_from_counts(count_pair(words(candidates[i]), words(references[i])));
    }
    return total / static_cast<double>(candidates.size());
  }
  NgramCounts all;
  for (std::size_t i = 0; i < candidates.size(); ++i) all.add(count_pair(words(candidates[i]), words(references[i])));
  return bleu_from_counts(all);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const std::string& candidate, const std::string& reference, double beta) {
  if (!(beta > 0.0)) throw ContractError("ROUGE-L beta must be positive");
  const Words c = nonempty_words(candidate, "candidate");
  const Words r = nonempty_words(reference, "reference");
  const auto lcs = static_cast<double>(lcs_length(c, r));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(c.size());
  const double rec = lcs / static_cast<double>(r.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * rec / (rec + b2 * p);
}

MeteorStats meteor_stats(const std::string& candidate, const std::string& reference) {
  const Words c = nonempty_words(candidate, "candidate");
  const Words r = nonempty_words(reference, "reference");
  std::vector<long> align(c.size(), -1);
  std::vector<char> used(r.size(), 0);
  auto stage = [&](auto&& key) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (align[i] >= 0) continue;
      const std::string ki = key(c[i]);
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (!used[j] && key(r[j]) == ki) {
          align[i] = static_cast<long>(j);
          used[j] = 1;
          break;
        }
      }
    }
  };
  stage([](const std::string& w) { return w; });
  stage([](const std::string& w) { return text::porter_stem(w); });

  MeteorStats s;
  long prev_ref = -2;
  bool prev_matched = false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (align[i] < 0) {
      prev_matched = false;
      continue;
    }
    ++s.matches;
    if (!prev_matched || align[i] != prev_ref + 1) ++s.chunks;
    prev_ref = align[i];
    prev_matched = true;
  }
  if (s.matches == 0) return s;
  const auto m = static_cast<double>(s.matches);
  s.precision = m / static_cast<double>(c.size());
  s.recall = m / static_cast<double>(r.size());
  s.fmean = 10.0 * s.precision * s.recall / (s.recall + 9.0 * s.precision);
  s.penalty = 0.5 * std::pow(static_cast<double>(s.chunks) / m, 3.0);
  s.score = s.fmean * (1.0 - s.penalty);
  return s;
}

double meteor(const std::string& candidate, const std::string& reference) {
  return meteor_stats(candidate, reference).score;
}

double embed_score(const std::string& candidate, const std::string& reference, TokenEmbedClient& client) {
  const Words c = nonempty_words(candidate, "candidate");
  const Words r = nonempty_words(reference, "reference");
  std::vector<std::vector<double>> ec, er;
  try {
    ec = client.embed_tokens(c);
    er = client.embed_tokens(r);
  } catch (const MetricError&) {
    throw;
  } catch (const std::exception& e) {
    throw MetricError(std::string("token embedding failed: ") + e.what());
  }
  if (ec.size() != c.size() || er.size() != r.size()) throw MetricError("embedder returned the wrong vector count");
  const std::size_t dim = ec.front().size();
  for (const auto* set : {&ec, &er}) {
    for (const auto& v : *set) {
      if (v.size() != dim || dim == 0) throw MetricError("embedder returned inconsistent dimensions");
      double n2 = 0.0;
      for (double x : v) n2 += x * x;
      if (!std::isfinite(n2) || std::abs(std::sqrt(n2) - 1.0) > 1e-6) throw MetricError("embedding is not unit norm");
    }
  }
  auto cos = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < dim; ++k) d += a[k] * b[k];
    return d;
  };
  auto greedy = [&](const auto& from, const auto& to) {
    double total = 0.0;
    for (const auto& a : from) {
      double best = -1.0;
      for (const auto& b : to) best = std::max(best, cos(a, b));
      total += best;
    }
    return std::clamp(total / static_cast<double>(from.size()), 0.0, 1.0);
  };
  const double p = greedy(ec, er);
  const double rec = greedy(er, ec);
  if (p + rec == 0.0) return 0.0;
  return std::clamp(2.0 * p * rec / (p + rec), 0.0, 1.0);
}

double weighted_f1(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  if (predicted.size() != gold.size()) throw ContractError("predicted and gold label counts differ");
  if (gold.empty()) throw ContractError("weighted F1 needs at least one label");
  std::map<std::string, double> tp, fp, fn, support;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    support[gold[i]] += 1.0;
    if (predicted[i] == gold[i]) {
      tp[gold[i]] += 1.0;
    } else {
      fp[predicted[i]] += 1.0;
      fn[gold[i]] += 1.0;
    }
  }
  double total = 0.0;
  for (const auto& [label, s] : support) {
    const double t = tp[label];
    const double denom = 2.0 * t + fp[label] + fn[label];
    total += s * (denom > 0.0 ? 2.0 * t / denom : 0.0);
  }
  return total / static_cast<double>(gold.size());
}

std::string render_eval_prompt(const std::vector<std::string>& context, const std::string& response) {
  std::string p;
  p += "You are judging a spoken dialogue system. Read the conversation so far and the system's reply.\n\n";
  p += "Conversation:\n";
  for (const auto& line : context) p += line + "\n";
  p += "\nReply:\n" + response + "\n\n";
  p += std::string(kEvalMarker) +
       " from 1 (poor) to 5 (excellent) for relevance, coherence and emotional fit. "
       "Answer with a short justification followed by \"Score: k\".\n";
  return p;
}

double parse_eval_score(const std::string& reply) {
  static const std::regex tagged(R"([Ss][Cc][Oo][Rr][Ee]\s*[:=]\s*(\d+))");
  static const std::regex bare(R"(\d+)");
  std::smatch m;
  std::string digits;
  if (std::regex_search(reply, m, tagged)) {
    digits = m[1].str();
  } else if (std::regex_search(reply, m, bare)) {
    digits = m[0].str();
  } else {
    throw EvalError("judge reply carries no score", reply);
  }
  if (digits.size() > 2) throw EvalError("judge score out of range [1, 5]", reply);
  const int v = std::stoi(digits);
  if (v < 1 || v > 5) throw EvalError("judge score out of range [1, 5]", reply);
  return static_cast<double>(v);
}

double gpt_eval(const std::vector<std::string>& context, const std::string& response, ChatClient& client,
                std::uint64_t seed) {
  if (text::trim(response).empty()) throw ContractError("response to judge is empty");
  return parse_eval_score(client.complete(render_eval_prompt(context, response), seed));
}

}  // namespace dialoforge::eval
