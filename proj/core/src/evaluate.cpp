#include "dialoforge/evaluate.hpp"

#include <map>
#include <set>

#include <json.hpp>

#include "dialoforge/errors.hpp"
#include "dialoforge/rng.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge::eval {

using json = nlohmann::ordered_json;

std::vector<Prediction> parse_predictions(std::string_view jsonl) {
  std::vector<Prediction> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    const std::size_t nl = jsonl.find('\n', pos);
    const std::string_view line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? jsonl.size() + 1 : nl + 1;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") || !j["text"].is_string()) {
      throw ParseError(line_no, "prediction needs string fields 'id' and 'text'");
    }
    Prediction p{j["id"].get<std::string>(), j["text"].get<std::string>(), {}};
    if (j.contains("emotion")) {
      if (!j["emotion"].is_string()) throw ParseError(line_no, "'emotion' must be a string");
      p.emotion = j["emotion"].get<std::string>();
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

const TurnScript& final_response(const DialogueScript& s) {
  for (auto it = s.turns.rbegin(); it != s.turns.rend(); ++it) {
    if (it->role == Role::assistant) return *it;
  }
  throw ContractError("dialogue '" + s.id + "' has no assistant turn");
}

}  // namespace

EvaluationReport evaluate_corpus(const std::vector<ManifestEntry>& entries, const std::vector<Prediction>& predictions,
                                 TokenEmbedClient& embedder, const EvaluateOptions& options) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) throw ContractError("duplicate prediction for '" + p.id + "'");
  }
  EvaluationReport rep;
  rep.bleu_level = options.bleu_level;
  rep.rouge_beta = options.rouge_beta;
  std::set<std::string> seen;
  std::vector<std::string> cands, refs, pred_labels, gold_labels;
  double gpt_total = 0.0;
  for (const auto& e : entries) {
    seen.insert(e.id());
    auto it = by_id.find(e.id());
    if (it == by_id.end()) {
      rep.missing_predictions.push_back(e.id());
      continue;
    }
    const Prediction& p = *it->second;
    const TurnScript& ref = final_response(e.script);
    DialogueScore d;
    d.id = e.id();
    d.gold_emotion = ref.style.emotion;
    d.predicted_emotion = p.emotion;
    const bool scorable = !text::normalize_words(p.text).empty() && !text::normalize_words(ref.content).empty();
    if (scorable) {
      d.bleu = bleu({p.text}, {ref.content}, BleuLevel::sentence);
      d.rouge_l = rouge_l(p.text, ref.content, options.rouge_beta);
      d.meteor = meteor(p.text, ref.content);
      d.embed_score = embed_score(p.text, ref.content, embedder);
    }
    if (options.judge && !text::trim(p.text).empty()) {
      std::vector<std::string> context;
      const TurnScript* last = &ref;
      for (const auto& t : e.script.turns) {
        if (&t == last) break;
        context.push_back(std::string(to_string(t.role)) + ": " + t.content);
      }
      d.gpt_eval = gpt_eval(context, p.text, *options.judge, derive_seed(options.seed, {hash_string(e.id())}));
      gpt_total += *d.gpt_eval;
    }
    cands.push_back(p.text);
    refs.push_back(ref.content);
    pred_labels.push_back(p.emotion);
    gold_labels.push_back(ref.style.emotion);
    rep.per_dialogue.push_back(std::move(d));
  }
  for (const auto& p : predictions) {
    if (!seen.count(p.id)) rep.unmatched_predictions.push_back(p.id);
  }
  if (rep.per_dialogue.empty()) throw ContractError("no prediction matches a manifest entry");

  const auto n = static_cast<double>(rep.per_dialogue.size());
  rep.corpus.bleu = bleu(cands, refs, options.bleu_level);
  for (const auto& d : rep.per_dialogue) {
    rep.corpus.rouge_l += d.rouge_l / n;
    rep.corpus.meteor += d.meteor / n;
    rep.corpus.embed_score += d.embed_score / n;
  }
  rep.corpus.f1_emotion = weighted_f1(pred_labels, gold_labels);
  if (options.judge) {
    std::size_t judged = 0;
    for (const auto& d : rep.per_dialogue) judged += d.gpt_eval.has_value();
    if (judged > 0) rep.corpus.gpt_eval = gpt_total / static_cast<double>(judged);
  }
  rep.corpus.validate();
  return rep;
}

std::string report_to_json(const EvaluationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["dialogues"] = r.per_dialogue.size();
  j["corpus"] = {{"bleu", r.corpus.bleu},
                 {"rouge_l", r.corpus.rouge_l},
                 {"meteor", r.corpus.meteor},
                 {"embed_score", r.corpus.embed_score},
                 {"f1_emotion", r.corpus.f1_emotion},
                 {"gpt_eval", opt(r.corpus.gpt_eval)}};
  j["config"] = {{"bleu_level", r.bleu_level == BleuLevel::corpus ? "corpus" : "sentence"},
                 {"rouge_beta", r.rouge_beta}};
  json per = json::array();
  for (const auto& d : r.per_dialogue) {
    per.push_back({{"id", d.id},
                   {"bleu", d.bleu},
                   {"rouge_l", d.rouge_l},
                   {"meteor", d.meteor},
                   {"embed_score", d.embed_score},
                   {"gold_emotion", d.gold_emotion},
                   {"predicted_emotion", d.predicted_emotion},
                   {"gpt_eval", opt(d.gpt_eval)}});
  }
  j["per_dialogue"] = std::move(per);
  j["missing_predictions"] = r.missing_predictions;
  j["unmatched_predictions"] = r.unmatched_predictions;
  return j.dump(2) + "\n";
}

}  // namespace dialoforge::eval
