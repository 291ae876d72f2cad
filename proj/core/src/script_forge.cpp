#include "dialoforge/script_forge.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "dialoforge/manifest.hpp"
#include "dialoforge/rng.hpp"
#include "dialoforge/scene_mixer.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge {

namespace {

std::string_view seed_placeholder(Subset s) {
  switch (s) {
    case Subset::emotion: return "{topic}";
    case Subset::audio: return "{caption}";
    case Subset::music: return "{aspect_list}";
  }
  return "";
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

void replace_once(std::string& s, std::string_view what, std::string_view with) {
  const auto pos = s.find(what);
  if (pos != std::string::npos) s.replace(pos, what.size(), with);
}

constexpr std::string_view kGrammarInstructions =
    "Answer with a single fenced block and nothing else, one line per turn:\n"
    "```dialogue\n"
    "role=<human|assistant> | gender=<male|female> | pitch=<low|normal|high> | speed=<slow|normal|fast> | "
    "emotion=<one allowed emotion> | text=<what is said>\n"
    "```\n"
    "Turns alternate, starting with the human.";

}  // namespace

PromptTemplate PromptTemplate::builtin(Subset subset) {
  std::string intro;
  switch (subset) {
    case Subset::emotion:
      intro =
          "Write a natural spoken conversation between a human and a voice assistant.\n"
          "Topic: {topic}\n"
          "Let the speakers express clear, changing emotions and let the assistant's final reply "
          "respond to the human's feelings as well as their words.\n";
      break;
    case Subset::audio:
      intro =
          "Write a natural spoken conversation between a human and a voice assistant that takes "
          "place while a sound can be heard nearby.\n"
          "Sound event: {caption}\n"
          "The human should react to or ask about the sound and the assistant should take it into account.\n";
      break;
    case Subset::music:
      intro =
          "Write a natural spoken conversation between a human and a voice assistant while a piece "
          "of music is playing.\n"
          "Music aspects: {aspect_list}\n"
          "The conversation should touch on the music's style, instruments or mood.\n";
      break;
  }
  PromptTemplate t;
  t.subset = subset;
  t.body = intro +
           "First write the dialogue history, then the human's next turn and the assistant's response "
           "with an emotion that fits the context.\n" +
           std::string(kHistoryRoundsMarker) +
           "{n_history} (each round is one human turn followed by one assistant turn)\n" +
           std::string(kEmotionSetMarker) + "{emotion_set}\n" + std::string(kGrammarInstructions) + "\n";
  return t;
}

void check_template(const PromptTemplate& tmpl) {
  const auto needed = seed_placeholder(tmpl.subset);
  if (count_occurrences(tmpl.body, needed) != 1)
    throw TemplateError("template must contain " + std::string(needed) + " exactly once");
  for (auto p : {"{n_history}", "{emotion_set}"})
    if (count_occurrences(tmpl.body, p) != 1) throw TemplateError(std::string("template must contain ") + p + " exactly once");
  for (Subset other : {Subset::emotion, Subset::audio, Subset::music}) {
    if (other == tmpl.subset) continue;
    if (count_occurrences(tmpl.body, seed_placeholder(other)) != 0)
      throw TemplateError("template for subset " + std::string(to_string(tmpl.subset)) + " uses " +
                          std::string(seed_placeholder(other)));
  }
}

std::string render_prompt(const PromptTemplate& tmpl, const SceneSeed& seed, int n_history,
                          const EmotionVocabulary& vocab) {
  if (n_history < 1) throw ContractError("render_prompt: n_history must be >= 1");
  check_template(tmpl);
  std::string seed_text;
  switch (tmpl.subset) {
    case Subset::emotion:
      if (!seed.topic || text::trim(*seed.topic).empty()) throw TemplateError("emotion template needs a topic");
      seed_text = *seed.topic;
      break;
    case Subset::audio:
      if (!seed.caption || text::trim(*seed.caption).empty()) throw TemplateError("audio template needs a caption");
      seed_text = *seed.caption;
      break;
    case Subset::music:
      if (!seed.aspect_list || seed.aspect_list->empty()) throw TemplateError("music template needs an aspect list");
      seed_text = text::join(*seed.aspect_list, ", ");
      break;
  }
  std::string out = tmpl.body;
  replace_once(out, seed_placeholder(tmpl.subset), seed_text);
  replace_once(out, "{n_history}", std::to_string(n_history));
  replace_once(out, "{emotion_set}", vocab.joined());
  return out;
}

std::string emit_script_output(const std::vector<TurnScript>& turns) {
  std::ostringstream out;
  out << "```dialogue\n";
  for (const auto& t : turns) {
    out << "role=" << to_string(t.role) << " | gender=" << to_string(t.style.gender)
        << " | pitch=" << to_string(t.style.pitch) << " | speed=" << to_string(t.style.speed)
        << " | emotion=" << t.style.emotion << " | text=" << t.content << "\n";
  }
  out << "```\n";
  return out.str();
}

namespace {

TurnScript parse_turn_line(std::string_view line, const EmotionVocabulary& vocab) {
  const std::string fragment = text::trim(line);
  std::optional<std::string> role, gender, pitch, speed, emotion, content;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    auto bar = line.find('|', pos);
    std::string_view seg = line.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos);
    const std::string token = text::trim(seg);
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ScriptParseError("field without '='", fragment);
    const std::string key = text::trim(token.substr(0, eq));
    if (key == "text") {
      // text runs to end of line, '|' included
      const auto start = line.find('=', pos) + 1;
      content = text::trim(line.substr(start));
      break;
    }
    const std::string value = text::trim(token.substr(eq + 1));
    if (key == "role") role = value;
    else if (key == "gender") gender = value;
    else if (key == "pitch") pitch = value;
    else if (key == "speed") speed = value;
    else if (key == "emotion") emotion = value;
    else throw ScriptParseError("unknown field '" + key + "'", fragment);
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }

  if (!role) throw ScriptParseError("missing role", fragment);
  if (!gender) throw ScriptParseError("missing style.gender", fragment);
  if (!pitch) throw ScriptParseError("missing style.pitch", fragment);
  if (!speed) throw ScriptParseError("missing style.speed", fragment);
  if (!emotion) throw ScriptParseError("missing style.emotion", fragment);
  if (!content) throw ScriptParseError("missing text", fragment);

  TurnScript t;
  auto r = parse_role(*role);
  if (!r) throw ScriptParseError("unknown role '" + *role + "'", fragment);
  auto g = parse_gender(*gender);
  if (!g) throw ScriptParseError("unknown gender '" + *gender + "'", fragment);
  auto p = parse_pitch(*pitch);
  if (!p) throw ScriptParseError("unknown pitch '" + *pitch + "'", fragment);
  auto s = parse_speed(*speed);
  if (!s) throw ScriptParseError("unknown speed '" + *speed + "'", fragment);
  const std::string emo = text::to_lower(*emotion);
  if (!vocab.contains(emo)) throw ScriptParseError("unknown emotion '" + *emotion + "'", fragment);
  if (text::normalize_words(*content).empty()) throw ScriptParseError("empty text", fragment);
  t.role = *r;
  t.style = {*g, *p, *s, emo};
  t.content = *content;
  return t;
}

}  // namespace

DialogueScript parse_script_output(std::string_view raw, Subset subset, int n_history, std::string id,
                                   SceneSeed seed, const EmotionVocabulary& vocab) {
  constexpr std::string_view kOpen = "```dialogue";
  const auto open = raw.find(kOpen);
  if (open == std::string_view::npos)
    throw ScriptParseError("no ```dialogue block", std::string(raw.substr(0, std::min<std::size_t>(raw.size(), 60))));
  auto body_start = raw.find('\n', open);
  if (body_start == std::string_view::npos) throw ScriptParseError("unterminated dialogue block", "");
  ++body_start;
  const auto close = raw.find("```", body_start);
  if (close == std::string_view::npos) throw ScriptParseError("unterminated dialogue block", "");
  const auto body = raw.substr(body_start, close - body_start);

  DialogueScript script;
  script.id = std::move(id);
  script.subset = subset;
  script.seed = std::move(seed);
  for (const auto& line : text::split(body, '\n')) {
    if (text::trim(line).empty()) continue;
    script.turns.push_back(parse_turn_line(line, vocab));
  }
  for (std::size_t k = 0; k < script.turns.size(); ++k) {
    const auto expected = k % 2 == 0 ? Role::human : Role::assistant;
    if (script.turns[k].role != expected) {
      if (k == 0) throw ScriptParseError("dialogue must start with a human turn", script.turns[k].content);
      throw ScriptParseError("non-alternating at index " + std::to_string(k), script.turns[k].content);
    }
  }
  const auto expected_turns = static_cast<std::size_t>(turns_for_history(n_history));
  if (script.turns.size() != expected_turns)
    throw ScriptParseError("wrong turn count: expected " + std::to_string(expected_turns) + ", got " +
                               std::to_string(script.turns.size()),
                           "");
  const auto violations = validate_script(script, vocab);
  if (!violations.empty())
    throw ScriptParseError(violations.front().field + ": " + violations.front().message, "");
  return script;
}

GeneratedScript generate_script(ChatClient& client, const PromptTemplate& tmpl, const SceneSeed& seed_data,
                                int n_history, int max_parse_retries, std::string id, std::uint64_t base_seed,
                                const EmotionVocabulary& vocab) {
  if (max_parse_retries < 1) throw ContractError("generate_script: max_parse_retries must be >= 1");
  const std::string prompt = render_prompt(tmpl, seed_data, n_history, vocab);
  std::string last_error;
  for (int attempt = 0; attempt < max_parse_retries; ++attempt) {
    const std::string raw = client.complete(prompt, derive_seed(base_seed, {static_cast<std::uint64_t>(attempt)}));
    try {
      return {parse_script_output(raw, tmpl.subset, n_history, id, seed_data, vocab), attempt + 1};
    } catch (const ScriptParseError& e) {
      last_error = e.what();
    }
  }
  throw GenerationError("script generation failed after " + std::to_string(max_parse_retries) + " attempts",
                        last_error, max_parse_retries);
}

// ---------------------------------------------------------------------------
// Caption corpora

const std::vector<std::string>& default_speech_keywords() {
  static const std::vector<std::string> kw{
      "speaking", "speech",     "speaks",   "speak",   "talks",     "talking", "talk",
      "man says", "woman says", "narrates", "narration", "conversation", "voice speaks", "whispering"};
  return kw;
}

bool mentions_speech(std::string_view caption, const std::vector<std::string>& keywords) {
  const auto words = text::normalize_words(caption);
  for (const auto& kw : keywords) {
    const auto phrase = text::normalize_words(kw);
    if (phrase.empty() || phrase.size() > words.size()) continue;
    for (std::size_t i = 0; i + phrase.size() <= words.size(); ++i)
      if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRow> parse_csv(std::string_view csv) {
  std::vector<CsvRow> rows;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < csv.size()) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool row_done = false;
    while (!row_done) {
      if (i >= csv.size()) {
        if (in_quotes) throw IngestionError(row.line, "unterminated quoted field");
        row.fields.push_back(std::move(field));
        break;
      }
      const char c = csv[i++];
      if (in_quotes) {
        if (c == '"') {
          if (i < csv.size() && csv[i] == '"') {
            field.push_back('"');
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        ++line;
        row.fields.push_back(std::move(field));
        row_done = true;
      } else if (c != '\r') {
        field.push_back(c);
      }
    }
    const bool blank = row.fields.size() == 1 && text::trim(row.fields[0]).empty();
    if (!blank) rows.push_back(std::move(row));
  }
  return rows;
}

// "['a', 'b']" or "a, b" -> {"a", "b"}
std::vector<std::string> parse_aspect_list(std::string_view raw) {
  std::string s = text::trim(raw);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  for (auto part : text::split(s, ',')) {
    std::string t = text::trim(part);
    if (t.size() >= 2 && (t.front() == '\'' || t.front() == '"') && t.back() == t.front()) t = t.substr(1, t.size() - 2);
    t = text::trim(t);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::optional<std::size_t> column(const std::vector<std::string>& header, std::initializer_list<std::string_view> names) {
  for (auto name : names)
    for (std::size_t i = 0; i < header.size(); ++i)
      if (text::to_lower(text::trim(header[i])) == name) return i;
  return std::nullopt;
}

}  // namespace

std::vector<CaptionRecord> parse_caption_csv(std::string_view csv, Subset subset,
                                             const std::vector<std::string>& speech_keywords) {
  if (subset == Subset::emotion) throw ContractError("caption corpora exist only for the audio and music subsets");
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw IngestionError(1, "missing header row");
  const auto& header = rows.front().fields;
  const auto id_col = column(header, {"source_id", "audiocap_id", "ytid", "youtube_id", "id"});
  if (!id_col) throw IngestionError(1, "no source id column");
  const auto text_col = subset == Subset::audio ? column(header, {"caption"}) : column(header, {"aspect_list"});
  if (!text_col) throw IngestionError(1, subset == Subset::audio ? "no caption column" : "no aspect_list column");

  std::vector<CaptionRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size())
      throw IngestionError(row.line, "expected " + std::to_string(header.size()) + " fields, got " +
                                         std::to_string(row.fields.size()));
    CaptionRecord rec;
    rec.source_id = text::trim(row.fields[*id_col]);
    if (rec.source_id.empty()) throw IngestionError(row.line, "empty source id");
    if (subset == Subset::audio) {
      rec.caption = text::trim(row.fields[*text_col]);
    } else {
      rec.aspects = parse_aspect_list(row.fields[*text_col]);
      rec.caption = text::join(rec.aspects, ", ");
    }
    if (rec.caption.empty()) throw IngestionError(row.line, "empty caption");
    if (mentions_speech(rec.caption, speech_keywords)) continue;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CaptionRecord> ingest_caption_corpus(const std::filesystem::path& path, Subset subset,
                                                 const std::vector<std::string>& speech_keywords) {
  if (!std::filesystem::exists(path)) throw IngestionError(0, "caption file '" + path.string() + "' does not exist");
  return parse_caption_csv(read_text_file(path), subset, speech_keywords);
}

// ---------------------------------------------------------------------------
// Mock LLM

namespace {

constexpr std::array<std::string_view, 64> kMockWords{
    "i",      "you",    "we",     "think",   "really", "like",    "the",    "music",  "sound",
    "today",  "feel",   "that",   "was",     "so",     "good",    "maybe",  "should", "try",
    "again",  "tomorrow", "it",   "sounds",  "great",  "what",    "about",  "your",   "day",
    "honestly", "never", "heard", "before",  "lovely", "strange", "loud",   "quiet",  "wonder",
    "why",    "this",   "happens", "every",  "time",   "please",  "tell",   "me",     "more",
    "remember", "when", "tried",  "painting", "friends", "dinner", "trip",  "weekend", "rain",
    "door",   "outside", "calm",  "worried", "excited", "sorry",  "thanks", "sure",   "right",
    "okay"};

std::optional<std::string> line_after(std::string_view prompt, std::string_view marker) {
  const auto pos = prompt.find(marker);
  if (pos == std::string_view::npos) return std::nullopt;
  const auto start = pos + marker.size();
  const auto end = prompt.find('\n', start);
  return text::trim(prompt.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

std::string mock_script(const std::string& prompt, CounterRng& rng, bool malformed) {
  int n_history = 1;
  if (auto n = line_after(prompt, kHistoryRoundsMarker)) {
    try {
      n_history = std::max(1, std::stoi(*n));
    } catch (const std::exception&) {
    }
  }
  std::vector<std::string> emotions = EmotionVocabulary{}.labels();
  if (auto e = line_after(prompt, kEmotionSetMarker)) {
    std::vector<std::string> parsed;
    for (auto part : text::split(*e, ',')) {
      auto t = text::trim(part);
      if (!t.empty()) parsed.push_back(t);
    }
    if (!parsed.empty()) emotions = std::move(parsed);
  }

  const Gender human_gender = rng.below(2) ? Gender::female : Gender::male;
  const Gender assistant_gender = rng.below(2) ? Gender::female : Gender::male;
  std::vector<TurnScript> turns;
  const int n_turns = turns_for_history(n_history);
  for (int k = 0; k < n_turns; ++k) {
    TurnScript t;
    t.role = k % 2 == 0 ? Role::human : Role::assistant;
    t.style.gender = t.role == Role::human ? human_gender : assistant_gender;
    t.style.pitch = static_cast<Pitch>(rng.below(3));
    t.style.speed = static_cast<Speed>(rng.below(3));
    t.style.emotion = emotions[rng.below(emotions.size())];
    const auto n_words = 3 + rng.below(8);
    std::vector<std::string> words;
    for (std::uint64_t w = 0; w < n_words; ++w) words.emplace_back(kMockWords[rng.below(kMockWords.size())]);
    words.front()[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(words.front()[0])));
    t.content = text::join(words, " ") + (rng.below(4) == 0 ? "?" : ".");
    turns.push_back(std::move(t));
  }
  std::string out = "Here is the conversation.\n" + emit_script_output(turns);
  if (malformed) {
    // Drop the emotion field of one turn.
    const auto pos = out.find(" | emotion=");
    const auto end = out.find(" | text=", pos);
    out.erase(pos, end - pos);
  }
  return out;
}

}  // namespace

std::string MockChatClient::complete(const std::string& prompt, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, {hash_string(prompt)}));
  if (prompt.find(kEvalMarker) != std::string::npos) {
    return "Score: " + std::to_string(1 + rng.below(5));
  }
  if (prompt.find(kEventDurationMarker) != std::string::npos && prompt.find("```dialogue") == std::string::npos) {
    const auto caption = line_after(prompt, kEventDescriptionMarker).value_or(prompt);
    return std::string(to_string(heuristic_event_class(caption)));
  }
  const bool malformed = opts_.malformed_rate > 0.0 && rng.uniform() < opts_.malformed_rate;
  return mock_script(prompt, rng, malformed);
}

}  // namespace dialoforge
