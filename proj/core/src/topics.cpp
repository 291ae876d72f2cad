#include <string_view>

#include "dialoforge/script_forge.hpp"
#include "dialoforge/text.hpp"

namespace dialoforge {

namespace assets {
std::string_view emotion_topics_txt();
std::string_view audio_captions_csv();
std::string_view music_captions_csv();
}  // namespace assets

const std::vector<std::string>& emotion_topics() {
  static const std::vector<std::string> topics = [] {
    std::vector<std::string> out;
    for (const auto& line : text::split(assets::emotion_topics_txt(), '\n')) {
      auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      out.push_back(std::move(t));
    }
    return out;
  }();
  return topics;
}

std::vector<CaptionRecord> builtin_captions(Subset subset) {
  switch (subset) {
    case Subset::audio: return parse_caption_csv(assets::audio_captions_csv(), Subset::audio);
    case Subset::music: return parse_caption_csv(assets::music_captions_csv(), Subset::music);
    case Subset::emotion: break;
  }
  throw ContractError("builtin captions exist only for the audio and music subsets");
}

}  // namespace dialoforge
