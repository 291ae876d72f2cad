#pragma once

#include <atomic>
#include <cmath>
#include <deque>
#include <filesystem>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "dialoforge/mock_speech.hpp"
#include "dialoforge/quality_gate.hpp"
#include "dialoforge/script_forge.hpp"
#include "dialoforge/voice_render.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dialoforge_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Replies from a fixed queue; the last reply repeats once the queue is drained.
class ScriptedChat final : public dialoforge::ChatClient {
 public:
  explicit ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const std::string&, std::uint64_t) override {
    const std::size_t i = std::min(calls_, replies_.size() - 1);
    ++calls_;
    return replies_[i];
  }
  std::size_t calls() const { return calls_; }

 private:
  std::vector<std::string> replies_;
  std::size_t calls_ = 0;
};

/// Counts synthesize() calls and forwards to another client.
class CountingTts final : public dialoforge::TtsClient {
 public:
  explicit CountingTts(dialoforge::TtsClient& inner) : inner_(inner) {}
  dialoforge::Waveform synthesize(const std::string& content, const dialoforge::StyleSpec& style, int speaker_id,
                                  std::uint64_t seed) override {
    ++calls_;
    return inner_.synthesize(content, style, speaker_id, seed);
  }
  bool thread_safe() const override { return true; }
  int calls() const { return calls_.load(); }

 private:
  dialoforge::TtsClient& inner_;
  std::atomic<int> calls_{0};
};

/// Returns queued transcripts in call order, then falls back to `inner`.
class QueuedAsr final : public dialoforge::AsrClient {
 public:
  QueuedAsr(dialoforge::AsrClient& inner, std::deque<std::string> queue) : inner_(inner), queue_(std::move(queue)) {}
  std::string transcribe(const dialoforge::Waveform& w) override {
    ++calls_;
    if (!queue_.empty()) {
      auto s = queue_.front();
      queue_.pop_front();
      return s;
    }
    return inner_.transcribe(w);
  }
  int calls() const { return calls_; }

 private:
  dialoforge::AsrClient& inner_;
  std::deque<std::string> queue_;
  int calls_ = 0;
};

/// ASR that garbles every word for the first `bad_calls` calls.
class FlakyAsr final : public dialoforge::AsrClient {
 public:
  FlakyAsr(dialoforge::AsrClient& inner, int bad_calls) : inner_(inner), bad_calls_(bad_calls) {}
  std::string transcribe(const dialoforge::Waveform& w) override {
    const bool bad = calls_++ < bad_calls_;
    return bad ? std::string("zzz qqq xxx") : inner_.transcribe(w);
  }
  int calls() const { return calls_; }

 private:
  dialoforge::AsrClient& inner_;
  int bad_calls_;
  int calls_ = 0;
};

inline dialoforge::Waveform sine(double hz, double seconds, int rate, double amp = 0.5) {
  dialoforge::Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = amp * std::sin(2.0 * 3.14159265358979323846 * hz * static_cast<double>(i) / rate);
  return w;
}

inline dialoforge::Waveform noise(std::uint64_t seed, double seconds, double stddev = 0.1) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d(0.0, stddev);
  dialoforge::Waveform w;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * dialoforge::kCanonicalSampleRate)));
  for (auto& s : w.samples) s = d(gen);
  return w;
}

/// Alternating human/assistant script with `turns` turns of `words_per_turn` words.
inline dialoforge::DialogueScript simple_script(const std::string& id, int turns, int words_per_turn = 5) {
  static const char* kWords[] = {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel"};
  dialoforge::DialogueScript s;
  s.id = id;
  s.subset = dialoforge::Subset::emotion;
  s.seed.topic = "Artistic hobbies";
  for (int t = 0; t < turns; ++t) {
    dialoforge::TurnScript ts;
    ts.role = t % 2 == 0 ? dialoforge::Role::human : dialoforge::Role::assistant;
    ts.style.gender = t % 2 == 0 ? dialoforge::Gender::female : dialoforge::Gender::male;
    ts.style.emotion = t % 3 == 0 ? "happy" : "neutral";
    for (int w = 0; w < words_per_turn; ++w) {
      if (w) ts.content += ' ';
      ts.content += kWords[(t * 3 + w) % 8];
    }
    s.turns.push_back(ts);
  }
  return s;
}

}  // namespace testing_support
