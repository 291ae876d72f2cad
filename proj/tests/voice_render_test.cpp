#include <gtest/gtest.h>

#include "dialoforge/dsp.hpp"
#include "dialoforge/errors.hpp"
#include "dialoforge/mock_speech.hpp"
#include "dialoforge/voice_render.hpp"
#include "dialoforge/wav_io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dialoforge;

namespace {

TurnScript turn(const std::string& text) {
  TurnScript t;
  t.content = text;
  return t;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST(MockTts, BitIdenticalAcrossRuns) {
  MockTtsClient a(std::make_shared<MockSpeechRegistry>());
  MockTtsClient b(std::make_shared<MockSpeechRegistry>());
  const auto w1 = synthesize_turn(a, turn("good morning everyone"), 0, 99);
  const auto w2 = synthesize_turn(b, turn("good morning everyone"), 0, 99);
  EXPECT_EQ(w1, w2);
  EXPECT_EQ(w1.sample_rate, kCanonicalSampleRate);
}

TEST(MockTts, EmptyContentIsContractError) {
  MockTtsClient tts(std::make_shared<MockSpeechRegistry>());
  EXPECT_THROW(synthesize_turn(tts, turn(""), 0, 1), ContractError);
  EXPECT_THROW(synthesize_turn(tts, turn("  ...  "), 0, 1), ContractError);
}

TEST(MockTts, SpeakerChangesWaveform) {
  MockTtsClient tts(std::make_shared<MockSpeechRegistry>());
  EXPECT_NE(synthesize_turn(tts, turn("same words"), 0, 1), synthesize_turn(tts, turn("same words"), 1, 1));
  EXPECT_NE(MockTtsClient::carrier_hz(0), MockTtsClient::carrier_hz(1));
}

TEST(MockTts, DurationFollowsWordsAndSpeed) {
  MockTtsClient tts(std::make_shared<MockSpeechRegistry>());
  TurnScript slow = turn("one two three four");
  slow.style.speed = Speed::slow;
  TurnScript fast = slow;
  fast.style.speed = Speed::fast;
  EXPECT_GT(synthesize_turn(tts, slow, 0, 1).duration_s(), synthesize_turn(tts, fast, 0, 1).duration_s());
  EXPECT_GT(synthesize_turn(tts, turn("one two three four"), 0, 1).duration_s(),
            synthesize_turn(tts, turn("one two"), 0, 1).duration_s());
}

TEST(Resample, SixteenKilohertzIsIdentity) {
  const auto w = testing_support::noise(3, 0.5);
  EXPECT_EQ(resample_16k(w), w);
}

TEST(Resample, ToneKeepsDominantBin) {
  const auto w = testing_support::sine(440.0, 1.0, 48000);
  const auto out = resample_16k(w);
  ASSERT_EQ(out.sample_rate, 16000);
  ASSERT_EQ(out.samples.size(), 16000u);
  const auto mag = oracle::dft_magnitude(out.samples, 4096);
  const double expected = 440.0 * 4096.0 / 16000.0;
  EXPECT_LE(std::abs(static_cast<double>(argmax(mag)) - expected), 2.0);
}

TEST(Resample, EightKilohertzDoublesLength) {
  for (std::size_t n : {1u, 7u, 800u, 8001u}) {
    Waveform w;
    w.sample_rate = 8000;
    w.samples.assign(n, 0.1);
    EXPECT_EQ(resample_16k(w).samples.size(), 2 * n);
  }
}

TEST(Resample, DurationPreservedWithinOneSample) {
  for (int rate : {8000, 11025, 22050, 24000, 44100, 48000}) {
    for (double secs : {0.013, 0.5, 1.37}) {
      const auto w = testing_support::sine(300.0, secs, rate);
      const auto out = resample_16k(w);
      EXPECT_LE(std::abs(out.duration_s() - w.duration_s()), 1.0 / 16000.0) << rate << " " << secs;
    }
  }
}

TEST(Resample, FftMatchesNaiveDft) {
  const auto w = testing_support::noise(11, 0.1);
  const auto fast = dsp::magnitude_spectrum(w.samples, 256);
  const auto slow = oracle::dft_magnitude(w.samples, 256);
  ASSERT_EQ(fast.size(), slow.size());
  for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_NEAR(fast[k], slow[k], 1e-9);
}

TEST(Assemble, TwoUtterancesWithGap) {
  Waveform a, b;
  a.samples.assign(16000, 0.1);
  b.samples.assign(16000, 0.2);
  const auto t = assemble_dialogue_track({a, b}, {0.3});
  EXPECT_EQ(t.track.samples.size(), 36800u);
  EXPECT_DOUBLE_EQ(t.track.duration_s(), 2.3);
  ASSERT_EQ(t.layout.segments.size(), 2u);
  EXPECT_EQ(t.layout.segments[0].start_sample, 0u);
  EXPECT_EQ(t.layout.segments[0].end_sample, 16000u);
  EXPECT_EQ(t.layout.segments[1].start_sample, 20800u);
  EXPECT_EQ(t.layout.segments[1].end_sample, 36800u);
  EXPECT_EQ(t.track.samples[18000], 0.0);
}

TEST(Assemble, SingleUtteranceIsIdentity) {
  const auto w = testing_support::noise(5, 0.7);
  const auto t = assemble_dialogue_track({w}, {});
  EXPECT_EQ(t.track, w);
}

TEST(Assemble, GapCountMismatchIsContractError) {
  const auto w = testing_support::noise(5, 0.1);
  EXPECT_THROW(assemble_dialogue_track({w, w}, {}), ContractError);
  EXPECT_THROW(assemble_dialogue_track({w}, {0.2}), ContractError);
}

TEST(Assemble, AppendingMatchesAssemblingAllAtOnce) {
  const auto a = testing_support::noise(1, 0.3), b = testing_support::noise(2, 0.2), c = testing_support::noise(3, 0.4);
  const auto ab = assemble_dialogue_track({a, b}, {0.25});
  const auto abc = assemble_dialogue_track({a, b, c}, {0.25, 0.4});
  const auto ab_c = assemble_dialogue_track({ab.track, c}, {0.4});
  EXPECT_EQ(ab_c.track, abc.track);
  EXPECT_EQ(ab_c.layout.segments[1].start_sample, abc.layout.segments[2].start_sample);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(ab.layout.segments[i], abc.layout.segments[i]);
}

TEST(Assemble, NonCanonicalRateRejected) {
  auto w = testing_support::noise(1, 0.1);
  w.sample_rate = 8000;
  EXPECT_THROW(assemble_dialogue_track({w}, {}), ContractError);
}

TEST(Gaps, DrawnWithinRangeAndSeeded) {
  const auto g = sample_gaps(100, 0.2, 0.5, 4);
  ASSERT_EQ(g.size(), 100u);
  for (double x : g) {
    EXPECT_GE(x, 0.2);
    EXPECT_LE(x, 0.5);
  }
  EXPECT_EQ(g, sample_gaps(100, 0.2, 0.5, 4));
  EXPECT_NE(g, sample_gaps(100, 0.2, 0.5, 5));
}

TEST(Wav, Pcm16RoundTripWithinHalfStep) {
  const auto w = testing_support::noise(9, 0.2, 0.3);
  const auto bytes = encode_wav(w);
  EXPECT_EQ(bytes.size(), 44 + 2 * w.samples.size());
  EXPECT_EQ(bytes.substr(0, 4), "RIFF");
  const auto back = decode_wav(bytes);
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    EXPECT_LE(std::abs(back.samples[i] - std::clamp(w.samples[i], -1.0, 1.0)), 0.5 / 32767.0 + 1e-12);
  EXPECT_EQ(quantize_pcm16(back), back);
}

TEST(Wav, TruncatedInputRejected) {
  const auto bytes = encode_wav(testing_support::noise(9, 0.01));
  EXPECT_THROW(decode_wav(bytes.substr(0, 30)), Error);
}
