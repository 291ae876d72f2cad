#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "dialoforge/eval_metrics.hpp"
#include "dialoforge/fusion.hpp"
#include "dialoforge/quality_gate.hpp"
#include "dialoforge/scene_mixer.hpp"
#include "dialoforge/voice_render.hpp"

using namespace dialoforge;

namespace {

std::string words(std::mt19937_64& gen, int n) {
  static const char* kVocab[] = {"we", "could", "paint", "the", "river", "tonight", "maybe", "after", "dinner"};
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string(kVocab[gen() % 9]);
  return s;
}

Waveform tone(double hz, double secs, int rate) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(secs * rate));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return w;
}

void BM_Wer(benchmark::State& state) {
  std::mt19937_64 gen(1);
  const auto ref = words(gen, static_cast<int>(state.range(0)));
  const auto hyp = words(gen, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(wer(ref, hyp));
}
BENCHMARK(BM_Wer)->Arg(10)->Arg(100)->Arg(1000);

void BM_Resample48kTo16k(benchmark::State& state) {
  const auto w = tone(440.0, static_cast<double>(state.range(0)), 48000);
  for (auto _ : state) benchmark::DoNotOptimize(resample_16k(w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.samples.size()));
}
BENCHMARK(BM_Resample48kTo16k)->Arg(1)->Arg(10);

void BM_OverlayAtSnr(benchmark::State& state) {
  const auto speech = tone(220.0, 5.0, 16000), background = tone(97.0, 5.0, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(overlay_at_snr(speech, background, 10.0));
}
BENCHMARK(BM_OverlayAtSnr);

void BM_MixFormer(benchmark::State& state) {
  fusion::ModelShape shape;
  shape.expert_dims = {32, 32, 32};
  shape.model_dim = 64;
  const auto model = fusion::random_model(shape, 3);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> d;
  std::array<fusion::Matrix, fusion::kExperts> feats;
  for (auto& f : feats) {
    f.resize(state.range(0), 32);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = d(gen);
  }
  fusion::FusionConfig cfg{17, 1, 64};
  for (auto _ : state) benchmark::DoNotOptimize(fusion::mix_former(model.fusion, cfg, feats));
}
BENCHMARK(BM_MixFormer)->Arg(100)->Arg(1000);

void BM_FusionBackward(benchmark::State& state) {
  const auto p = fusion::random_problem(0);
  for (auto _ : state) benchmark::DoNotOptimize(fusion::backward(p.model, p.cfg, p.instance).loss);
}
BENCHMARK(BM_FusionBackward);

void BM_CorpusBleu(benchmark::State& state) {
  std::mt19937_64 gen(5);
  std::vector<std::string> cands, refs;
  for (int i = 0; i < state.range(0); ++i) {
    cands.push_back(words(gen, 12));
    refs.push_back(words(gen, 12));
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::bleu(cands, refs));
}
BENCHMARK(BM_CorpusBleu)->Arg(100)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
