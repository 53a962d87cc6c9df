#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "affex/classify.hpp"
#include "affex/dsp.hpp"
#include "affex/features.hpp"
#include "affex/stats.hpp"
#include "affex/synthkit.hpp"

namespace {

using namespace affex;

std::vector<double> tone_frame(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 44100.0;
    for (int h = 1; h <= 8; ++h) x[i] += std::sin(2.0 * M_PI * 98.0 * h * t) / h;
  }
  return x;
}

void BM_MagnitudeSpectrum(benchmark::State& state) {
  const auto frame = tone_frame(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsp::magnitude_spectrum(frame, dsp::Window::Hann, 44100));
  }
}
BENCHMARK(BM_MagnitudeSpectrum)->Arg(2048)->Arg(4096);

void BM_EstimateF0(benchmark::State& state) {
  const auto spectrum = dsp::magnitude_spectrum(tone_frame(2048), dsp::Window::Hann, 44100);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::estimate_f0(spectrum));
}
BENCHMARK(BM_EstimateF0);

void BM_ExtractPartials(benchmark::State& state) {
  const auto spectrum = dsp::magnitude_spectrum(tone_frame(2048), dsp::Window::Hann, 44100);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::extract_partials(spectrum, 98.0));
}
BENCHMARK(BM_ExtractPartials);

void BM_ExtractFeatures(benchmark::State& state) {
  const auto perf = synthkit::synth_performance(synthkit::default_presets()[6], 16);
  const audio::RecordingMeta meta{"bench.wav", "p01", Emotion::Neutral};
  for (auto _ : state) benchmark::DoNotOptimize(features::extract_features(perf.clip, meta, {}));
}
BENCHMARK(BM_ExtractFeatures)->Unit(benchmark::kMillisecond);

dataset::LabeledMatrix random_matrix(std::size_t dims) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  dataset::LabeledMatrix m;
  for (std::size_t j = 0; j < dims; ++j) m.feature_names.push_back("F" + std::to_string(j));
  for (int p = 0; p < 10; ++p) {
    for (Emotion e : kAllEmotions) {
      dataset::LabeledRow row{"p" + std::to_string(p), e, std::vector<double>(dims)};
      for (std::size_t j = 0; j < dims; ++j) row.values[j] = n01(rng) + (j % 7 == index_of(e) ? 3.0 : 0.0);
      m.rows.push_back(std::move(row));
    }
  }
  return m;
}

void BM_GateFeatures(benchmark::State& state) {
  const auto m = random_matrix(26);
  for (auto _ : state) benchmark::DoNotOptimize(stats::gate_features(m, 0.05));
}
BENCHMARK(BM_GateFeatures);

void BM_PcaFit(benchmark::State& state) {
  const auto m = random_matrix(24);
  for (auto _ : state) benchmark::DoNotOptimize(stats::pca_fit(m, m.feature_names));
}
BENCHMARK(BM_PcaFit);

void BM_LeaveOneOut(benchmark::State& state) {
  const auto m = random_matrix(24);
  const classify::FeatureSet set{"24F", classify::FeatureSet::Kind::Features, m.feature_names, 0};
  for (auto _ : state) benchmark::DoNotOptimize(classify::leave_one_out(m, set, {}));
}
BENCHMARK(BM_LeaveOneOut)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
