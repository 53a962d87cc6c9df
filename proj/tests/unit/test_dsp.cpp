#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "affex/dsp.hpp"
#include "affex/error.hpp"
#include "affex/synthkit.hpp"
#include "signals.hpp"

namespace affex {
namespace {

using namespace testing;

constexpr std::size_t kN = 2048;

dsp::Spectrum spectrum_of(const std::vector<double>& x, dsp::Window w = dsp::Window::Hann,
                          std::size_t offset = 0) {
  std::vector<double> frame(x.begin() + static_cast<long>(offset),
                            x.begin() + static_cast<long>(offset + kN));
  return dsp::magnitude_spectrum(frame, w, kRate);
}

// ---- frame_signal ----

TEST(FrameSignal, CountsFollowCeilRule) {
  EXPECT_EQ(dsp::frame_signal(zeros(4096), 2048, 512).size(), 5u);
  EXPECT_EQ(dsp::frame_signal(zeros(2048), 2048, 512).size(), 1u);
}

TEST(FrameSignal, TailFrameIsZeroPadded) {
  std::vector<double> x(2049, 0.25);
  const auto frames = dsp::frame_signal(x, 2048, 512);
  ASSERT_EQ(frames.size(), 2u);
  const auto& tail = frames[1];
  ASSERT_EQ(tail.size(), 2048u);
  // Samples 512..2048 exist (1537 of them); the remaining 511 are padding.
  EXPECT_EQ(std::count(tail.begin(), tail.end(), 0.25), 1537);
  EXPECT_EQ(std::count(tail.begin(), tail.end(), 0.0), 511);
}

TEST(FrameSignal, FrameCoversHopOffset) {
  std::vector<double> x(5000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) / 5000.0;
  const auto frames = dsp::frame_signal(x, 1024, 256);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    EXPECT_EQ(frames[k][0], x[k * 256]);
  }
}

TEST(FrameSignal, ShortInputThrows) {
  EXPECT_THROW(dsp::frame_signal(zeros(100), 2048, 512), InputTooShortError);
}

TEST(FrameSignal, RejectsBadHop) {
  EXPECT_ANY_THROW(dsp::frame_signal(zeros(4096), 2048, 0));
  EXPECT_ANY_THROW(dsp::frame_signal(zeros(4096), 2048, 4096));
}

// ---- magnitude_spectrum ----

TEST(MagnitudeSpectrum, ExactBinSineReportsAmplitude) {
  const double hz = 32.0 * kRate / kN;  // 689.06 Hz
  const auto s = spectrum_of(sine(hz, 0.8, kN), dsp::Window::Rectangular);
  EXPECT_NEAR(s.magnitudes[32], 0.8, 1e-6);
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k) {
    if (k == 32) continue;
    EXPECT_LT(s.magnitudes[k], 1e-9) << "bin " << k;
  }
}

TEST(MagnitudeSpectrum, ZeroFrameGivesZeros) {
  const auto s = spectrum_of(zeros(kN));
  for (double m : s.magnitudes) EXPECT_EQ(m, 0.0);
}

TEST(MagnitudeSpectrum, ShapeInvariants) {
  const auto s = spectrum_of(sine(440.0, 0.5, kN));
  ASSERT_EQ(s.magnitudes.size(), kN / 2 + 1);
  ASSERT_EQ(s.bin_freqs.size(), kN / 2 + 1);
  EXPECT_EQ(s.bin_freqs.front(), 0.0);
  EXPECT_DOUBLE_EQ(s.bin_freqs.back(), kRate / 2.0);
  for (std::size_t k = 1; k < s.bin_freqs.size(); ++k) EXPECT_GT(s.bin_freqs[k], s.bin_freqs[k - 1]);
}

TEST(MagnitudeSpectrum, NonPowerOfTwoIsConfigError) {
  EXPECT_THROW(dsp::magnitude_spectrum(zeros(1000), dsp::Window::Hann, kRate), ConfigError);
}

TEST(MagnitudeSpectrum, BetweenBinsHannWithinFifteenPercent) {
  for (double bin : {32.25, 32.4, 32.6, 32.75}) {
    const double hz = bin * kRate / kN;
    const auto s = spectrum_of(sine(hz, 0.8, kN));
    const double peak = *std::max_element(s.magnitudes.begin(), s.magnitudes.end());
    EXPECT_NEAR(peak, 0.8, 0.15 * 0.8) << "bin " << bin;
    // Parabolic refinement inside extract_partials recovers it to 1%.
    const auto p = dsp::extract_partials(s, hz);
    ASSERT_FALSE(p.empty());
    EXPECT_EQ(p.partials[0].harmonic, 1);
    EXPECT_NEAR(p.partials[0].amplitude, 0.8, 0.01 * 0.8) << "bin " << bin;
  }
}

TEST(MagnitudeSpectrum, HalfBinRefinementWithinOnePercent) {
  const double hz = 32.5 * kRate / kN;
  const auto p = dsp::extract_partials(spectrum_of(sine(hz, 0.8, kN)), hz);
  ASSERT_FALSE(p.empty());
  EXPECT_NEAR(p.partials[0].amplitude, 0.8, 0.008);
}

TEST(MagnitudeSpectrum, ParsevalOnRandomFrames) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto w : {dsp::Window::Rectangular, dsp::Window::Hann, dsp::Window::Hamming,
                 dsp::Window::Blackman}) {
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> x(kN);
      for (double& v : x) v = u(rng);
      const auto s = dsp::magnitude_spectrum(x, w, kRate);
      const auto win = dsp::make_window(w, kN);
      double direct = 0.0;
      for (std::size_t i = 0; i < kN; ++i) direct += (win[i] * x[i]) * (win[i] * x[i]);
      EXPECT_NEAR(dsp::windowed_energy(s) / direct, 1.0, 1e-6);
    }
  }
}

// ---- estimate_f0 ----

TEST(EstimateF0, PureSine) {
  const auto f0 = dsp::estimate_f0(spectrum_of(sine(440.0, 0.5, kN)));
  ASSERT_TRUE(f0);
  EXPECT_NEAR(*f0, 440.0, 1.0);
}

TEST(EstimateF0, TenEqualHarmonics) {
  const auto x = harmonic_complex(116.5, std::vector<double>(10, 0.08), kN * 2);
  const auto f0 = dsp::estimate_f0(spectrum_of(x));
  ASSERT_TRUE(f0);
  EXPECT_NEAR(*f0, 116.5, 1.0);
}

TEST(EstimateF0, MissingFundamental) {
  const auto x = harmonic_complex(110.0, {0.0, 0.3, 0.3, 0.3}, kN);
  const auto f0 = dsp::estimate_f0(spectrum_of(x));
  ASSERT_TRUE(f0);
  EXPECT_NEAR(*f0, 110.0, 2.0);
}

TEST(EstimateF0, SynthkitToneMatchesTruth) {
  synthkit::TonePreset preset;
  preset.f0 = 116.5;
  preset.harmonic_amps = std::vector<double>(10, 1.0);
  const auto tone = synthkit::synth_tone(preset, 0.5, kRate, 3);
  std::vector<double> x(tone.clip.samples().begin(), tone.clip.samples().end());
  const auto f0 = dsp::estimate_f0(spectrum_of(x, dsp::Window::Hann, 8192));
  ASSERT_TRUE(f0);
  EXPECT_NEAR(*f0, 116.5, 1.0);
}

TEST(EstimateF0, DarkLowToneNotSubharmonic) {
  std::vector<double> amps;
  for (int h = 1; h <= 16; ++h) amps.push_back(0.2 * std::pow(h, -2.0));
  const auto f0 = dsp::estimate_f0(spectrum_of(harmonic_complex(98.0, amps, kN)));
  ASSERT_TRUE(f0);
  EXPECT_NEAR(*f0, 98.0, 1.0);
}

TEST(EstimateF0, SilenceAndNoiseAreUnvoiced) {
  EXPECT_FALSE(dsp::estimate_f0(spectrum_of(zeros(kN))));
  EXPECT_FALSE(dsp::estimate_f0(spectrum_of(std::vector<double>(kN, 1e-5) )));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<double> noise(kN);
  for (double& v : noise) v = g(rng);
  EXPECT_FALSE(dsp::estimate_f0(spectrum_of(noise)));
}

TEST(EstimateF0, AmplitudeInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> fdist(60.0, 400.0);
  for (int rep = 0; rep < 10; ++rep) {
    const double f = fdist(rng);
    const auto x = harmonic_complex(f, {0.3, 0.2, 0.1, 0.05, 0.03}, kN);
    const auto base = dsp::estimate_f0(spectrum_of(x));
    ASSERT_TRUE(base);
    // Power-of-two gains are exact in floating point, so the result is too.
    for (double c : {0.125, 0.5, 2.0}) {
      auto y = x;
      for (double& v : y) v *= c;
      const auto scaled = dsp::estimate_f0(spectrum_of(y));
      ASSERT_TRUE(scaled);
      EXPECT_EQ(*scaled, *base);
    }
    for (double c : {0.3, 0.77, 1.9}) {
      auto y = x;
      for (double& v : y) v *= c;
      const auto scaled = dsp::estimate_f0(spectrum_of(y));
      ASSERT_TRUE(scaled);
      EXPECT_NEAR(*scaled, *base, 1e-9 * *base);
    }
  }
}

// ---- extract_partials ----

TEST(ExtractPartials, FiveHarmonicAmplitudes) {
  const std::vector<double> amps = {1.0, 0.5, 0.33, 0.25, 0.2};
  synthkit::TonePreset preset;
  preset.f0 = 220.0;
  preset.harmonic_amps = amps;
  const auto tone = synthkit::synth_tone(preset, 0.5, kRate, 9);
  std::vector<double> x(tone.clip.samples().begin(), tone.clip.samples().end());
  const auto s = spectrum_of(x, dsp::Window::Hann, 8192);
  const auto f0 = dsp::estimate_f0(s);
  ASSERT_TRUE(f0);
  const auto p = dsp::extract_partials(s, *f0);
  ASSERT_EQ(p.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    const double truth = tone.truth.partials[i].amplitude;
    EXPECT_NEAR(p.partials[i].amplitude, truth, 0.02 * truth) << "h=" << i + 1;
  }
}

TEST(ExtractPartials, PureSineHasOnePartial) {
  const auto s = spectrum_of(sine(440.0, 0.5, kN));
  const auto p = dsp::extract_partials(s, 440.0);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p.partials[0].harmonic, 1);
}

TEST(ExtractPartials, DetunedThirdPartial) {
  const double f0 = 200.0;
  auto x = sine(f0, 0.3, kN);
  const auto h2 = sine(2 * f0, 0.2, kN, kRate, 0.5);
  const auto h3 = sine(3 * f0 * 1.02, 0.15, kN, kRate, 1.1);
  for (std::size_t i = 0; i < kN; ++i) x[i] += h2[i] + h3[i];
  const auto s = spectrum_of(x);
  const auto p = dsp::extract_partials(s, f0, {20, 0.03});
  const auto it = std::find_if(p.partials.begin(), p.partials.end(),
                               [](const dsp::Partial& q) { return q.harmonic == 3; });
  ASSERT_NE(it, p.partials.end());
  EXPECT_NEAR(it->frequency, 3 * f0 * 1.02, s.bin_width());
}

TEST(ExtractPartials, NonPositiveF0IsDomainError) {
  const auto s = spectrum_of(sine(440.0, 0.5, kN));
  EXPECT_THROW(dsp::extract_partials(s, 0.0), DomainError);
  EXPECT_THROW(dsp::extract_partials(s, -5.0), DomainError);
}

TEST(ExtractPartials, HarmonicsAboveNyquistDropped) {
  const auto s = spectrum_of(sine(3000.0, 0.5, kN));
  const auto p = dsp::extract_partials(s, 3000.0, {20, 0.03});
  for (const auto& q : p.partials) EXPECT_LT(q.frequency, kRate / 2.0);
}

TEST(ExtractPartials, RandomTonesStayInsideToleranceBand) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> fdist(60.0, 400.0), adist(0.05, 1.0), ddist(-0.01, 0.01);
  for (int rep = 0; rep < 25; ++rep) {
    synthkit::TonePreset preset;
    preset.f0 = fdist(rng);
    const int n = 4 + static_cast<int>(rng() % 12);
    preset.harmonic_amps.clear();
    preset.detune.clear();
    for (int h = 0; h < n; ++h) {
      preset.harmonic_amps.push_back(adist(rng));
      preset.detune.push_back(ddist(rng));
    }
    preset.noise_mix = 0.05;
    const auto tone = synthkit::synth_tone(preset, 0.4, kRate, rng());
    std::vector<double> x(tone.clip.samples().begin(), tone.clip.samples().end());
    const auto s = spectrum_of(x, dsp::Window::Hann, 6000);
    const auto f0 = dsp::estimate_f0(s);
    if (!f0) continue;
    const dsp::PartialOptions opt;
    const auto p = dsp::extract_partials(s, *f0, opt);
    EXPECT_EQ(p.f0, *f0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& q = p.partials[i];
      EXPECT_GE(q.harmonic, 1);
      if (i > 0) {
        EXPECT_GT(q.harmonic, p.partials[i - 1].harmonic);
      }
      EXPECT_LE(std::abs(q.frequency - q.harmonic * p.f0), opt.tolerance * q.harmonic * p.f0 + 1e-9);
      EXPECT_GE(q.amplitude, 0.0);
    }
  }
}

// ---- amplitude_envelope ----

TEST(AmplitudeEnvelope, SineSettlesAtRms) {
  const auto env = dsp::amplitude_envelope(clip_of(sine(440.0, 0.5, kRate)), 256, 0.02);
  ASSERT_FALSE(env.values.empty());
  for (std::size_t k = 0; k < env.times.size(); ++k) {
    if (env.times[k] < 0.2 || env.times[k] > 0.8) continue;
    EXPECT_NEAR(env.values[k], 0.5 / std::sqrt(2.0), 0.02 * 0.5 / std::sqrt(2.0));
  }
}

TEST(AmplitudeEnvelope, SilenceIsZero) {
  const auto env = dsp::amplitude_envelope(clip_of(zeros(kRate)), 256, 0.02);
  for (double v : env.values) EXPECT_EQ(v, 0.0);
}

TEST(AmplitudeEnvelope, StepResponse) {
  const double smooth = 0.02;
  const auto x = concat({zeros(samples_of(0.5)), std::vector<double>(samples_of(0.5), 1.0)});
  const auto env = dsp::amplitude_envelope(clip_of(x), 256, smooth);
  double before = 0.0, after = 0.0;
  for (std::size_t k = 0; k < env.times.size(); ++k) {
    if (env.times[k] <= 0.49) before = env.values[k];
    if (env.times[k] <= 0.5 + 3 * smooth) after = env.values[k];
  }
  EXPECT_LT(before, 0.05);
  EXPECT_GT(after, 0.65);
}

TEST(AmplitudeEnvelope, InvariantsHold) {
  const auto x = harmonic_complex(150.0, {0.3, 0.1}, samples_of(1.3));
  const auto env = dsp::amplitude_envelope(clip_of(x), 256, 0.02);
  ASSERT_GT(env.times.size(), 2u);
  for (std::size_t k = 1; k < env.times.size(); ++k) {
    EXPECT_NEAR(env.times[k] - env.times[k - 1], 256.0 / kRate, 1e-12);
  }
  for (double v : env.values) EXPECT_GE(v, 0.0);
}

// ---- detect_onsets ----

std::vector<double> burst(double seconds, double amp) {
  auto x = sine(1000.0, amp, samples_of(seconds));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= std::exp(-static_cast<double>(i) / (0.02 * kRate));
  return x;
}

TEST(DetectOnsets, ClickTrackAt85Bpm) {
  const double ioi = 60.0 / 85.0;
  std::vector<double> x(samples_of(0.5 + 8 * ioi + 0.5), 0.0);
  std::vector<double> truth;
  for (int i = 0; i < 8; ++i) {
    const double t = 0.5 + i * ioi;
    truth.push_back(t);
    const auto b = burst(0.06, 0.5);
    const std::size_t at = samples_of(t);
    for (std::size_t j = 0; j < b.size(); ++j) x[at + j] += b[j];
  }
  const auto clip = clip_of(x);
  const auto onsets = dsp::detect_onsets(dsp::amplitude_envelope(clip, 256, 0.02), clip);
  ASSERT_EQ(onsets.onsets.size(), 8u);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(onsets.onsets[i], truth[i], 0.015);
}

TEST(DetectOnsets, SilenceHasNone) {
  const auto clip = clip_of(zeros(kRate));
  EXPECT_TRUE(dsp::detect_onsets(dsp::amplitude_envelope(clip, 256, 0.02), clip).onsets.empty());
}

TEST(DetectOnsets, MinimumGapMergesCloseNotes) {
  const auto first = sine(440.0, 0.1, samples_of(0.04));
  const auto second = sine(440.0, 0.8, samples_of(0.5), kRate, 0.3);
  const auto x = concat({zeros(samples_of(0.5)), first, second, zeros(samples_of(0.5))});
  const auto clip = clip_of(x);
  dsp::OnsetOptions opt;
  opt.min_gap = 0.080;
  const auto onsets = dsp::detect_onsets(dsp::amplitude_envelope(clip, 256, 0.02), clip, opt);
  EXPECT_EQ(onsets.onsets.size(), 1u);
}

TEST(DetectOnsets, OnsetsRespectGapAndOrder) {
  const auto clip = synthkit::synth_performance(synthkit::default_presets()[0], 16).clip;
  dsp::OnsetOptions opt;
  const auto onsets = dsp::detect_onsets(dsp::amplitude_envelope(clip, 256, 0.02), clip, opt);
  for (std::size_t i = 1; i < onsets.onsets.size(); ++i) {
    EXPECT_GE(onsets.onsets[i] - onsets.onsets[i - 1], opt.min_gap);
  }
}

TEST(DetectOnsets, CountMatchesSynthkitNotes) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> bpm(60.0, 150.0);
  for (int rep = 0; rep < 12; ++rep) {
    synthkit::PerformancePreset preset;
    preset.bpm = bpm(rng);
    const double ioi = 60.0 / preset.bpm;
    // Sounding fraction leaving a gap of at least 150 ms.
    preset.legato = std::min(0.9, (ioi - 0.15) / ioi);
    preset.level = 0.05 + 0.1 * static_cast<double>(rep % 3);
    preset.tone.attack = 0.01 + 0.04 * static_cast<double>(rep % 4) / 3.0;
    preset.tone.harmonic_amps = {1.0, 0.5, 0.3, 0.2};
    preset.seed = rng();
    const std::size_t n = 6 + static_cast<std::size_t>(rep % 6);
    const auto perf = synthkit::synth_performance(preset, n);
    const auto onsets =
        dsp::detect_onsets(dsp::amplitude_envelope(perf.clip, 256, 0.02), perf.clip);
    EXPECT_EQ(onsets.onsets.size(), n) << "bpm " << preset.bpm << " attack " << preset.tone.attack;
  }
}

}  // namespace
}  // namespace affex
