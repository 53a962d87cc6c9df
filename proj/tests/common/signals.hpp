#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <utility>
#include <vector>

#include "affex/audio_io.hpp"
#include "affex/dsp.hpp"

namespace affex::testing {

inline constexpr int kRate = 44100;

inline std::vector<double> sine(double hz, double amp, std::size_t n, int sr = kRate,
                                double phase = 0.0) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr + phase);
  }
  return out;
}

// Sum of harmonics h = 1..amps.size() of f0; zero entries are skipped.
inline std::vector<double> harmonic_complex(double f0, const std::vector<double>& amps,
                                            std::size_t n, int sr = kRate) {
  std::vector<double> out(n, 0.0);
  for (std::size_t h = 1; h <= amps.size(); ++h) {
    if (amps[h - 1] == 0.0) continue;
    const auto part = sine(f0 * static_cast<double>(h), amps[h - 1], n, sr, 0.37 * h);
    for (std::size_t i = 0; i < n; ++i) out[i] += part[i];
  }
  return out;
}

inline std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

inline std::vector<double> concat(std::initializer_list<std::vector<double>> parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline std::size_t samples_of(double seconds, int sr = kRate) {
  return static_cast<std::size_t>(std::lround(seconds * sr));
}

inline audio::AudioClip clip_of(std::vector<double> samples, int sr = kRate) {
  return audio::AudioClip(std::move(samples), sr);
}

// Partial set from (harmonic, frequency, amplitude) triples.
inline dsp::PartialSet partial_set(double f0, std::vector<dsp::Partial> partials) {
  dsp::PartialSet out;
  out.f0 = f0;
  out.partials = std::move(partials);
  return out;
}

// Exact harmonic series with the given amplitudes, h = 1..n.
inline dsp::PartialSet harmonic_set(double f0, const std::vector<double>& amps) {
  dsp::PartialSet out;
  out.f0 = f0;
  for (std::size_t h = 1; h <= amps.size(); ++h) {
    out.partials.push_back({static_cast<int>(h), f0 * static_cast<double>(h), amps[h - 1]});
  }
  return out;
}

}  // namespace affex::testing
