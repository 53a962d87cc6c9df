#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "affex/audio_io.hpp"

namespace affex::dsp {

enum class Window { Rectangular, Hann, Hamming, Blackman };

// One-sided magnitude spectrum of a windowed frame. Magnitudes are scaled by
// 2 / sum(window), so a sinusoid sitting on a bin reports its amplitude.
struct Spectrum {
  std::vector<double> bin_freqs;
  std::vector<double> magnitudes;
  std::size_t frame_index = 0;
  int sample_rate = 0;
  std::size_t frame_size = 0;
  Window window = Window::Hann;
  double window_sum = 0.0;
  // Equivalent noise bandwidth of the window, in bins.
  double enbw = 1.0;

  double bin_width() const {
    return frame_size ? static_cast<double>(sample_rate) / static_cast<double>(frame_size) : 0.0;
  }
};

// Sum of magnitude^2 corrected for the window's noise bandwidth. A sinusoid
// of amplitude A contributes A^2 and white noise of variance s^2 contributes
// 2 s^2, so partial amplitudes squared and this total share one scale.
double spectral_power(const Spectrum& spectrum);

// Energy of the windowed frame, sum((w * x)^2), recovered from the one-sided
// spectrum by inverting the magnitude scaling (Parseval).
double windowed_energy(const Spectrum& spectrum);

struct Partial {
  int harmonic = 0;
  double frequency = 0.0;
  double amplitude = 0.0;
};

struct PartialSet {
  double f0 = 0.0;
  std::vector<Partial> partials;

  bool empty() const { return partials.empty(); }
  std::size_t size() const { return partials.size(); }
};

struct Envelope {
  std::vector<double> times;
  std::vector<double> values;
  double hop_seconds = 0.0;
};

struct OnsetList {
  std::vector<double> onsets;
};

// Frame k covers samples [k*hop, k*hop + frame_size); the tail frame is
// zero-padded. Count is ceil((n - frame_size) / hop) + 1.
std::vector<std::vector<double>> frame_signal(std::span<const double> samples,
                                              std::size_t frame_size, std::size_t hop);
std::vector<std::vector<double>> frame_signal(const audio::AudioClip& clip,
                                              std::size_t frame_size, std::size_t hop);

std::vector<double> make_window(Window window, std::size_t size);

// |DTFT| of the window at `offset` bins from a sinusoid, relative to its
// value on the bin. Used to undo scalloping of off-bin peaks.
double window_response(Window window, std::size_t size, double offset);

// Frame length must be a power of two (ConfigError otherwise).
Spectrum magnitude_spectrum(std::span<const double> frame, Window window, int sample_rate,
                            std::size_t frame_index = 0);

struct F0Options {
  double min_hz = 40.0;
  double max_hz = 500.0;
  int hps_order = 5;
  // Frames whose mean power is below this level, in dB re `reference`, are
  // unvoiced. The extraction chain sets `reference` to the clip peak.
  double silence_db = -60.0;
  double reference = 1.0;
  // Fraction of frame power that must sit on the harmonic comb.
  double min_salience = 0.25;
  // Magnitudes are floored at this fraction of the frame maximum before the
  // product is formed, so a missing harmonic attenuates rather than zeroes.
  double hps_floor = 0.05;
  // A subharmonic candidate replaces the winner when its product is at least
  // this fraction of the winner's and it has its own spectral peak.
  double octave_ratio = 0.2;
};

// Harmonic product spectrum over a fractional-bin candidate grid, taken on a
// peak-sharpened copy of the spectrum, then refined from the interpolated
// harmonic peaks. nullopt = unvoiced.
std::optional<double> estimate_f0(const Spectrum& spectrum, const F0Options& options = {});

// Fraction of spectral power within one bin of the harmonics of f0.
double harmonic_salience(const Spectrum& spectrum, double f0, int max_harmonics);

struct PartialOptions {
  int max_harmonics = 20;
  double tolerance = 0.03;
  // A peak must exceed this multiple of the median magnitude...
  double noise_floor_ratio = 2.0;
  // ...and this fraction of the frame's largest magnitude.
  double relative_floor = 1e-4;
};

// Largest local peak inside [h f0 (1 - tol), h f0 (1 + tol)] for each h,
// refined by parabolic interpolation on log magnitude.
PartialSet extract_partials(const Spectrum& spectrum, double f0,
                            const PartialOptions& options = {});

// Per-hop RMS over a 2*hop window centred on k*hop, then a first-order
// low-pass with time constant `smooth` seconds (0 disables smoothing).
Envelope amplitude_envelope(const audio::AudioClip& clip, std::size_t hop, double smooth = 0.020);

struct OnsetOptions {
  double threshold_k = 3.0;      // median + k * MAD
  double context = 1.0;          // seconds of detection-function context
  double min_gap = 0.080;        // seconds
  double min_rise = 0.1;         // natural-log units per hop
  double floor_relative = 1e-4;  // log floor, relative to clip peak
};

OnsetList detect_onsets(const Envelope& env, const audio::AudioClip& clip,
                        const OnsetOptions& options = {});

}  // namespace affex::dsp
