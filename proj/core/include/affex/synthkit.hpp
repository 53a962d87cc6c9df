#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "affex/audio_io.hpp"
#include "affex/labels.hpp"

namespace affex::synthkit {

// mt19937_64 with explicit conversions so streams match on every platform:
// uniform() = (x >> 11) * 2^-53, normal() = Box-Muller without caching.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double log_uniform(double lo, double hi);
  double normal();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer, used to derive independent per-clip seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

struct TonePreset {
  double f0 = 98.0;
  std::vector<double> harmonic_amps = {1.0};
  std::vector<double> detune;  // fractional offset per harmonic; missing entries are 0
  double noise_mix = 0.0;      // noise share of total energy
  double attack = 0.015;       // linear rise, seconds
  double release = 0.040;      // exponential fall to -60 dB, seconds

  void validate() const;  // ConfigError
};

struct TruthPartial {
  int harmonic = 0;
  double frequency = 0.0;
  double amplitude = 0.0;
};

struct ToneTruth {
  std::vector<TruthPartial> partials;
  double harmonic_energy = 0.0;  // mean power of the harmonic part at full envelope
  double noise_energy = 0.0;
};

struct ToneResult {
  audio::AudioClip clip;
  ToneTruth truth;
};

// Steady tone with attack at the start and release ending at `duration`.
// Random phases and noise come from `seed`. Scaled down if the peak would
// exceed 0.98; the truth table reports the amplitudes actually written.
// DomainError if the highest harmonic reaches Nyquist.
ToneResult synth_tone(const TonePreset& preset, double duration, int sample_rate,
                      std::uint64_t seed = 1);

struct Jitter {
  double timing = 0.0;  // onset offset, fraction of the inter-onset interval (+-)
  double tilt = 0.0;    // per-note spectral slope offset (+-)
  double noise = 0.0;   // relative noise-mix variation (+-)
  double detune = 0.0;  // per-note stretch, fractional offset per harmonic index (0..)
};

struct PerformancePreset {
  Emotion label = Emotion::Neutral;
  double bpm = 85.0;
  double level = 0.1;   // note RMS at full envelope
  double legato = 0.8;  // sounding fraction of the inter-onset interval
  TonePreset tone;
  Jitter jitter;
  std::uint64_t seed = 1;

  double tilt = 0.0;       // extra slope: amplitude of harmonic h times h^-tilt
  double odd_even = 0.0;   // target odd/even energy ratio per note; 0 keeps the spectrum
  double accent = 0.0;     // attack spike height, as a multiple of `level`
  double accent_tau = 0.06;

  // Emotion-independent per-note spread. Note peak level is level + a*u and
  // note odd/even ratio is odd_even + b*u' with u, u' ~ U[0, 1].
  double level_spread = 0.0;
  double odd_even_spread = 0.0;

  void validate() const;  // ConfigError
};

struct NoteTruth {
  double onset = 0.0;
  double f0 = 0.0;
  double level = 0.0;
  double odd_even = 0.0;
  double tilt = 0.0;
  double noise_mix = 0.0;
};

struct PerformanceTruth {
  Emotion label = Emotion::Neutral;
  double bpm = 0.0;
  double gain = 1.0;  // clip-wide scaling applied to stay inside [-1, 1]
  std::vector<NoteTruth> notes;
};

struct PerformanceResult {
  audio::AudioClip clip;
  PerformanceTruth truth;
};

inline constexpr double kLeadingSilence = 0.5;

// Semitone offsets of the fixed melodic fragment, cycled for long pieces.
std::span<const int> melody();

PerformanceResult synth_performance(const PerformancePreset& preset, std::size_t n_notes,
                                    int sample_rate = 44100);

// The seven archetypes, canonical order.
std::vector<PerformancePreset> default_presets();

struct CorpusOptions {
  std::size_t n_performers = 10;
  std::size_t n_notes = 16;
  int sample_rate = 44100;
  std::uint64_t master_seed = 20140901;
  // Per-performer systematic offsets.
  double performer_level = 0.3;  // log-uniform factor in [1/(1+x), 1+x]
  double performer_bpm = 0.05;   // factor in [1-x, 1+x]
  double performer_tilt = 0.2;   // additive slope in [-x, x]
  // Planted emotion-independent spreads, drawn log-uniformly per clip.
  double level_spread_lo = 0.02;
  double level_spread_hi = 0.08;
  double odd_even_spread_lo = 0.5;
  double odd_even_spread_hi = 2.0;
  std::size_t jobs = 1;
};

struct ClipTruth {
  std::string file;  // relative to the corpus directory
  std::string performer_id;
  std::uint64_t seed = 0;
  double level_spread = 0.0;
  double odd_even_spread = 0.0;
  PerformanceTruth performance;
};

struct CorpusTruth {
  std::uint64_t master_seed = 0;
  int sample_rate = 0;
  std::vector<std::string> planted_null_features;
  std::vector<ClipTruth> clips;  // performer, then canonical emotion order
};

struct CorpusResult {
  std::vector<audio::RecordingMeta> manifest;
  CorpusTruth truth;
};

// Writes audio/<performer>_<emotion>.wav (24-bit), manifest.csv and
// truth.json under `out_dir`. ConfigError unless the presets name each
// emotion exactly once.
CorpusResult synth_corpus(std::span<const PerformancePreset> presets, const CorpusOptions& options,
                          const std::filesystem::path& out_dir);

// Same draws without touching the disk.
PerformanceResult synth_corpus_clip(std::span<const PerformancePreset> presets,
                                    const CorpusOptions& options, std::size_t performer,
                                    Emotion emotion, ClipTruth* truth = nullptr);

std::string truth_to_json(const CorpusTruth& truth);

}  // namespace affex::synthkit
