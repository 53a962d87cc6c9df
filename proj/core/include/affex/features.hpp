#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affex/audio_io.hpp"
#include "affex/dsp.hpp"

namespace affex::features {

// Names of the global scalars and of the time-varying tracks, in canonical
// order. T2 is tracked but only enters the vector in 28-feature mode.
inline constexpr std::string_view kGlobalNames[] = {"BPM", "BPM_nn", "RMS", "LOW"};
inline constexpr std::string_view kTrackNames[] = {"ATK", "HAE", "NOE", "NSN", "HRD", "EBF",
                                                   "T1",  "T2",  "T3",  "INH", "ROH", "OER"};

// 26 names by default: BPM, BPM_nn, RMS, LOW, then <track>_M, <track>_IQR.
std::vector<std::string> canonical_feature_names(bool include_t2 = false);

struct FeatureTrack {
  std::string feature_id;
  std::vector<double> values;
  std::vector<std::size_t> frame_indices;  // frame, or note ordinal for ATK

  void push(double value, std::size_t index) {
    values.push_back(value);
    frame_indices.push_back(index);
  }
};

class FeatureVector {
 public:
  FeatureVector() = default;
  FeatureVector(std::vector<std::string> names, std::vector<double> values);

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  // Throws SchemaError for an unknown name.
  double at(std::string_view name) const;
  std::optional<double> find(std::string_view name) const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
};

// ---- global scalars -------------------------------------------------------

// 60 / median inter-onset interval, clamped to [30, 300].
double bpm(const dsp::OnsetList& onsets);

double rms_global(const audio::AudioClip& clip, const audio::SilenceOptions& silence = {});

// Fraction of non-overlapping frames whose RMS is strictly below the mean
// frame RMS. Differences within 1e-9 of the mean count as ties (not below).
double low_energy(const audio::AudioClip& clip, double frame_seconds = 0.05,
                  const audio::SilenceOptions& silence = {});
double low_energy_from_frame_rms(std::span<const double> frame_rms);

// ---- per-note / per-frame descriptors ---------------------------------------

FeatureTrack attack_leaps(const dsp::Envelope& env, const dsp::OnsetList& onsets);

struct HarmonicNoise {
  double hae = 0.0;
  double noe = 0.0;
  double nsn = 0.0;
};
std::optional<HarmonicNoise> harmonic_noise_split(const dsp::Spectrum& spectrum,
                                                  const dsp::PartialSet& partials);

std::optional<double> harmonic_spectral_deviation(const dsp::PartialSet& partials);

std::optional<double> brightness(const dsp::Spectrum& spectrum, double cutoff_hz);

struct Tristimulus {
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
};
std::optional<Tristimulus> tristimulus(const dsp::PartialSet& partials);

std::optional<double> inharmonicity(const dsp::PartialSet& partials);

// Plomp-Levelt dissonance of two unit partials.
double pair_dissonance(double f1, double f2);
double roughness(const dsp::PartialSet& partials, bool normalized = false);

std::optional<double> odd_even_ratio(const dsp::PartialSet& partials, double cap = 100.0);

// ---- full chain -------------------------------------------------------------

struct ExtractionConfig {
  std::size_t frame_size = 2048;
  std::size_t hop = 512;
  dsp::Window window = dsp::Window::Hann;
  dsp::F0Options f0;
  dsp::PartialOptions partials;

  std::size_t envelope_hop = 256;
  double envelope_smooth = 0.020;
  dsp::OnsetOptions onsets;

  bool normalize_silence = true;
  double silence_pad = 0.5;
  audio::SilenceOptions silence;

  double low_frame = 0.050;
  double brightness_cutoff = 1000.0;
  double oer_cap = 100.0;
  bool roughness_normalized = false;
  bool include_t2 = false;

  void validate() const;  // ConfigError on anything out of range
};

struct TrackSet {
  std::map<std::string, FeatureTrack, std::less<>> tracks;  // keyed by kTrackNames
  dsp::OnsetList onsets;
  std::size_t frame_count = 0;
  std::size_t voiced_frames = 0;
};

// Runs framing, spectra, f0, partials, envelope and onsets and fills every
// track. Does not require any minimum number of onsets.
TrackSet extract_tracks(const audio::AudioClip& clip, const ExtractionConfig& config);

// The full per-recording chain: 26 (or 28) named scalars. BPM_nn carries the
// raw BPM here; the two diverge only at normalization.
FeatureVector extract_features(const audio::AudioClip& clip, const audio::RecordingMeta& meta,
                               const ExtractionConfig& config);

}  // namespace affex::features
