#include "affex/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "affex/dataset.hpp"
#include "affex/error.hpp"

namespace affex::features {

std::vector<std::string> canonical_feature_names(bool include_t2) {
  std::vector<std::string> names(std::begin(kGlobalNames), std::end(kGlobalNames));
  for (std::string_view track : kTrackNames) {
    if (track == "T2" && !include_t2) continue;
    names.push_back(std::string(track) + "_M");
    names.push_back(std::string(track) + "_IQR");
  }
  return names;
}

FeatureVector::FeatureVector(std::vector<std::string> names, std::vector<double> values)
    : names_(std::move(names)), values_(std::move(values)) {
  if (names_.size() != values_.size()) throw SchemaError("feature names and values differ in length");
}

std::optional<double> FeatureVector::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return values_[i];
  }
  return std::nullopt;
}

double FeatureVector::at(std::string_view name) const {
  if (auto v = find(name)) return *v;
  throw SchemaError("no feature named " + std::string(name));
}

double bpm(const dsp::OnsetList& onsets) {
  const auto& t = onsets.onsets;
  if (t.size() < 3) {
    throw InsufficientOnsetsError("BPM needs at least 3 onsets, found " + std::to_string(t.size()));
  }
  std::vector<double> ioi(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) ioi[i - 1] = t[i] - t[i - 1];
  std::sort(ioi.begin(), ioi.end());
  const double median = dataset::quantile_sorted(ioi, 0.5);
  return std::clamp(60.0 / median, 30.0, 300.0);
}

double rms_global(const audio::AudioClip& clip, const audio::SilenceOptions& silence) {
  const auto range = audio::active_range(clip, silence);
  const auto s = clip.samples();
  double sum = 0.0;
  for (std::size_t i = range.first; i <= range.last; ++i) sum += s[i] * s[i];
  return std::sqrt(sum / static_cast<double>(range.last - range.first + 1));
}

double low_energy_from_frame_rms(std::span<const double> frame_rms) {
  if (frame_rms.empty()) return 0.0;
  const double mean =
      std::accumulate(frame_rms.begin(), frame_rms.end(), 0.0) / static_cast<double>(frame_rms.size());
  const double tie = 1e-9 * std::abs(mean);
  const auto below = std::count_if(frame_rms.begin(), frame_rms.end(),
                                   [&](double r) { return r < mean - tie; });
  return static_cast<double>(below) / static_cast<double>(frame_rms.size());
}

double low_energy(const audio::AudioClip& clip, double frame_seconds,
                  const audio::SilenceOptions& silence) {
  const auto range = audio::active_range(clip, silence);
  const auto frame = static_cast<std::size_t>(std::lround(frame_seconds * clip.sample_rate()));
  const std::size_t length = range.last - range.first + 1;
  if (frame == 0 || length < frame) {
    throw InputTooShortError("LOW needs at least one full " + std::to_string(frame_seconds) +
                             " s frame of active signal");
  }
  const auto s = clip.samples();
  std::vector<double> rms;
  for (std::size_t start = range.first; start + frame <= range.last + 1; start += frame) {
    double sum = 0.0;
    for (std::size_t i = start; i < start + frame; ++i) sum += s[i] * s[i];
    rms.push_back(std::sqrt(sum / static_cast<double>(frame)));
  }
  return low_energy_from_frame_rms(rms);
}

FeatureTrack attack_leaps(const dsp::Envelope& env, const dsp::OnsetList& onsets) {
  FeatureTrack track{"ATK", {}, {}};
  const auto& v = env.values;
  if (v.empty() || !(env.hop_seconds > 0.0)) return track;
  const std::size_t n = v.size();
  for (std::size_t note = 0; note < onsets.onsets.size(); ++note) {
    const auto at = static_cast<std::size_t>(
        std::clamp(std::lround(onsets.onsets[note] / env.hop_seconds), 0L, static_cast<long>(n - 1)));
    std::size_t start = at;
    while (start > 0 && v[start - 1] <= v[start]) --start;
    std::size_t end = at;
    while (end + 1 < n && v[end + 1] >= v[end]) ++end;
    track.push(std::max(0.0, v[end] - v[start]), note);
  }
  return track;
}

std::optional<HarmonicNoise> harmonic_noise_split(const dsp::Spectrum& spectrum,
                                                  const dsp::PartialSet& partials) {
  if (partials.empty()) return std::nullopt;
  const double total = dsp::spectral_power(spectrum);
  if (!(total > 0.0)) return std::nullopt;
  HarmonicNoise out;
  for (const auto& p : partials.partials) out.hae += p.amplitude * p.amplitude;
  out.noe = std::max(total - out.hae, 0.0);
  out.nsn = std::clamp(out.noe / total, 0.0, 1.0);
  return out;
}

std::optional<double> harmonic_spectral_deviation(const dsp::PartialSet& partials) {
  const auto& p = partials.partials;
  const std::size_t h = p.size();
  if (h < 3) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    double envelope;
    if (i == 0) {
      envelope = 0.5 * (p[0].amplitude + p[1].amplitude);
    } else if (i + 1 == h) {
      envelope = 0.5 * (p[i - 1].amplitude + p[i].amplitude);
    } else {
      envelope = (p[i - 1].amplitude + p[i].amplitude + p[i + 1].amplitude) / 3.0;
    }
    sum += std::abs(p[i].amplitude - envelope);
  }
  return sum / static_cast<double>(h);
}

std::optional<double> brightness(const dsp::Spectrum& spectrum, double cutoff_hz) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < spectrum.sample_rate / 2.0)) {
    throw ConfigError("brightness cutoff must lie in (0, sample_rate / 2)");
  }
  double total = 0.0, high = 0.0;
  for (std::size_t k = 0; k < spectrum.magnitudes.size(); ++k) {
    const double e = spectrum.magnitudes[k] * spectrum.magnitudes[k];
    total += e;
    if (spectrum.bin_freqs[k] > cutoff_hz) high += e;
  }
  if (!(total > 0.0)) return std::nullopt;
  return high / total;
}

std::optional<Tristimulus> tristimulus(const dsp::PartialSet& partials) {
  double e1 = 0.0, e234 = 0.0, rest = 0.0;
  for (const auto& p : partials.partials) {
    const double e = p.amplitude * p.amplitude;
    if (p.harmonic == 1) {
      e1 += e;
    } else if (p.harmonic <= 4) {
      e234 += e;
    } else {
      rest += e;
    }
  }
  const double total = e1 + e234 + rest;
  if (!(total > 0.0)) return std::nullopt;
  return Tristimulus{e1 / total, e234 / total, rest / total};
}

std::optional<double> inharmonicity(const dsp::PartialSet& partials) {
  if (partials.size() < 2 || !(partials.f0 > 0.0)) return std::nullopt;
  double num = 0.0, den = 0.0;
  for (const auto& p : partials.partials) {
    const double e = p.amplitude * p.amplitude;
    num += e * std::abs(p.frequency - p.harmonic * partials.f0);
    den += e;
  }
  if (!(den > 0.0)) return std::nullopt;
  return 2.0 / partials.f0 * num / den;
}

double pair_dissonance(double f1, double f2) {
  constexpr double b1 = 3.5, b2 = 5.75;
  const double s = 0.24 / (0.0207 * std::min(f1, f2) + 18.96);
  const double df = std::abs(f1 - f2);
  return std::exp(-b1 * s * df) - std::exp(-b2 * s * df);
}

double roughness(const dsp::PartialSet& partials, bool normalized) {
  const auto& p = partials.partials;
  double sum = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    energy += p[i].amplitude * p[i].amplitude;
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      sum += p[i].amplitude * p[j].amplitude * pair_dissonance(p[i].frequency, p[j].frequency);
    }
  }
  if (normalized) return energy > 0.0 ? sum / energy : 0.0;
  return sum;
}

std::optional<double> odd_even_ratio(const dsp::PartialSet& partials, double cap) {
  if (partials.size() < 2) return std::nullopt;
  double odd = 0.0, even = 0.0;
  for (const auto& p : partials.partials) {
    (p.harmonic % 2 ? odd : even) += p.amplitude * p.amplitude;
  }
  if (!(even > 0.0)) return cap;
  return std::clamp(odd / even, 1.0 / cap, cap);
}

void ExtractionConfig::validate() const {
  auto power_of_two = [](std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; };
  if (!power_of_two(frame_size)) throw ConfigError("frame_size must be a power of two");
  if (hop == 0 || hop > frame_size) throw ConfigError("hop must lie in [1, frame_size]");
  if (partials.max_harmonics < 1) throw ConfigError("max_harmonics must be >= 1");
  if (!(partials.tolerance > 0.0 && partials.tolerance < 0.5)) {
    throw ConfigError("partial tolerance must lie in (0, 0.5)");
  }
  if (!(f0.min_hz > 20.0 && f0.max_hz > f0.min_hz)) {
    throw ConfigError("f0 search range must satisfy 20 < min < max");
  }
  if (f0.hps_order < 1) throw ConfigError("hps_order must be >= 1");
  if (envelope_hop == 0) throw ConfigError("envelope_hop must be positive");
  if (envelope_smooth < 0.0) throw ConfigError("envelope_smooth must be >= 0");
  if (!(silence_pad >= 0.0)) throw ConfigError("silence_pad must be >= 0");
  if (!(low_frame > 0.0)) throw ConfigError("low_frame must be positive");
  if (!(brightness_cutoff > 0.0)) throw ConfigError("brightness_cutoff must be positive");
  if (!(oer_cap > 1.0)) throw ConfigError("oer_cap must exceed 1");
  if (!(onsets.min_gap >= 0.0 && onsets.context > 0.0)) throw ConfigError("invalid onset options");
}

TrackSet extract_tracks(const audio::AudioClip& clip, const ExtractionConfig& config) {
  config.validate();
  if (!(config.f0.max_hz < clip.sample_rate() / 4.0)) {
    throw ConfigError("f0 search range must stay below sample_rate / 4");
  }

  TrackSet out;
  for (std::string_view name : kTrackNames) {
    out.tracks.emplace(std::string(name), FeatureTrack{std::string(name), {}, {}});
  }
  auto& atk = out.tracks.at("ATK");
  auto& hae = out.tracks.at("HAE");
  auto& noe = out.tracks.at("NOE");
  auto& nsn = out.tracks.at("NSN");
  auto& hrd = out.tracks.at("HRD");
  auto& ebf = out.tracks.at("EBF");
  auto& t1 = out.tracks.at("T1");
  auto& t2 = out.tracks.at("T2");
  auto& t3 = out.tracks.at("T3");
  auto& inh = out.tracks.at("INH");
  auto& roh = out.tracks.at("ROH");
  auto& oer = out.tracks.at("OER");

  dsp::F0Options f0_options = config.f0;
  if (config.silence.relative_to_peak) {
    double peak = 0.0;
    for (double v : clip.samples()) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) f0_options.reference = peak;
  }

  const auto frames = dsp::frame_signal(clip, config.frame_size, config.hop);
  out.frame_count = frames.size();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto spectrum = dsp::magnitude_spectrum(frames[k], config.window, clip.sample_rate(), k);
    const auto f0 = dsp::estimate_f0(spectrum, f0_options);
    if (!f0) continue;
    const auto partials = dsp::extract_partials(spectrum, *f0, config.partials);
    if (partials.empty()) continue;
    ++out.voiced_frames;

    if (auto split = harmonic_noise_split(spectrum, partials)) {
      hae.push(split->hae, k);
      noe.push(split->noe, k);
      nsn.push(split->nsn, k);
    }
    if (auto v = harmonic_spectral_deviation(partials)) hrd.push(*v, k);
    if (auto v = brightness(spectrum, config.brightness_cutoff)) ebf.push(*v, k);
    if (auto t = tristimulus(partials)) {
      t1.push(t->t1, k);
      t2.push(t->t2, k);
      t3.push(t->t3, k);
    }
    if (auto v = inharmonicity(partials)) inh.push(*v, k);
    roh.push(roughness(partials, config.roughness_normalized), k);
    if (auto v = odd_even_ratio(partials, config.oer_cap)) oer.push(*v, k);
  }

  const auto env = dsp::amplitude_envelope(clip, config.envelope_hop, config.envelope_smooth);
  out.onsets = dsp::detect_onsets(env, clip, config.onsets);
  atk = attack_leaps(env, out.onsets);
  return out;
}

FeatureVector extract_features(const audio::AudioClip& source, const audio::RecordingMeta& meta,
                               const ExtractionConfig& config) {
  const audio::AudioClip clip =
      config.normalize_silence ? audio::normalize_silence(source, config.silence_pad, config.silence)
                               : source;
  const TrackSet tracks = extract_tracks(clip, config);

  const double tempo = bpm(tracks.onsets);
  std::vector<double> values = {tempo, tempo, rms_global(clip, config.silence),
                                low_energy(clip, config.low_frame, config.silence)};
  for (std::string_view name : kTrackNames) {
    if (name == "T2" && !config.include_t2) continue;
    const auto& track = tracks.tracks.find(name)->second;
    if (track.values.empty()) {
      throw FeatureUndefinedError(std::string(name), std::string(name) + " track is empty for " +
                                                         meta.path.generic_string());
    }
    const auto summary = dataset::summarize_track(track);
    values.push_back(summary.median);
    values.push_back(summary.iqr);
  }
  return FeatureVector(canonical_feature_names(config.include_t2), std::move(values));
}

}  // namespace affex::features
