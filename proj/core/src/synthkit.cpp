#include "affex/synthkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "affex/error.hpp"
#include "affex/fsutil.hpp"

namespace affex::synthkit {

namespace fs = std::filesystem;

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::log_uniform(double lo, double hi) {
  return std::exp(uniform(std::log(lo), std::log(hi)));
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void TonePreset::validate() const {
  if (!(f0 > 0.0)) throw ConfigError("tone f0 must be positive");
  if (harmonic_amps.empty()) throw ConfigError("tone needs at least one harmonic");
  bool any = false;
  for (double a : harmonic_amps) {
    if (!(a >= 0.0)) throw ConfigError("harmonic amplitudes must be non-negative");
    any = any || a > 0.0;
  }
  if (!any) throw ConfigError("tone needs at least one positive harmonic amplitude");
  if (!(noise_mix >= 0.0 && noise_mix < 1.0)) throw ConfigError("noise_mix must lie in [0, 1)");
  if (!(attack > 0.0)) throw ConfigError("attack must be positive");
  if (!(release > 0.0)) throw ConfigError("release must be positive");
}

void PerformancePreset::validate() const {
  tone.validate();
  if (!(bpm >= 30.0 && bpm <= 300.0)) throw ConfigError("bpm must lie in [30, 300]");
  if (!(level > 0.0 && level <= 1.0)) throw ConfigError("level must lie in (0, 1]");
  if (!(legato > 0.0 && legato <= 1.0)) throw ConfigError("legato must lie in (0, 1]");
  if (!(odd_even >= 0.0)) throw ConfigError("odd_even must be >= 0");
  if (!(accent >= 0.0 && accent_tau > 0.0)) throw ConfigError("accent settings out of range");
  if (!(level_spread >= 0.0 && odd_even_spread >= 0.0)) throw ConfigError("spreads must be >= 0");
  if (jitter.timing < 0.0 || jitter.timing >= 0.5) throw ConfigError("timing jitter must lie in [0, 0.5)");
  if (jitter.tilt < 0.0 || jitter.noise < 0.0 || jitter.detune < 0.0) {
    throw ConfigError("jitter amounts must be >= 0");
  }
}

namespace {

constexpr double kLn1000 = 6.907755278982137;
constexpr double kMaxPeak = 0.98;

struct NoteSpec {
  double f0 = 0.0;
  std::vector<double> amps;
  std::vector<double> detune;
  double noise_rms = 0.0;
  double amplitude = 1.0;
  double accent = 0.0;
  double accent_tau = 0.06;
  double attack = 0.015;
  double hold = 0.0;  // release starts here
  double release = 0.04;
};

double partial_frequency(const NoteSpec& n, std::size_t h) {
  const double d = h < n.detune.size() ? n.detune[h] : 0.0;
  return static_cast<double>(h + 1) * n.f0 * (1.0 + d);
}

void render(std::vector<double>& out, std::size_t start, const NoteSpec& n, int sample_rate,
            Rng& rng) {
  const double sr = sample_rate;
  std::vector<std::complex<double>> z;
  std::vector<std::complex<double>> step;
  std::vector<double> amps;
  for (std::size_t h = 0; h < n.amps.size(); ++h) {
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    if (n.amps[h] <= 0.0) continue;
    z.push_back(std::polar(1.0, phase));
    step.push_back(std::polar(1.0, 2.0 * std::numbers::pi * partial_frequency(n, h) / sr));
    amps.push_back(n.amps[h]);
  }
  const double noise_half_width = std::sqrt(3.0) * n.noise_rms;
  const auto length = static_cast<std::size_t>(std::ceil((n.hold + n.release) * sr));
  const std::size_t end = std::min(out.size(), start + length);
  for (std::size_t i = start, k = 0; i < end; ++i, ++k) {
    const double t = static_cast<double>(k) / sr;
    const double shape = std::min(t / n.attack, 1.0);
    const double spike = n.accent > 0.0 ? shape * std::exp(-std::max(0.0, t - n.attack) / n.accent_tau) : 0.0;
    const double rel = t < n.hold ? 1.0 : std::exp(-(t - n.hold) * kLn1000 / n.release);
    const double env = (n.amplitude * shape + n.accent * spike) * rel;

    double s = 0.0;
    for (std::size_t h = 0; h < z.size(); ++h) {
      s += amps[h] * z[h].imag();
      z[h] *= step[h];
    }
    if ((k & 4095) == 4095) {
      for (auto& v : z) v /= std::abs(v);
    }
    if (noise_half_width > 0.0) s += noise_half_width * (2.0 * rng.uniform() - 1.0);
    out[i] += env * s;
  }
}

double peak_of(const std::vector<double>& v) {
  double p = 0.0;
  for (double x : v) p = std::max(p, std::abs(x));
  return p;
}

}  // namespace

ToneResult synth_tone(const TonePreset& preset, double duration, int sample_rate,
                      std::uint64_t seed) {
  preset.validate();
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (!(duration > preset.attack + preset.release)) {
    throw DomainError("tone duration must exceed attack + release");
  }
  NoteSpec n;
  n.f0 = preset.f0;
  n.amps = preset.harmonic_amps;
  n.detune = preset.detune;
  n.attack = preset.attack;
  n.release = preset.release;
  n.hold = duration - preset.release;
  for (std::size_t h = 0; h < n.amps.size(); ++h) {
    if (n.amps[h] > 0.0 && partial_frequency(n, h) >= 0.5 * sample_rate) {
      throw DomainError("harmonic " + std::to_string(h + 1) + " of " + std::to_string(preset.f0) +
                        " Hz reaches the Nyquist frequency");
    }
  }
  double harmonic_power = 0.0;
  for (double a : n.amps) harmonic_power += 0.5 * a * a;
  const double noise_power = harmonic_power * preset.noise_mix / (1.0 - preset.noise_mix);
  n.noise_rms = std::sqrt(noise_power);

  Rng rng(seed);
  std::vector<double> samples(static_cast<std::size_t>(std::llround(duration * sample_rate)), 0.0);
  render(samples, 0, n, sample_rate, rng);

  double gain = 1.0;
  const double peak = peak_of(samples);
  if (peak > kMaxPeak) gain = kMaxPeak / peak;
  if (gain != 1.0) {
    for (double& x : samples) x *= gain;
  }

  ToneResult r;
  for (std::size_t h = 0; h < n.amps.size(); ++h) {
    if (n.amps[h] > 0.0) {
      r.truth.partials.push_back({static_cast<int>(h + 1), partial_frequency(n, h), n.amps[h] * gain});
    }
  }
  r.truth.harmonic_energy = harmonic_power * gain * gain;
  r.truth.noise_energy = noise_power * gain * gain;
  r.clip = audio::AudioClip(std::move(samples), sample_rate, 24);
  return r;
}

std::span<const int> melody() {
  static constexpr int kMelody[] = {0, 4, 7, 12, 7, 4, 2, 5, 9, 14, 9, 5, 2, 7, 4, 0};
  return kMelody;
}

PerformanceResult synth_performance(const PerformancePreset& preset, std::size_t n_notes,
                                    int sample_rate) {
  preset.validate();
  if (n_notes < 2) throw DomainError("a performance needs at least 2 notes");
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");

  Rng rng(preset.seed);
  const double ioi = 60.0 / preset.bpm;
  const double hold = std::max(preset.tone.attack, preset.legato * ioi);
  const auto tune = melody();

  PerformanceResult result;
  result.truth.label = preset.label;
  result.truth.bpm = preset.bpm;

  std::vector<NoteSpec> notes;
  std::vector<double> onsets;
  for (std::size_t i = 0; i < n_notes; ++i) {
    NoteTruth t;
    const double shift = i == 0 ? 0.0 : preset.jitter.timing * ioi * rng.uniform(-1.0, 1.0);
    t.onset = kLeadingSilence + static_cast<double>(i) * ioi + shift;
    t.f0 = preset.tone.f0 * std::exp2(tune[i % tune.size()] / 12.0);
    t.tilt = preset.tilt + preset.jitter.tilt * rng.uniform(-1.0, 1.0);
    t.noise_mix = std::clamp(preset.tone.noise_mix * (1.0 + preset.jitter.noise * rng.uniform(-1.0, 1.0)),
                             0.0, 0.95);
    const double stretch = preset.jitter.detune * rng.uniform();
    t.level = preset.level + preset.level_spread * rng.uniform();
    const double oe_draw = rng.uniform();

    NoteSpec n;
    n.f0 = t.f0;
    n.attack = preset.tone.attack;
    n.release = preset.tone.release;
    n.hold = hold;
    n.amplitude = t.level;
    n.accent = preset.accent * preset.level;
    n.accent_tau = preset.accent_tau;

    const std::size_t base = preset.tone.harmonic_amps.size();
    for (std::size_t h = 0; h < base; ++h) {
      const double d = (h < preset.tone.detune.size() ? preset.tone.detune[h] : 0.0) +
                       stretch * static_cast<double>(h);
      if (static_cast<double>(h + 1) * t.f0 * (1.0 + d) >= 0.45 * sample_rate) break;
      n.amps.push_back(preset.tone.harmonic_amps[h] * std::pow(static_cast<double>(h + 1), -t.tilt));
      n.detune.push_back(d);
    }
    if (n.amps.empty() || n.amps.front() <= 0.0) {
      throw DomainError("note " + std::to_string(i) + " has no audible fundamental");
    }

    if (preset.odd_even > 0.0) {
      t.odd_even = preset.odd_even + preset.odd_even_spread * oe_draw;
      double odd = 0.0;
      double even = 0.0;
      for (std::size_t h = 0; h < n.amps.size(); ++h) ((h % 2 == 0) ? odd : even) += n.amps[h] * n.amps[h];
      if (even > 0.0) {
        const double g = std::sqrt(odd / (t.odd_even * even));
        for (std::size_t h = 1; h < n.amps.size(); h += 2) n.amps[h] *= g;
      }
    } else {
      double odd = 0.0;
      double even = 0.0;
      for (std::size_t h = 0; h < n.amps.size(); ++h) ((h % 2 == 0) ? odd : even) += n.amps[h] * n.amps[h];
      t.odd_even = even > 0.0 ? odd / even : 0.0;
    }

    // Unit RMS at full envelope: harmonic power 1 - mix, noise power mix.
    double power = 0.0;
    for (double a : n.amps) power += 0.5 * a * a;
    const double scale = std::sqrt((1.0 - t.noise_mix) / power);
    for (double& a : n.amps) a *= scale;
    n.noise_rms = std::sqrt(t.noise_mix);

    onsets.push_back(t.onset);
    notes.push_back(std::move(n));
    result.truth.notes.push_back(t);
  }

  const double last_end = onsets.back() + hold + preset.tone.release;
  const auto total = static_cast<std::size_t>(std::ceil((last_end + kLeadingSilence) * sample_rate));
  std::vector<double> samples(total, 0.0);
  for (std::size_t i = 0; i < notes.size(); ++i) {
    const auto start = static_cast<std::size_t>(std::llround(onsets[i] * sample_rate));
    render(samples, start, notes[i], sample_rate, rng);
  }

  const double peak = peak_of(samples);
  if (peak > kMaxPeak) {
    result.truth.gain = kMaxPeak / peak;
    for (double& x : samples) x *= result.truth.gain;
  }
  result.clip = audio::AudioClip(std::move(samples), sample_rate, 24);
  return result;
}

std::vector<PerformancePreset> default_presets() {
  auto tone = [](double slope, double noise) {
    TonePreset t;
    t.f0 = 98.0;
    t.harmonic_amps.clear();
    for (int h = 1; h <= 16; ++h) t.harmonic_amps.push_back(std::pow(h, -slope));
    t.noise_mix = noise;
    return t;
  };
  std::vector<PerformancePreset> p(kEmotionCount);

  auto& anger = p[index_of(Emotion::Anger)];
  anger.label = Emotion::Anger;
  anger.bpm = 150;
  anger.level = 0.16;
  anger.legato = 0.8;
  anger.tone = tone(0.7, 0.20);
  anger.odd_even = 2.0;
  anger.jitter = {0.0, 0.3, 0.3, 0.0};

  auto& disgust = p[index_of(Emotion::Disgust)];
  disgust.label = Emotion::Disgust;
  disgust.bpm = 75;
  disgust.level = 0.09;
  disgust.legato = 0.85;
  disgust.tone = tone(1.2, 0.08);
  for (int h = 0; h < 16; ++h) disgust.tone.detune.push_back(0.004 * h);
  disgust.odd_even = 1.5;
  disgust.jitter = {0.0, 0.1, 0.2, 0.003};

  auto& fear = p[index_of(Emotion::Fear)];
  fear.label = Emotion::Fear;
  fear.bpm = 95;
  fear.level = 0.05;
  fear.legato = 0.6;
  fear.tone = tone(1.4, 0.12);
  fear.odd_even = 3.5;
  fear.jitter = {0.15, 0.15, 0.5, 0.0};

  auto& happiness = p[index_of(Emotion::Happiness)];
  happiness.label = Emotion::Happiness;
  happiness.bpm = 135;
  happiness.level = 0.13;
  happiness.legato = 0.35;
  happiness.tone = tone(0.8, 0.04);
  happiness.odd_even = 2.5;
  happiness.jitter = {0.0, 0.4, 0.2, 0.0};

  auto& sadness = p[index_of(Emotion::Sadness)];
  sadness.label = Emotion::Sadness;
  sadness.bpm = 60;
  sadness.level = 0.04;
  sadness.legato = 0.95;
  sadness.tone = tone(2.0, 0.02);
  sadness.odd_even = 5.0;
  sadness.jitter = {0.0, 0.05, 0.1, 0.0};

  auto& surprise = p[index_of(Emotion::Surprise)];
  surprise.label = Emotion::Surprise;
  surprise.bpm = 115;
  surprise.level = 0.09;
  surprise.legato = 0.7;
  surprise.tone = tone(1.0, 0.06);
  surprise.odd_even = 3.0;
  surprise.accent = 1.2;
  surprise.jitter = {0.0, 0.25, 0.2, 0.0};

  auto& neutral = p[index_of(Emotion::Neutral)];
  neutral.label = Emotion::Neutral;
  neutral.bpm = 85;
  neutral.level = 0.10;
  neutral.legato = 0.8;
  neutral.tone = tone(1.3, 0.02);
  neutral.odd_even = 4.0;
  neutral.jitter = {0.0, 0.1, 0.1, 0.0};

  for (std::size_t i = 0; i < p.size(); ++i) p[i].seed = 1000 + i;
  return p;
}

namespace {

void check_presets(std::span<const PerformancePreset> presets) {
  std::array<int, kEmotionCount> seen{};
  for (const auto& p : presets) {
    p.validate();
    if (++seen[index_of(p.label)] > 1) {
      throw ConfigError("duplicate preset for emotion '" + std::string(to_string(p.label)) + "'");
    }
  }
  for (Emotion e : kAllEmotions) {
    if (seen[index_of(e)] == 0) {
      throw ConfigError("no preset for emotion '" + std::string(to_string(e)) + "'");
    }
  }
}

std::string performer_id(std::size_t performer, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(count).size());
  std::string digits = std::to_string(performer + 1);
  return "p" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

PerformanceResult synth_corpus_clip(std::span<const PerformancePreset> presets,
                                    const CorpusOptions& options, std::size_t performer,
                                    Emotion emotion, ClipTruth* truth) {
  check_presets(presets);
  const PerformancePreset* base = nullptr;
  for (const auto& p : presets) {
    if (p.label == emotion) base = &p;
  }

  Rng perf(mix_seed(options.master_seed, 0x70657266ULL + performer));
  const double level_lo = std::log(1.0 / (1.0 + options.performer_level));
  const double level_hi = std::log(1.0 + options.performer_level);
  const double level_factor = std::exp(perf.uniform(level_lo, level_hi));
  const double bpm_factor = 1.0 + perf.uniform(-options.performer_bpm, options.performer_bpm);
  const double tilt_offset = perf.uniform(-options.performer_tilt, options.performer_tilt);

  const std::uint64_t clip_seed =
      mix_seed(options.master_seed, performer * kEmotionCount + index_of(emotion) + 1);
  Rng clip(clip_seed);
  PerformancePreset p = *base;
  p.level = std::min(1.0, p.level * level_factor);
  p.bpm = std::clamp(p.bpm * bpm_factor, 30.0, 300.0);
  p.tilt += tilt_offset;
  p.level_spread = clip.log_uniform(options.level_spread_lo, options.level_spread_hi);
  p.odd_even_spread = clip.log_uniform(options.odd_even_spread_lo, options.odd_even_spread_hi);
  p.seed = mix_seed(clip_seed, base->seed);

  auto result = synth_performance(p, options.n_notes, options.sample_rate);
  if (truth) {
    truth->performer_id = performer_id(performer, options.n_performers);
    truth->file = "audio/" + truth->performer_id + "_" + std::string(to_string(emotion)) + ".wav";
    truth->seed = p.seed;
    truth->level_spread = p.level_spread;
    truth->odd_even_spread = p.odd_even_spread;
    truth->performance = result.truth;
  }
  return result;
}

CorpusResult synth_corpus(std::span<const PerformancePreset> presets, const CorpusOptions& options,
                          const fs::path& out_dir) {
  check_presets(presets);
  if (options.n_performers == 0) throw ConfigError("need at least one performer");
  std::error_code ec;
  fs::create_directories(out_dir / "audio", ec);
  if (ec || !fs::is_directory(out_dir / "audio")) {
    throw IoError("cannot create " + (out_dir / "audio").string());
  }

  const std::size_t total = options.n_performers * kEmotionCount;
  std::vector<ClipTruth> clips(total);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= total) return;
      try {
        const std::size_t performer = k / kEmotionCount;
        const Emotion emotion = kAllEmotions[k % kEmotionCount];
        auto r = synth_corpus_clip(presets, options, performer, emotion, &clips[k]);
        fsutil::write_atomic(out_dir / clips[k].file,
                             audio::encode_wav_bytes(r.clip, audio::SampleFormat::Pcm24));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, total);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  CorpusResult out;
  out.truth.master_seed = options.master_seed;
  out.truth.sample_rate = options.sample_rate;
  out.truth.planted_null_features = {"ATK_IQR", "OER_IQR"};
  for (auto& c : clips) {
    out.manifest.push_back({c.file, c.performer_id, c.performance.label});
  }
  out.truth.clips = std::move(clips);

  std::ostringstream manifest;
  audio::write_manifest(manifest, out.manifest);
  fsutil::write_atomic(out_dir / "manifest.csv", manifest.str());
  fsutil::write_atomic(out_dir / "truth.json", truth_to_json(out.truth));
  return out;
}

std::string truth_to_json(const CorpusTruth& truth) {
  nlohmann::ordered_json j;
  j["master_seed"] = truth.master_seed;
  j["sample_rate"] = truth.sample_rate;
  j["planted_null_features"] = truth.planted_null_features;
  auto& clips = j["clips"] = nlohmann::ordered_json::array();
  for (const auto& c : truth.clips) {
    nlohmann::ordered_json cj;
    cj["file"] = c.file;
    cj["performer"] = c.performer_id;
    cj["emotion"] = std::string(to_string(c.performance.label));
    cj["seed"] = c.seed;
    cj["bpm"] = c.performance.bpm;
    cj["gain"] = c.performance.gain;
    cj["level_spread"] = c.level_spread;
    cj["odd_even_spread"] = c.odd_even_spread;
    auto& notes = cj["notes"] = nlohmann::ordered_json::array();
    for (const auto& n : c.performance.notes) {
      notes.push_back({{"onset", n.onset},
                       {"f0", n.f0},
                       {"level", n.level},
                       {"odd_even", n.odd_even},
                       {"tilt", n.tilt},
                       {"noise_mix", n.noise_mix}});
    }
    clips.push_back(std::move(cj));
  }
  return j.dump(2) + "\n";
}

}  // namespace affex::synthkit
