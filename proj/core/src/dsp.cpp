#include "affex/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <numeric>

#include <unsupported/Eigen/FFT>

#include "affex/error.hpp"

namespace affex::dsp {
namespace {

bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

struct Vertex {
  double offset;  // bins, in [-0.5, 0.5] for a proper peak
  double height;
};

// Parabola through three equally spaced points; offset of the vertex from
// the centre sample and its height.
Vertex parabolic_vertex(double left, double centre, double right) {
  const double denom = left - 2.0 * centre + right;
  if (!(denom < 0.0)) return {0.0, centre};
  const double p = std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
  return {p, centre - 0.25 * (left - right) * p};
}

double safe_log(double x) { return std::log(std::max(x, 1e-300)); }

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

double spectral_power(const Spectrum& spectrum) {
  double sum = 0.0;
  for (double m : spectrum.magnitudes) sum += m * m;
  return sum / spectrum.enbw;
}

double windowed_energy(const Spectrum& spectrum) {
  const auto& mags = spectrum.magnitudes;
  if (mags.empty() || spectrum.frame_size == 0) return 0.0;
  const double unscale = spectrum.window_sum / 2.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    const double x = mags[k] * unscale;
    const bool edge = k == 0 || k + 1 == mags.size();
    sum += (edge ? 1.0 : 2.0) * x * x;
  }
  return sum / static_cast<double>(spectrum.frame_size);
}

std::vector<std::vector<double>> frame_signal(std::span<const double> samples,
                                              std::size_t frame_size, std::size_t hop) {
  if (hop == 0 || frame_size == 0 || hop > frame_size) {
    throw ConfigError("frame_signal requires 0 < hop <= frame_size");
  }
  if (frame_size > samples.size()) {
    throw InputTooShortError("signal of " + std::to_string(samples.size()) +
                             " samples is shorter than one frame of " +
                             std::to_string(frame_size));
  }
  const std::size_t count = (samples.size() - frame_size + hop - 1) / hop + 1;
  std::vector<std::vector<double>> frames(count, std::vector<double>(frame_size, 0.0));
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = k * hop;
    const std::size_t take = std::min(frame_size, samples.size() - start);
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(start), take, frames[k].begin());
  }
  return frames;
}

std::vector<std::vector<double>> frame_signal(const audio::AudioClip& clip,
                                              std::size_t frame_size, std::size_t hop) {
  return frame_signal(clip.samples(), frame_size, hop);
}

std::vector<double> make_window(Window window, std::size_t size) {
  std::vector<double> w(size, 1.0);
  if (size < 2) return w;
  const double two_pi = 2.0 * std::numbers::pi;
  // Periodic (DFT-even) forms.
  for (std::size_t n = 0; n < size; ++n) {
    const double x = two_pi * static_cast<double>(n) / static_cast<double>(size);
    switch (window) {
      case Window::Rectangular: break;
      case Window::Hann: w[n] = 0.5 - 0.5 * std::cos(x); break;
      case Window::Hamming: w[n] = 0.54 - 0.46 * std::cos(x); break;
      case Window::Blackman: w[n] = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x); break;
    }
  }
  return w;
}

double window_response(Window window, std::size_t size, double offset) {
  // Tabulated over [0, 1.5] bins and interpolated linearly; 1024 steps per
  // bin keep the error near 1e-6 across the main lobe.
  constexpr double kSpan = 1.5;
  constexpr std::size_t kSteps = 1536;
  struct Key {
    Window window;
    std::size_t size;
    bool operator<(const Key& o) const {
      return window != o.window ? window < o.window : size < o.size;
    }
  };
  thread_local std::map<Key, std::vector<double>> cache;
  auto [it, fresh] = cache.try_emplace(Key{window, size});
  auto& table = it->second;
  if (fresh) {
    const auto w = make_window(window, size);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    table.resize(kSteps + 1);
    for (std::size_t j = 0; j <= kSteps; ++j) {
      const double d = kSpan * static_cast<double>(j) / kSteps;
      std::complex<double> acc = 0.0;
      for (std::size_t n = 0; n < size; ++n) {
        acc += w[n] * std::polar(1.0, -2.0 * std::numbers::pi * d * static_cast<double>(n) /
                                          static_cast<double>(size));
      }
      table[j] = std::abs(acc) / sum;
    }
  }
  const double x = std::min(std::abs(offset), kSpan) / kSpan * kSteps;
  const auto j = std::min(static_cast<std::size_t>(x), kSteps - 1);
  const double frac = x - static_cast<double>(j);
  return table[j] + frac * (table[j + 1] - table[j]);
}

Spectrum magnitude_spectrum(std::span<const double> frame, Window window, int sample_rate,
                            std::size_t frame_index) {
  const std::size_t n = frame.size();
  if (!is_power_of_two(n)) {
    throw ConfigError("frame length " + std::to_string(n) + " is not a power of two");
  }
  if (sample_rate <= 0) throw DomainError("sample rate must be positive");

  const std::vector<double> w = make_window(window, n);
  std::vector<double> tapered(n);
  double wsum = 0.0, wsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tapered[i] = frame[i] * w[i];
    wsum += w[i];
    wsq += w[i] * w[i];
  }

  thread_local Eigen::FFT<double> fft;
  std::vector<std::complex<double>> bins;
  fft.fwd(bins, tapered);

  Spectrum s;
  s.frame_index = frame_index;
  s.sample_rate = sample_rate;
  s.frame_size = n;
  s.window = window;
  s.window_sum = wsum;
  s.enbw = static_cast<double>(n) * wsq / (wsum * wsum);
  const std::size_t half = n / 2 + 1;
  s.bin_freqs.resize(half);
  s.magnitudes.resize(half);
  const double scale = 2.0 / wsum;
  for (std::size_t k = 0; k < half; ++k) {
    s.bin_freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    s.magnitudes[k] = std::abs(bins[k]) * scale;
  }
  return s;
}

double harmonic_salience(const Spectrum& spectrum, double f0, int max_harmonics) {
  const auto& mags = spectrum.magnitudes;
  double total = 0.0;
  for (std::size_t k = 1; k < mags.size(); ++k) total += mags[k] * mags[k];
  if (total <= 0.0 || f0 <= 0.0) return 0.0;
  const double width = spectrum.bin_width();
  std::vector<char> taken(mags.size(), 0);
  double comb = 0.0;
  for (int h = 1; h <= max_harmonics; ++h) {
    const double centre = h * f0 / width;
    const auto k0 = static_cast<long>(std::lround(centre));
    if (k0 + 1 >= static_cast<long>(mags.size())) break;
    for (long k = std::max(1L, k0 - 1); k <= k0 + 1; ++k) {
      if (!taken[static_cast<std::size_t>(k)]) {
        taken[static_cast<std::size_t>(k)] = 1;
        comb += mags[static_cast<std::size_t>(k)] * mags[static_cast<std::size_t>(k)];
      }
    }
  }
  return comb / total;
}

namespace {

struct PeakFit {
  double offset;     // bins from the peak bin
  double amplitude;  // same scale as the magnitudes
};

// Sinusoid under local maximum `k`. For tapered windows the offset solves
// |X(k+1)| / |X(k-1)| = W(1 - d) / W(1 + d) and the amplitude undoes the
// scalloping W(d); both are exact for an isolated sinusoid. The rectangular
// window has nulls one bin out, so it keeps the log-parabola.
PeakFit fit_peak(const std::vector<double>& mag, std::size_t k, Window window,
                 std::size_t frame_size) {
  const Vertex v = parabolic_vertex(safe_log(mag[k - 1]), safe_log(mag[k]), safe_log(mag[k + 1]));
  if (window == Window::Rectangular || !(mag[k - 1] > 0.0) || !(mag[k + 1] > 0.0)) {
    return {v.offset, std::exp(v.height)};
  }
  const double target = std::log(mag[k + 1] / mag[k - 1]);
  auto ratio = [&](double d) {
    return std::log(window_response(window, frame_size, 1.0 - d) /
                    window_response(window, frame_size, 1.0 + d));
  };
  double lo = -0.5, hi = 0.5;
  if (target <= ratio(lo)) {
    hi = lo;
  } else if (target >= ratio(hi)) {
    lo = hi;
  } else {
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ratio(mid) < target ? lo : hi) = mid;
    }
  }
  const double d = 0.5 * (lo + hi);
  return {d, mag[k] / window_response(window, frame_size, d)};
}

}  // namespace

std::optional<double> estimate_f0(const Spectrum& spectrum, const F0Options& options) {
  const auto& raw = spectrum.magnitudes;
  if (raw.size() < 4) return std::nullopt;
  const double mean_power = spectral_power(spectrum) / 2.0;
  const double ref_power = options.reference * options.reference;
  if (!(mean_power > 0.0) || 10.0 * std::log10(mean_power / ref_power) < options.silence_db) {
    return std::nullopt;
  }

  // Work on magnitudes relative to the frame maximum: everything downstream
  // depends only on ratios, so rescaling the input cannot move the estimate.
  const double peak = *std::max_element(raw.begin() + 1, raw.end());
  if (!(peak > 0.0)) return std::nullopt;
  std::vector<double> mag(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) mag[k] = raw[k] / peak;

  const double width = spectrum.bin_width();
  const std::size_t last = mag.size() - 1;
  const double floor = options.hps_floor;

  // Interpolated spectral peaks. The product is taken over a sharpened
  // spectrum in which each peak becomes a narrow Gaussian: at low f0 the
  // window main lobe is wider than the harmonic spacing, and raw bins would
  // credit subharmonic candidates with the lobes of real partials.
  struct Peak {
    double freq;
    double height;
  };
  std::vector<Peak> peaks;
  for (std::size_t k = 1; k < last; ++k) {
    if (mag[k] >= mag[k - 1] && mag[k] > mag[k + 1] && mag[k] > floor) {
      const Vertex v = parabolic_vertex(safe_log(mag[k - 1]), safe_log(mag[k]), safe_log(mag[k + 1]));
      peaks.push_back({(static_cast<double>(k) + v.offset) * width, std::exp(v.height)});
    }
  }
  const double sigma = width / 4.0;
  auto term = [&](double freq) {
    double t = floor;
    for (const auto& pk : peaks) {
      const double z = (freq - pk.freq) / sigma;
      if (z * z < 60.0) t = std::max(t, pk.height * std::exp(-0.5 * z * z));
    }
    return t;
  };
  auto hps = [&](double f) {
    double s = 0.0;
    for (int m = 1; m <= options.hps_order; ++m) s += std::log(term(m * f));
    return s;
  };

  const double step = width / 16.0;
  std::vector<double> grid;
  for (double f = options.min_hz; f <= options.max_hz; f += step) grid.push_back(f);
  if (grid.size() < 3) return std::nullopt;
  std::vector<double> score(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) score[i] = hps(grid[i]);

  auto has_own_peak = [&](double f) {
    const double reach = std::max(0.5 * width, 0.03 * f);
    return std::any_of(peaks.begin(), peaks.end(), [&](const Peak& pk) {
      return pk.height >= 2.0 * floor && std::abs(pk.freq - f) <= reach;
    });
  };

  const std::size_t best =
      static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
  std::size_t chosen = best;
  const double cutoff = score[best] + std::log(options.octave_ratio);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool local_max = (i == 0 || score[i] >= score[i - 1]) &&
                           (i + 1 == grid.size() || score[i] >= score[i + 1]);
    if (!local_max || score[i] < cutoff) continue;
    if (has_own_peak(grid[i])) {
      chosen = i;  // lowest candidate carrying its own fundamental peak
      break;
    }
  }

  double f_hps = grid[chosen];
  if (chosen > 0 && chosen + 1 < grid.size()) {
    f_hps += parabolic_vertex(score[chosen - 1], score[chosen], score[chosen + 1]).offset * step;
  }

  // Refine against the interpolated frequencies of the first harmonic peaks.
  double weighted = 0.0, weights = 0.0;
  for (int h = 1; h <= options.hps_order; ++h) {
    const double centre = h * f_hps / width;
    const double reach = std::max(1.0, 0.03 * centre);
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor(centre - reach)));
    const auto hi = std::min(last - 1, static_cast<std::size_t>(std::ceil(centre + reach)));
    std::size_t at = 0;
    for (std::size_t k = lo; k <= hi && k < last; ++k) {
      if (mag[k] >= mag[k - 1] && mag[k] > mag[k + 1] && (at == 0 || mag[k] > mag[at])) at = k;
    }
    if (at == 0 || mag[at] < 2.0 * floor) continue;
    const PeakFit fit = fit_peak(mag, at, spectrum.window, spectrum.frame_size);
    const double fh = (static_cast<double>(at) + fit.offset) * width;
    const double amp = fit.amplitude;
    weighted += amp * fh / h;
    weights += amp;
  }
  const double f0 = weights > 0.0 ? weighted / weights : f_hps;

  if (harmonic_salience(spectrum, f0, 20) < options.min_salience) return std::nullopt;
  return f0;
}

PartialSet extract_partials(const Spectrum& spectrum, double f0, const PartialOptions& options) {
  if (!(f0 > 0.0)) throw DomainError("extract_partials requires f0 > 0");
  if (!(options.tolerance > 0.0 && options.tolerance < 0.5)) {
    throw ConfigError("partial tolerance must lie in (0, 0.5)");
  }
  PartialSet out;
  out.f0 = f0;
  const auto& mag = spectrum.magnitudes;
  if (mag.size() < 3) return out;

  const double width = spectrum.bin_width();
  const double nyquist = spectrum.sample_rate / 2.0;
  const std::size_t last = mag.size() - 1;
  const double frame_max = *std::max_element(mag.begin(), mag.end());
  const double floor = std::max(options.noise_floor_ratio * median_of(mag),
                                options.relative_floor * frame_max);

  for (int h = 1; h <= options.max_harmonics; ++h) {
    const double lo_hz = h * f0 * (1.0 - options.tolerance);
    const double hi_hz = h * f0 * (1.0 + options.tolerance);
    if (h * f0 >= nyquist) break;
    // Enclosing bins, so a band narrower than one bin still sees its peak;
    // the refined frequency is checked against the band below.
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor(lo_hz / width)));
    const auto hi = std::min(last - 1, static_cast<std::size_t>(std::ceil(hi_hz / width)));

    std::size_t at = 0;
    for (std::size_t k = lo; k <= hi; ++k) {
      const bool peak = mag[k] >= mag[k - 1] && mag[k] > mag[k + 1];
      if (peak && (at == 0 || mag[k] > mag[at])) at = k;
    }
    if (at == 0 || !(mag[at] > floor)) continue;

    const PeakFit fit = fit_peak(mag, at, spectrum.window, spectrum.frame_size);
    const double freq = (static_cast<double>(at) + fit.offset) * width;
    if (freq < lo_hz || freq > hi_hz) continue;
    out.partials.push_back({h, freq, fit.amplitude});
  }
  return out;
}

Envelope amplitude_envelope(const audio::AudioClip& clip, std::size_t hop, double smooth) {
  if (hop == 0) throw ConfigError("envelope hop must be positive");
  const auto s = clip.samples();
  const std::size_t n = s.size();
  Envelope env;
  env.hop_seconds = static_cast<double>(hop) / clip.sample_rate();
  if (n == 0) return env;

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + s[i] * s[i];

  const std::size_t count = n / hop + 1;
  const double window = 2.0 * static_cast<double>(hop);
  const double alpha = smooth > 0.0 ? 1.0 - std::exp(-env.hop_seconds / smooth) : 1.0;
  env.times.resize(count);
  env.values.resize(count);
  double state = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t centre = k * hop;
    const std::size_t lo = centre >= hop ? centre - hop : 0;
    const std::size_t hi = std::min(n, centre + hop);
    const double rms = std::sqrt(std::max(0.0, prefix[hi] - prefix[lo]) / window);
    state += alpha * (rms - state);
    env.times[k] = static_cast<double>(centre) / clip.sample_rate();
    env.values[k] = std::max(0.0, state);
  }
  return env;
}

OnsetList detect_onsets(const Envelope& env, const audio::AudioClip& clip,
                        const OnsetOptions& options) {
  OnsetList out;
  const std::size_t n = env.values.size();
  if (n < 3) return out;

  double clip_peak = 0.0;
  for (double v : clip.samples()) clip_peak = std::max(clip_peak, std::abs(v));
  if (!(clip_peak > 0.0)) return out;
  const double log_floor = options.floor_relative * clip_peak;

  // Half-wave rectified derivative of the log envelope.
  std::vector<double> rise(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double d = std::log(env.values[k] + log_floor) - std::log(env.values[k - 1] + log_floor);
    rise[k] = std::max(0.0, d);
  }

  const auto half = static_cast<std::size_t>(
      std::max(1.0, std::round(0.5 * options.context / env.hop_seconds)));
  std::vector<double> scratch;
  struct Candidate {
    std::size_t index;
    double strength;
  };
  std::vector<Candidate> accepted;

  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (!(rise[k] > options.min_rise) || rise[k] < rise[k - 1] || !(rise[k] > rise[k + 1])) {
      continue;
    }
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(n, k + half + 1);
    scratch.assign(rise.begin() + static_cast<std::ptrdiff_t>(lo),
                   rise.begin() + static_cast<std::ptrdiff_t>(hi));
    const double med = median_of(scratch);
    for (double& v : scratch) v = std::abs(v - med);
    const double mad = median_of(scratch);
    if (!(rise[k] > med + options.threshold_k * mad)) continue;

    if (!accepted.empty() &&
        env.times[k] - env.times[accepted.back().index] < options.min_gap) {
      if (rise[k] > accepted.back().strength) accepted.back() = {k, rise[k]};
      continue;
    }
    accepted.push_back({k, rise[k]});
  }

  out.onsets.reserve(accepted.size());
  for (const auto& c : accepted) out.onsets.push_back(env.times[c.index]);
  return out;
}

}  // namespace affex::dsp
