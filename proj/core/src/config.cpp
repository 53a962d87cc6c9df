#include "affex/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "affex/error.hpp"
#include "affex/fsutil.hpp"

namespace affex {

std::string_view to_string(dsp::Window window) {
  switch (window) {
    case dsp::Window::Rectangular: return "rectangular";
    case dsp::Window::Hann: return "hann";
    case dsp::Window::Hamming: return "hamming";
    case dsp::Window::Blackman: return "blackman";
  }
  return "hann";
}

dsp::Window parse_window(std::string_view text) {
  if (text == "rectangular") return dsp::Window::Rectangular;
  if (text == "hann") return dsp::Window::Hann;
  if (text == "hamming") return dsp::Window::Hamming;
  if (text == "blackman") return dsp::Window::Blackman;
  throw ConfigError("unknown window '" + std::string(text) + "'");
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
  return out;
}

template <typename T>
T to_unsigned(const std::string& key, const std::string& v) {
  T out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': not a non-negative integer: '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

struct Key {
  std::string name;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

#define AFFEX_DOUBLE(name, field)                                                      \
  Key {                                                                                \
    name, [](const PipelineConfig& c) { return fmt(c.field); },                        \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {            \
          c.field = to_double(k, v);                                                   \
        }                                                                              \
  }
#define AFFEX_SIZE(name, field)                                                        \
  Key {                                                                                \
    name, [](const PipelineConfig& c) { return std::to_string(c.field); },             \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {            \
          c.field = to_unsigned<decltype(c.field)>(k, v);                              \
        }                                                                              \
  }
#define AFFEX_INT(name, field)                                                         \
  Key {                                                                                \
    name, [](const PipelineConfig& c) { return std::to_string(c.field); },             \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {            \
          c.field = to_int(k, v);                                                      \
        }                                                                              \
  }
#define AFFEX_BOOL(name, field)                                                        \
  Key {                                                                                \
    name, [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }, \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {            \
          c.field = to_bool(k, v);                                                     \
        }                                                                              \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      AFFEX_SIZE("frame", extraction.frame_size),
      AFFEX_SIZE("hop", extraction.hop),
      Key{"window", [](const PipelineConfig& c) { return std::string(to_string(c.extraction.window)); },
          [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.extraction.window = parse_window(v);
          }},
      AFFEX_DOUBLE("f0_min", extraction.f0.min_hz),
      AFFEX_DOUBLE("f0_max", extraction.f0.max_hz),
      AFFEX_INT("hps_order", extraction.f0.hps_order),
      AFFEX_DOUBLE("hps_floor", extraction.f0.hps_floor),
      AFFEX_DOUBLE("octave_ratio", extraction.f0.octave_ratio),
      AFFEX_DOUBLE("voicing_db", extraction.f0.silence_db),
      AFFEX_DOUBLE("min_salience", extraction.f0.min_salience),
      AFFEX_INT("max_h", extraction.partials.max_harmonics),
      AFFEX_DOUBLE("tol", extraction.partials.tolerance),
      AFFEX_DOUBLE("noise_floor_ratio", extraction.partials.noise_floor_ratio),
      AFFEX_DOUBLE("relative_floor", extraction.partials.relative_floor),
      AFFEX_SIZE("envelope_hop", extraction.envelope_hop),
      AFFEX_DOUBLE("envelope_smooth", extraction.envelope_smooth),
      AFFEX_DOUBLE("onset_k", extraction.onsets.threshold_k),
      AFFEX_DOUBLE("onset_context", extraction.onsets.context),
      AFFEX_DOUBLE("onset_min_gap", extraction.onsets.min_gap),
      AFFEX_DOUBLE("onset_min_rise", extraction.onsets.min_rise),
      AFFEX_DOUBLE("onset_floor", extraction.onsets.floor_relative),
      AFFEX_BOOL("normalize_silence", extraction.normalize_silence),
      AFFEX_DOUBLE("silence_pad", extraction.silence_pad),
      AFFEX_DOUBLE("silence_db", extraction.silence.threshold_db),
      AFFEX_DOUBLE("silence_window", extraction.silence.rms_window),
      AFFEX_BOOL("silence_relative", extraction.silence.relative_to_peak),
      AFFEX_DOUBLE("low_frame", extraction.low_frame),
      AFFEX_DOUBLE("brightness_cutoff", extraction.brightness_cutoff),
      AFFEX_DOUBLE("oer_cap", extraction.oer_cap),
      AFFEX_BOOL("roughness_normalized", extraction.roughness_normalized),
      AFFEX_BOOL("include_t2", extraction.include_t2),
      Key{"quantile", [](const PipelineConfig& c) { return c.quantile; },
          [](PipelineConfig& c, const std::string&, const std::string& v) { c.quantile = v; }},
      AFFEX_DOUBLE("alpha", alpha),
      Key{"post_hoc", [](const PipelineConfig& c) { return std::string(stats::to_string(c.post_hoc)); },
          [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.post_hoc = stats::parse_post_hoc(v);
          }},
      AFFEX_DOUBLE("C", svm.C),
      Key{"kernel", [](const PipelineConfig& c) { return std::string(classify::to_string(c.svm.kernel)); },
          [](PipelineConfig& c, const std::string&, const std::string& v) {
            c.svm.kernel = classify::parse_kernel(v);
          }},
      AFFEX_DOUBLE("gamma", svm.gamma),
      AFFEX_DOUBLE("svm_tolerance", svm.tolerance),
      AFFEX_SIZE("svm_max_sweeps", svm.max_sweeps),
      AFFEX_BOOL("pca_refit", pca_refit),
      AFFEX_BOOL("use_bpm_nn", use_bpm_nn),
      AFFEX_SIZE("performers", synth.n_performers),
      AFFEX_SIZE("notes", synth.n_notes),
      AFFEX_INT("sample_rate", synth.sample_rate),
      AFFEX_SIZE("seed", synth.master_seed),
      AFFEX_DOUBLE("performer_level", synth.performer_level),
      AFFEX_DOUBLE("performer_bpm", synth.performer_bpm),
      AFFEX_DOUBLE("performer_tilt", synth.performer_tilt),
      AFFEX_DOUBLE("level_spread_lo", synth.level_spread_lo),
      AFFEX_DOUBLE("level_spread_hi", synth.level_spread_hi),
      AFFEX_DOUBLE("odd_even_spread_lo", synth.odd_even_spread_lo),
      AFFEX_DOUBLE("odd_even_spread_hi", synth.odd_even_spread_hi),
  };
  return table;
}

#undef AFFEX_DOUBLE
#undef AFFEX_SIZE
#undef AFFEX_INT
#undef AFFEX_BOOL

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void PipelineConfig::validate() const {
  extraction.validate();
  if (quantile != "linear") {
    throw ConfigError("quantile convention '" + quantile + "' is not supported (use linear)");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  svm.validate();
  for (const auto& s : sets) classify::parse_feature_set(s);
  if (synth.n_performers == 0) throw ConfigError("performers must be >= 1");
  if (synth.n_notes < 2) throw ConfigError("notes must be >= 2");
  if (synth.sample_rate < 8000) throw ConfigError("sample_rate must be >= 8000");
  if (!(synth.performer_level >= 0.0 && synth.performer_bpm >= 0.0 && synth.performer_bpm < 0.5 &&
        synth.performer_tilt >= 0.0)) {
    throw ConfigError("performer offsets out of range");
  }
  if (!(synth.level_spread_lo > 0.0 && synth.level_spread_hi >= synth.level_spread_lo &&
        synth.odd_even_spread_lo > 0.0 && synth.odd_even_spread_hi >= synth.odd_even_spread_lo)) {
    throw ConfigError("planted spread ranges must be positive and ordered");
  }
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig c;
  std::set<std::string> seen;
  bool schema_seen = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (key == "schema") {
      if (value != kConfigSchema) {
        throw ConfigError(where + "schema '" + value + "' is not " + std::string(kConfigSchema));
      }
      schema_seen = true;
      continue;
    }
    if (key == "set") {
      c.sets.push_back(value);
      continue;
    }
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->set(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (!schema_seen) throw ConfigError("config has no 'schema = " + std::string(kConfigSchema) + "' line");
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = fsutil::read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string to_text(const PipelineConfig& config) {
  std::string out = "schema = " + std::string(kConfigSchema) + "\n";
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  for (const auto& s : config.sets) out += "set = " + s + "\n";
  return out;
}

}  // namespace affex
