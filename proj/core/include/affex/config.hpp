#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "affex/classify.hpp"
#include "affex/features.hpp"
#include "affex/stats.hpp"
#include "affex/synthkit.hpp"

namespace affex {

inline constexpr std::string_view kConfigSchema = "affex-config/1";

// Every tunable of the pipeline. Serialized as flat `key = value` lines; the
// `schema` key must name kConfigSchema, unknown keys are rejected, and `set`
// may repeat (one custom feature set per line).
struct PipelineConfig {
  features::ExtractionConfig extraction;
  std::string quantile = "linear";  // (n-1)p interpolation; the only convention offered

  double alpha = 0.05;
  stats::PostHoc post_hoc = stats::PostHoc::Welch;

  classify::SvmOptions svm;
  bool pca_refit = true;
  bool use_bpm_nn = false;
  std::vector<std::string> sets;  // extra sets, "NAME:F1,F2" or "NAME:<k>PC"

  synthkit::CorpusOptions synth;

  void validate() const;  // ConfigError
};

PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
// Every key, one per line, in a fixed order; parse_config(to_text(c)) == c.
std::string to_text(const PipelineConfig& config);

std::string_view to_string(dsp::Window window);
dsp::Window parse_window(std::string_view text);

}  // namespace affex
