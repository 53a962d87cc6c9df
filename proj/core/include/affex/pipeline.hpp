#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "affex/config.hpp"

namespace affex::pipeline {

enum ExitCode : int { kSuccess = 0, kPartialFailure = 1, kConfigError = 2 };

// Exit code for an exception escaping a command: 2 for configuration,
// schema and input-shape problems, 1 otherwise.
int exit_code_for(const std::exception& e);

// Each command writes its bundle under `out` (created if needed) together
// with config.txt, the fully resolved configuration. Progress goes to `log`,
// problems to `err`. Files are written atomically.

// audio/*.wav, manifest.csv, truth.json
int cmd_synth(const PipelineConfig& config, const std::filesystem::path& out, std::size_t jobs,
              std::ostream& log, std::ostream& err);

// features.csv (rows in performer/emotion order); failures.csv when any file fails.
// Relative manifest paths are resolved against the manifest's directory.
int cmd_extract(const std::filesystem::path& manifest, const PipelineConfig& config,
                const std::filesystem::path& out, std::size_t jobs, std::ostream& log,
                std::ostream& err);

// normalized.csv, normalization.json, anova.csv, separation.csv, pca.json,
// pc_anova.csv, summary.txt
int cmd_analyze(const std::filesystem::path& matrix, const PipelineConfig& config,
                const std::filesystem::path& out, std::ostream& log, std::ostream& err);

// comparison.csv, comparison.json, summary.txt. `extra_sets` are appended to
// the default sets and to config.sets.
int cmd_classify(const std::filesystem::path& matrix, const PipelineConfig& config,
                 const std::filesystem::path& out, const std::vector<std::string>& extra_sets,
                 std::size_t jobs, std::ostream& log, std::ostream& err);

}  // namespace affex::pipeline
