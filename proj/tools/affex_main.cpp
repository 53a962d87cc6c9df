#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "affex/config.hpp"
#include "affex/error.hpp"
#include "affex/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
};

affex::PipelineConfig resolve(const Common& c) {
  affex::PipelineConfig config =
      c.config_path.empty() ? affex::PipelineConfig{} : affex::load_config(c.config_path);
  if (c.seed) config.synth.master_seed = *c.seed;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"affex: affective feature extraction, analysis and classification"};
  app.require_subcommand(1);

  Common synth_opts;
  std::optional<std::size_t> performers;
  std::size_t synth_jobs = 1;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--config", synth_opts.config_path, "Config file (key = value)");
  synth->add_option("--out", synth_opts.out, "Output directory")->required();
  synth->add_option("--seed", synth_opts.seed, "Master seed");
  synth->add_option("--performers", performers, "Number of simulated performers");
  synth->add_option("--jobs", synth_jobs, "Parallel synthesis jobs")->check(CLI::PositiveNumber);

  Common extract_opts;
  std::string manifest;
  std::size_t extract_jobs = 1;
  auto* extract = app.add_subcommand("extract", "Extract the feature matrix from a manifest");
  extract->add_option("manifest", manifest, "Manifest CSV (path,performer,emotion)")->required();
  extract->add_option("--config", extract_opts.config_path, "Config file (key = value)");
  extract->add_option("--out", extract_opts.out, "Output directory")->required();
  extract->add_option("--jobs", extract_jobs, "Parallel extraction jobs")->check(CLI::PositiveNumber);

  Common analyze_opts;
  std::string analyze_matrix;
  std::optional<double> alpha;
  auto* analyze = app.add_subcommand("analyze", "ANOVA gate, pairwise separation and PCA");
  analyze->add_option("matrix", analyze_matrix, "Feature matrix CSV")->required();
  analyze->add_option("--config", analyze_opts.config_path, "Config file (key = value)");
  analyze->add_option("--out", analyze_opts.out, "Output directory")->required();
  analyze->add_option("--alpha", alpha, "Significance level");

  Common classify_opts;
  std::string classify_matrix;
  std::vector<std::string> sets;
  std::size_t classify_jobs = 1;
  auto* classify = app.add_subcommand("classify", "Leave-one-out SVM comparison of feature sets");
  classify->add_option("matrix", classify_matrix, "Feature matrix CSV")->required();
  classify->add_option("--config", classify_opts.config_path, "Config file (key = value)");
  classify->add_option("--out", classify_opts.out, "Output directory")->required();
  classify->add_option("--set", sets, "Extra set, NAME:F1,F2 or NAME:<k>PC (repeatable)");
  classify->add_option("--jobs", classify_jobs, "Parallel folds")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : affex::pipeline::kConfigError;
  }

  try {
    if (*synth) {
      auto config = resolve(synth_opts);
      if (performers) config.synth.n_performers = *performers;
      return affex::pipeline::cmd_synth(config, synth_opts.out, synth_jobs, std::cout, std::cerr);
    }
    if (*extract) {
      return affex::pipeline::cmd_extract(manifest, resolve(extract_opts), extract_opts.out,
                                          extract_jobs, std::cout, std::cerr);
    }
    if (*analyze) {
      auto config = resolve(analyze_opts);
      if (alpha) config.alpha = *alpha;
      return affex::pipeline::cmd_analyze(analyze_matrix, config, analyze_opts.out, std::cout,
                                          std::cerr);
    }
    if (*classify) {
      return affex::pipeline::cmd_classify(classify_matrix, resolve(classify_opts),
                                           classify_opts.out, sets, classify_jobs, std::cout,
                                           std::cerr);
    }
  } catch (const affex::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return affex::pipeline::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return affex::pipeline::exit_code_for(e);
  }
  return 0;
}
