#include "affex/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "affex/audio_io.hpp"
#include "affex/classify.hpp"
#include "affex/dataset.hpp"
#include "affex/error.hpp"
#include "affex/fsutil.hpp"
#include "affex/stats.hpp"
#include "affex/synthkit.hpp"

namespace affex::pipeline {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SchemaError*>(&e) ||
      dynamic_cast<const SubsetError*>(&e) || dynamic_cast<const LabelError*>(&e) ||
      dynamic_cast<const DuplicateError*>(&e) || dynamic_cast<const InsufficientDataError*>(&e) ||
      dynamic_cast<const MissingClassError*>(&e)) {
    return kConfigError;
  }
  return kPartialFailure;
}

namespace {

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out.string());
}

void write_config(const fs::path& out, const PipelineConfig& config) {
  fsutil::write_atomic(out / "config.txt", to_text(config));
}

dataset::LabeledMatrix load_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file " + path.string());
  try {
    return dataset::read_matrix_csv(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

int cmd_synth(const PipelineConfig& config, const fs::path& out, std::size_t jobs,
              std::ostream& log, std::ostream&) {
  config.validate();
  prepare_out(out);
  auto options = config.synth;
  options.jobs = jobs;
  const auto presets = synthkit::default_presets();
  const auto corpus = synthkit::synth_corpus(presets, options, out);
  write_config(out, config);
  log << "wrote " << corpus.manifest.size() << " recordings to " << (out / "audio").string() << '\n'
      << "manifest: " << (out / "manifest.csv").string() << '\n'
      << "truth table: " << (out / "truth.json").string() << '\n';
  return kSuccess;
}

int cmd_extract(const fs::path& manifest_path, const PipelineConfig& config, const fs::path& out,
                std::size_t jobs, std::ostream& log, std::ostream& err) {
  config.validate();
  const auto records = audio::load_manifest(manifest_path);
  if (records.empty()) {
    err << "no recordings in " << manifest_path.string() << '\n';
    return kConfigError;
  }
  prepare_out(out);
  const fs::path base = manifest_path.parent_path();

  struct Outcome {
    std::optional<features::FeatureVector> vector;
    std::string kind;
    std::string message;
  };
  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const auto& meta = records[i];
    const fs::path path = meta.path.is_absolute() ? meta.path : base / meta.path;
    try {
      const auto clip = audio::decode_wav(path);
      outcomes[i].vector = features::extract_features(clip, meta, config.extraction);
    } catch (const Error& e) {
      outcomes[i].kind = e.kind();
      outcomes[i].message = e.what();
    } catch (const std::exception& e) {
      outcomes[i].kind = "Error";
      outcomes[i].message = e.what();
    }
  });

  std::vector<std::pair<audio::RecordingMeta, features::FeatureVector>> ok;
  std::ostringstream failures;
  failures << "path,kind,message\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& meta = records[i];
    if (outcomes[i].vector) {
      log << "[" << (i + 1) << "/" << records.size() << "] " << meta.path.generic_string() << " ok\n";
      ok.emplace_back(meta, *outcomes[i].vector);
    } else {
      ++failed;
      err << "[" << (i + 1) << "/" << records.size() << "] " << meta.path.generic_string()
          << " FAILED " << outcomes[i].kind << ": " << outcomes[i].message << '\n';
      std::string msg = outcomes[i].message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      failures << meta.path.generic_string() << ',' << outcomes[i].kind << ',' << msg << '\n';
    }
  }

  if (!ok.empty()) {
    const auto matrix = dataset::assemble_matrix(ok);
    std::ostringstream csv;
    dataset::write_matrix_csv(csv, matrix);
    fsutil::write_atomic(out / "features.csv", csv.str());
    log << "rows: " << matrix.row_count() << ", features: " << matrix.feature_count() << '\n';
  }
  if (failed > 0) {
    fsutil::write_atomic(out / "failures.csv", failures.str());
  } else {
    std::error_code ignored;
    fs::remove(out / "failures.csv", ignored);
  }
  write_config(out, config);
  if (failed > 0) {
    err << failed << " of " << records.size() << " recordings failed\n";
    return kPartialFailure;
  }
  return kSuccess;
}

int cmd_analyze(const fs::path& matrix_path, const PipelineConfig& config, const fs::path& out,
                std::ostream& log, std::ostream&) {
  config.validate();
  const auto raw = load_matrix(matrix_path);
  const auto normalized = dataset::normalize(raw);
  const auto& m = normalized.matrix;
  const auto gate = stats::gate_features(m, config.alpha);
  const auto sep = stats::pairwise_separation(m, config.alpha, config.post_hoc);
  if (gate.kept.size() < 2) {
    throw InsufficientDataError("only " + std::to_string(gate.kept.size()) +
                                " feature(s) pass the gate; PCA needs 2");
  }
  const auto pca = stats::pca_fit(m, gate.kept);
  const auto scores = stats::pca_project(pca, m, pca.component_count());

  std::vector<std::string> pc_names;
  std::vector<std::vector<double>> pc_columns(pca.component_count());
  for (std::size_t k = 0; k < pca.component_count(); ++k) {
    pc_names.push_back("PC" + std::to_string(k + 1));
    for (const auto& row : scores) pc_columns[k].push_back(row[k]);
  }
  const auto pc_anova = stats::anova_columns(pc_names, pc_columns, m.labels(), config.alpha);

  prepare_out(out);
  std::ostringstream s;
  dataset::write_matrix_csv(s, m);
  fsutil::write_atomic(out / "normalized.csv", s.str());
  fsutil::write_atomic(out / "normalization.json", dataset::matrix_to_json(normalized));
  s.str("");
  stats::write_anova_csv(s, gate.table);
  fsutil::write_atomic(out / "anova.csv", s.str());
  s.str("");
  stats::write_separation_csv(s, sep);
  fsutil::write_atomic(out / "separation.csv", s.str());
  fsutil::write_atomic(out / "pca.json", stats::pca_to_json(pca));
  s.str("");
  stats::write_anova_csv(s, pc_anova);
  fsutil::write_atomic(out / "pc_anova.csv", s.str());

  std::vector<std::string> useful_pcs;
  for (const auto& r : pc_anova) {
    if (r.kept) useful_pcs.push_back(r.feature);
  }
  std::ostringstream summary;
  summary << "recordings: " << m.row_count() << '\n'
          << "features: " << m.feature_count() << '\n'
          << "alpha: " << dataset::format_number(config.alpha) << '\n'
          << "post-hoc: " << stats::to_string(config.post_hoc) << '\n'
          << "kept: " << gate.kept.size() << '\n'
          << "discarded: " << (gate.discarded.empty() ? "none" : join(gate.discarded, ", ")) << '\n'
          << "emotion pairs separated by some feature: " << sep.covered_pairs() << "/"
          << kEmotionPairCount << '\n'
          << "n_kaiser: " << pca.n_kaiser << '\n'
          << "variance explained by the Kaiser components: "
          << dataset::format_number(pca.n_kaiser ? pca.explained[pca.n_kaiser - 1] : 0.0) << '\n'
          << "components for 90% of the variance: " << pca.components_for(0.9) << '\n'
          << "components separating emotions (ANOVA): "
          << (useful_pcs.empty() ? "none" : join(useful_pcs, ", ")) << '\n';
  fsutil::write_atomic(out / "summary.txt", summary.str());
  write_config(out, config);
  log << summary.str();
  return kSuccess;
}

int cmd_classify(const fs::path& matrix_path, const PipelineConfig& config, const fs::path& out,
                 const std::vector<std::string>& extra_sets, std::size_t jobs, std::ostream& log,
                 std::ostream& err) {
  config.validate();
  const auto raw = load_matrix(matrix_path);
  const auto normalized = dataset::normalize(raw);
  const auto& m = normalized.matrix;
  const auto gate = stats::gate_features(m, config.alpha);
  if (gate.kept.size() < 2) {
    throw InsufficientDataError("only " + std::to_string(gate.kept.size()) +
                                " feature(s) pass the gate; PCA needs 2");
  }
  const auto pca = stats::pca_fit(m, gate.kept);

  auto sets = classify::default_feature_sets(gate.kept, config.use_bpm_nn);
  std::vector<std::string> warnings;
  std::vector<std::string> custom = config.sets;
  custom.insert(custom.end(), extra_sets.begin(), extra_sets.end());
  for (const auto& text : custom) {
    auto set = classify::parse_feature_set(text, &warnings);
    for (const auto& existing : sets) {
      if (existing.name == set.name) throw ConfigError("feature set name '" + set.name + "' is used twice");
    }
    sets.push_back(std::move(set));
  }
  for (const auto& w : warnings) err << "warning: " << w << '\n';

  classify::LooOptions loo;
  loo.svm = config.svm;
  loo.pca_refit = config.pca_refit;
  loo.jobs = jobs;
  const auto table = classify::run_comparison(m, gate.kept, pca, sets, loo);

  prepare_out(out);
  std::ostringstream csv;
  classify::write_comparison_csv(csv, table);
  fsutil::write_atomic(out / "comparison.csv", csv.str());
  fsutil::write_atomic(out / "comparison.json", classify::comparison_to_json(table));

  std::ostringstream summary;
  summary << "set      macro-F1  accuracy\n";
  for (const auto& e : table) {
    std::string name = e.set.name;
    name.resize(std::max<std::size_t>(name.size(), 8), ' ');
    summary << name << ' ' << dataset::format_number(e.report.macro_f1) << "  "
            << dataset::format_number(e.loo.confusion.accuracy()) << '\n';
    if (e.loo.convergence_warnings > 0) {
      err << "warning: set " << e.set.name << ": " << e.loo.convergence_warnings
          << " binary machine(s) hit the sweep cap\n";
    }
  }
  fsutil::write_atomic(out / "summary.txt", summary.str());
  write_config(out, config);
  log << summary.str();
  return kSuccess;
}

}  // namespace affex::pipeline
