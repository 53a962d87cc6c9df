#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affex/dataset.hpp"
#include "affex/labels.hpp"
#include "affex/stats.hpp"

namespace affex::classify {

enum class Kernel { Linear, Rbf };
std::string_view to_string(Kernel kernel);
Kernel parse_kernel(std::string_view text);  // ConfigError on unknown text

struct SvmOptions {
  double C = 1.0;
  Kernel kernel = Kernel::Linear;
  double gamma = 0.0;  // RBF width; 0 means 1 / input dimension
  double tolerance = 1e-6;
  std::size_t max_sweeps = 100000;

  void validate() const;
};

// Box-constrained dual  min 0.5 a'Qa - sum(a),  0 <= a_i <= C,
// Q_ij = y_i y_j K(x_i, x_j), solved by coordinate descent in index order.
struct DualSolution {
  std::vector<double> alphas;
  double objective = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
};
DualSolution solve_dual(const std::vector<std::vector<double>>& q, double C, double tolerance,
                        std::size_t max_sweeps);

struct BinaryMachine {
  Emotion positive = Emotion::Anger;  // lower canonical index, label +1
  Emotion negative = Emotion::Disgust;
  std::vector<double> weights;  // linear kernel only
  double bias = 0.0;
  // Kernel expansion: training inputs and alpha_i * y_i.
  std::vector<std::vector<double>> support;
  std::vector<double> coefficients;
  DualSolution dual;
};

struct SvmModel {
  std::vector<std::string> feature_subset;
  std::vector<Emotion> classes;  // canonical order
  SvmOptions options;
  // Constant appended to every input so the bias is learned as a weight.
  // Set to the RMS norm of the training rows, which keeps predictions
  // invariant when inputs are scaled by c and C by 1/c^2.
  double bias_feature = 1.0;
  double gamma = 0.0;
  std::vector<BinaryMachine> machines;
  std::vector<std::string> warnings;  // ConvergenceWarning messages

  double decision(const BinaryMachine& m, std::span<const double> x) const;
  Emotion predict(std::span<const double> x) const;
};

// One-vs-one training. `required` lists classes that must appear among the
// labels (MissingClassError otherwise); fewer than 2 distinct classes is
// also a MissingClassError.
SvmModel train_svm(const std::vector<std::vector<double>>& x, std::span<const Emotion> y,
                   std::vector<std::string> feature_subset, const SvmOptions& options,
                   std::span<const Emotion> required = {});

struct ConfusionMatrix {
  std::vector<Emotion> classes;
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]

  static ConfusionMatrix for_classes(std::vector<Emotion> classes);
  void add(Emotion truth, Emotion predicted);
  std::size_t row_sum(std::size_t c) const;
  std::size_t column_sum(std::size_t c) const;
  std::size_t total() const;
  double accuracy() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassScore {
  Emotion emotion = Emotion::Anger;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct FScoreReport {
  std::string set_name;
  std::vector<ClassScore> classes;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// DomainError when some class has no true rows.
FScoreReport f_scores(const ConfusionMatrix& cm, std::string set_name = {});

struct FeatureSet {
  enum class Kind { Features, Components };
  std::string name;
  Kind kind = Kind::Features;
  std::vector<std::string> features;  // Kind::Features
  std::size_t components = 0;         // Kind::Components
};

// 24F (all kept features, named after their count), 7PC, 4PC, 3PC, 7F, 4F, 3F.
// With use_bpm_nn the fixed sets take BPM_nn in place of BPM.
std::vector<FeatureSet> default_feature_sets(std::span<const std::string> kept,
                                             bool use_bpm_nn = false);

// "NAME:F1,F2,..." or "NAME:<k>PC". Duplicate names are dropped and reported
// through `warnings`. ConfigError on malformed text.
FeatureSet parse_feature_set(std::string_view text, std::vector<std::string>* warnings = nullptr);

struct LooOptions {
  SvmOptions svm;
  bool pca_refit = true;  // refit PCA on each fold's training rows
  std::size_t jobs = 1;
};

struct LooResult {
  ConfusionMatrix confusion;
  std::vector<Emotion> predictions;  // per matrix row
  std::size_t convergence_warnings = 0;
};

// `pca_features` are the columns PC sets decompose; `full_pca` is used for
// PC sets when options.pca_refit is false.
LooResult leave_one_out(const dataset::LabeledMatrix& matrix, const FeatureSet& set,
                        const LooOptions& options, std::span<const std::string> pca_features = {},
                        const stats::PcaModel* full_pca = nullptr);

struct ComparisonEntry {
  FeatureSet set;
  LooResult loo;
  FScoreReport report;
};

// SubsetError naming the first configured feature absent from `kept`.
std::vector<ComparisonEntry> run_comparison(const dataset::LabeledMatrix& matrix,
                                            std::span<const std::string> kept,
                                            const stats::PcaModel& pca,
                                            std::span<const FeatureSet> sets,
                                            const LooOptions& options);

void write_comparison_csv(std::ostream& out, std::span<const ComparisonEntry> table);
std::string comparison_to_json(std::span<const ComparisonEntry> table);

}  // namespace affex::classify
