#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affex/dataset.hpp"
#include "affex/labels.hpp"

namespace affex::stats {

// ---- one-way ANOVA ----------------------------------------------------------

struct AnovaStat {
  double F = 0.0;
  double p = 1.0;
  int df_between = 0;
  int df_within = 0;
  double ms_within = 0.0;
};

// Classical one-way F test. InsufficientDataError for < 2 groups or a group
// with < 2 values; DegenerateGroupsError when the within-group sum of squares
// is zero (which includes all values identical).
AnovaStat one_way_anova(std::span<const std::vector<double>> groups);

struct AnovaResult {
  std::string feature;
  double F = 0.0;
  double p = 1.0;
  int df_between = 0;
  int df_within = 0;
  bool kept = false;
};

// Splits a column by emotion, canonical order, skipping absent emotions.
std::vector<std::vector<double>> group_by_emotion(std::span<const double> values,
                                                  std::span<const Emotion> labels);

// ANOVA of each named column against the labels. A column with zero
// within-group variance gets p = 1 when it is constant and p = 0 when its
// group means differ, instead of raising.
std::vector<AnovaResult> anova_columns(std::span<const std::string> names,
                                       std::span<const std::vector<double>> columns,
                                       std::span<const Emotion> labels, double alpha);

struct GateResult {
  std::vector<std::string> kept;  // canonical order
  std::vector<std::string> discarded;
  std::vector<AnovaResult> table;  // every feature, kept or not
};

GateResult gate_features(const dataset::LabeledMatrix& matrix, double alpha);

// ---- pairwise separation ---------------------------------------------------

struct EmotionPair {
  Emotion a;
  Emotion b;
};

// The 21 unordered pairs, (Anger, Disgust), (Anger, Fear), ... in canonical order.
const std::array<EmotionPair, kEmotionPairCount>& emotion_pairs();
std::size_t pair_index(Emotion a, Emotion b);  // order-insensitive; DomainError if a == b
std::string pair_name(const EmotionPair& pair);  // "anger-disgust"

enum class PostHoc { Welch, Bonferroni, Tukey };
std::string_view to_string(PostHoc method);
PostHoc parse_post_hoc(std::string_view text);  // ConfigError on unknown text

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Two-sided Welch test. Both variances zero: p = 0 when the means differ,
// p = 1 otherwise. InsufficientDataError for a group with < 2 values.
WelchResult welch_t_test(std::span<const double> x, std::span<const double> y);

struct SeparationMatrix {
  std::vector<std::string> features;
  std::vector<std::array<double, kEmotionPairCount>> p_values;
  std::vector<std::array<bool, kEmotionPairCount>> flags;

  bool separated(std::size_t feature, Emotion a, Emotion b) const;
  // Pairs flagged by at least one feature.
  std::array<bool, kEmotionPairCount> coverage() const;
  std::size_t covered_pairs() const;
};

SeparationMatrix pairwise_separation(const dataset::LabeledMatrix& matrix, double alpha,
                                     PostHoc method = PostHoc::Welch);

// ---- PCA ---------------------------------------------------------------------

struct SymmetricEigen {
  std::vector<double> values;                // descending
  std::vector<std::vector<double>> vectors;  // vectors[k] pairs with values[k]
  int sweeps = 0;
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is < tol.
SymmetricEigen jacobi_eigen(std::vector<std::vector<double>> a, double tol = 1e-12,
                            int max_sweeps = 100);

struct PcaModel {
  std::vector<std::string> feature_names;
  std::vector<double> means;
  std::vector<double> sds;  // sample sd; 0 marks a constant column
  std::vector<double> eigenvalues;
  std::vector<std::vector<double>> loadings;  // loadings[k][feature], unit norm
  std::vector<double> explained;              // cumulative fraction
  std::size_t n_kaiser = 0;

  std::size_t component_count() const { return eigenvalues.size(); }
  // Number of leading components needed to reach `fraction` of the variance.
  std::size_t components_for(double fraction) const;
};

// Correlation-matrix PCA. A constant column standardizes to zeros and adds a
// zero eigenvalue. InsufficientDataError for < 2 rows or < 2 features.
PcaModel pca_fit(const std::vector<std::vector<double>>& rows, std::vector<std::string> names);
PcaModel pca_fit(const dataset::LabeledMatrix& matrix, std::span<const std::string> features);

// Scores on the first k components. `row` is in model feature order.
std::vector<double> pca_project_row(const PcaModel& model, std::span<const double> row,
                                    std::size_t k);
std::vector<std::vector<double>> pca_project(const PcaModel& model,
                                             const dataset::LabeledMatrix& matrix,
                                             std::size_t k);

// ---- reports -------------------------------------------------------------------

void write_anova_csv(std::ostream& out, std::span<const AnovaResult> table);
void write_separation_csv(std::ostream& out, const SeparationMatrix& sep);
std::string pca_to_json(const PcaModel& model);

}  // namespace affex::stats
