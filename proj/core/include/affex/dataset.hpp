#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "affex/audio_io.hpp"
#include "affex/features.hpp"
#include "affex/labels.hpp"

namespace affex::dataset {

struct Summary {
  double median = 0.0;
  double iqr = 0.0;
};

// Quantile of sorted data by linear interpolation at position p * (n - 1).
double quantile_sorted(std::span<const double> sorted, double p);

// Median and Q3 - Q1. FeatureUndefinedError on an empty track.
Summary summarize_track(const features::FeatureTrack& track);
Summary summarize_values(std::span<const double> values, std::string_view feature_id);

struct LabeledRow {
  std::string performer_id;
  Emotion emotion = Emotion::Neutral;
  std::vector<double> values;

  friend bool operator==(const LabeledRow&, const LabeledRow&) = default;
};

struct LabeledMatrix {
  std::vector<std::string> feature_names;
  std::vector<LabeledRow> rows;

  std::size_t feature_count() const { return feature_names.size(); }
  std::size_t row_count() const { return rows.size(); }
  // SchemaError if absent.
  std::size_t feature_index(std::string_view name) const;
  std::vector<double> column(std::size_t feature) const;
  std::vector<Emotion> labels() const;

  friend bool operator==(const LabeledMatrix&, const LabeledMatrix&) = default;
};

// Rows sorted by performer id, then canonical emotion order.
LabeledMatrix assemble_matrix(
    std::span<const std::pair<audio::RecordingMeta, features::FeatureVector>> vectors);

struct AuditEntry {
  std::string feature;
  std::string scope;  // performer id, or "*" for corpus-wide scaling
  double mean = 0.0;
  double sd = 0.0;
  bool degenerate = false;  // constant within scope, mapped to zeros
};

struct NormalizedMatrix {
  LabeledMatrix matrix;
  std::vector<AuditEntry> audit;
};

struct NormalizeOptions {
  // Features z-scored over all rows jointly; everything else per performer.
  std::vector<std::string> corpus_wide = {"BPM_nn"};
};

// Sample (n-1) z-scores. InsufficientDataError when a performer has < 2 rows.
NormalizedMatrix normalize(const LabeledMatrix& matrix, const NormalizeOptions& options = {});

// Feature matrix CSV: header `performer,emotion,<names>`, 9 significant digits.
void write_matrix_csv(std::ostream& out, const LabeledMatrix& matrix);
LabeledMatrix read_matrix_csv(std::istream& in);

std::string matrix_to_json(const NormalizedMatrix& normalized);

// printf("%.9g")
std::string format_number(double value);

}  // namespace affex::dataset
