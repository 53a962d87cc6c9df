#include "affex/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "affex/error.hpp"

namespace affex::dataset {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Summary summarize_values(std::span<const double> values, std::string_view feature_id) {
  if (values.empty()) {
    throw FeatureUndefinedError(std::string(feature_id),
                                "cannot summarize empty track " + std::string(feature_id));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return {quantile_sorted(sorted, 0.5),
          quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)};
}

Summary summarize_track(const features::FeatureTrack& track) {
  return summarize_values(track.values, track.feature_id);
}

std::size_t LabeledMatrix::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return i;
  }
  throw SchemaError("matrix has no feature " + std::string(name));
}

std::vector<double> LabeledMatrix::column(std::size_t feature) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.values.at(feature));
  return out;
}

std::vector<Emotion> LabeledMatrix::labels() const {
  std::vector<Emotion> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.emotion);
  return out;
}

namespace {

bool row_order(const LabeledRow& a, const LabeledRow& b) {
  if (a.performer_id != b.performer_id) return a.performer_id < b.performer_id;
  return index_of(a.emotion) < index_of(b.emotion);
}

}  // namespace

LabeledMatrix assemble_matrix(
    std::span<const std::pair<audio::RecordingMeta, features::FeatureVector>> vectors) {
  if (vectors.empty()) throw InsufficientDataError("no feature vectors to assemble");
  LabeledMatrix m;
  m.feature_names = vectors.front().second.names();
  for (const auto& [meta, vec] : vectors) {
    if (vec.names() != m.feature_names) {
      throw SchemaError("feature names of " + meta.path.generic_string() +
                        " differ from the first recording");
    }
    m.rows.push_back({meta.performer_id, meta.emotion, vec.values()});
  }
  std::stable_sort(m.rows.begin(), m.rows.end(), row_order);
  return m;
}

NormalizedMatrix normalize(const LabeledMatrix& matrix, const NormalizeOptions& options) {
  NormalizedMatrix out;
  out.matrix = matrix;

  std::map<std::string, std::vector<std::size_t>> by_performer;
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    by_performer[matrix.rows[i].performer_id].push_back(i);
  }
  for (const auto& [performer, idx] : by_performer) {
    if (idx.size() < 2) {
      throw InsufficientDataError("performer '" + performer + "' has " +
                                  std::to_string(idx.size()) + " recording(s); need >= 2");
    }
  }
  std::vector<std::size_t> all(matrix.rows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  auto zscore = [&](std::size_t f, const std::vector<std::size_t>& idx, const std::string& scope) {
    double mean = 0.0;
    for (std::size_t i : idx) mean += matrix.rows[i].values[f];
    mean /= static_cast<double>(idx.size());
    double ss = 0.0;
    for (std::size_t i : idx) {
      const double d = matrix.rows[i].values[f] - mean;
      ss += d * d;
    }
    const double sd = idx.size() > 1 ? std::sqrt(ss / static_cast<double>(idx.size() - 1)) : 0.0;
    const bool degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
    for (std::size_t i : idx) {
      out.matrix.rows[i].values[f] = degenerate ? 0.0 : (matrix.rows[i].values[f] - mean) / sd;
    }
    out.audit.push_back({matrix.feature_names[f], scope, mean, degenerate ? 0.0 : sd, degenerate});
  };

  for (std::size_t f = 0; f < matrix.feature_names.size(); ++f) {
    const bool corpus_wide =
        std::find(options.corpus_wide.begin(), options.corpus_wide.end(),
                  matrix.feature_names[f]) != options.corpus_wide.end();
    if (corpus_wide) {
      if (all.size() < 2) throw InsufficientDataError("corpus-wide scaling needs >= 2 rows");
      zscore(f, all, "*");
    } else {
      for (const auto& [performer, idx] : by_performer) zscore(f, idx, performer);
    }
  }
  return out;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_matrix_csv(std::ostream& out, const LabeledMatrix& matrix) {
  out << "performer,emotion";
  for (const auto& n : matrix.feature_names) out << ',' << n;
  out << '\n';
  for (const auto& r : matrix.rows) {
    out << r.performer_id << ',' << to_string(r.emotion);
    for (double v : r.values) out << ',' << format_number(v);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

LabeledMatrix read_matrix_csv(std::istream& in) {
  LabeledMatrix m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split(line);
    if (m.feature_names.empty()) {
      if (fields.size() < 3 || fields[0] != "performer" || fields[1] != "emotion") {
        throw SchemaError("matrix line " + std::to_string(line_no) +
                          ": header must start with performer,emotion");
      }
      m.feature_names.assign(fields.begin() + 2, fields.end());
      continue;
    }
    if (fields.size() != m.feature_names.size() + 2) {
      throw SchemaError("matrix line " + std::to_string(line_no) + ": expected " +
                        std::to_string(m.feature_names.size() + 2) + " columns, got " +
                        std::to_string(fields.size()));
    }
    const auto emotion = parse_emotion(fields[1]);
    if (!emotion) {
      throw SchemaError("matrix line " + std::to_string(line_no) + ": unknown emotion '" +
                        fields[1] + "'");
    }
    LabeledRow row{fields[0], *emotion, {}};
    for (std::size_t c = 2; c < fields.size(); ++c) {
      try {
        std::size_t used = 0;
        row.values.push_back(std::stod(fields[c], &used));
        if (used != fields[c].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw SchemaError("matrix line " + std::to_string(line_no) + ", column '" +
                          m.feature_names[c - 2] + "': not a number: '" + fields[c] + "'");
      }
      if (!std::isfinite(row.values.back())) {
        throw SchemaError("matrix line " + std::to_string(line_no) + ", column '" +
                          m.feature_names[c - 2] + "': non-finite value");
      }
    }
    m.rows.push_back(std::move(row));
  }
  if (m.feature_names.empty()) throw SchemaError("matrix file has no header");
  return m;
}

std::string matrix_to_json(const NormalizedMatrix& normalized) {
  nlohmann::ordered_json j;
  j["feature_names"] = normalized.matrix.feature_names;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : normalized.matrix.rows) {
    nlohmann::ordered_json row;
    row["performer"] = r.performer_id;
    row["emotion"] = std::string(to_string(r.emotion));
    row["values"] = r.values;
    rows.push_back(std::move(row));
  }
  auto& audit = j["normalization_audit"] = nlohmann::ordered_json::array();
  for (const auto& a : normalized.audit) {
    audit.push_back({{"feature", a.feature},
                     {"scope", a.scope},
                     {"mean", a.mean},
                     {"sd", a.sd},
                     {"degenerate", a.degenerate}});
  }
  return j.dump(2) + "\n";
}

}  // namespace affex::dataset
