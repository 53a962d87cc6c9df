#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "affex/dataset.hpp"
#include "affex/error.hpp"
#include "affex/features.hpp"

namespace affex {
namespace {

using dataset::LabeledMatrix;

features::FeatureTrack track(std::vector<double> v) {
  features::FeatureTrack t{"X", {}, {}};
  for (std::size_t i = 0; i < v.size(); ++i) t.push(v[i], i);
  return t;
}

// ---- summarize_track ----

TEST(SummarizeTrack, OddLength) {
  const auto s = dataset::summarize_track(track({1, 2, 3, 4, 5}));
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.iqr, 2.0);
}

TEST(SummarizeTrack, SingleValue) {
  const auto s = dataset::summarize_track(track({7}));
  EXPECT_DOUBLE_EQ(s.median, 7.0);
  EXPECT_DOUBLE_EQ(s.iqr, 0.0);
}

TEST(SummarizeTrack, EvenLength) {
  const auto s = dataset::summarize_track(track({4, 1, 3, 2}));
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.iqr, 1.5);  // 3.25 - 1.75
}

TEST(SummarizeTrack, EmptyNamesFeature) {
  features::FeatureTrack empty{"HRD", {}, {}};
  try {
    dataset::summarize_track(empty);
    FAIL() << "expected FeatureUndefinedError";
  } catch (const FeatureUndefinedError& e) {
    EXPECT_EQ(e.feature(), "HRD");
  }
}

TEST(SummarizeTrack, AffineEquivariance) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(1 + rng() % 40);
    for (double& v : x) v = g(rng);
    const double a = g(rng), b = g(rng);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
    const auto sx = dataset::summarize_values(x, "X");
    const auto sy = dataset::summarize_values(y, "X");
    EXPECT_NEAR(sy.median, a * sx.median + b, 1e-9 * (1 + std::abs(sy.median)));
    EXPECT_NEAR(sy.iqr, std::abs(a) * sx.iqr, 1e-9 * (1 + sy.iqr));
  }
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v = {10, 20, 30, 40};
  EXPECT_DOUBLE_EQ(dataset::quantile_sorted(v, 0.0), 10.0);
  EXPECT_DOUBLE_EQ(dataset::quantile_sorted(v, 1.0), 40.0);
  EXPECT_DOUBLE_EQ(dataset::quantile_sorted(v, 1.0 / 3.0), 20.0);
  EXPECT_THROW(dataset::quantile_sorted({}, 0.5), DomainError);
}

// ---- assemble_matrix ----

using Entry = std::pair<audio::RecordingMeta, features::FeatureVector>;

std::vector<Entry> corpus_entries(std::size_t performers, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const auto names = features::canonical_feature_names();
  std::vector<Entry> out;
  for (std::size_t p = 0; p < performers; ++p) {
    for (Emotion e : kAllEmotions) {
      std::vector<double> v(names.size());
      for (double& x : v) x = g(rng);
      char id[8];
      std::snprintf(id, sizeof id, "p%02zu", p);
      out.push_back({{std::string(id) + ".wav", id, e}, features::FeatureVector(names, v)});
    }
  }
  return out;
}

TEST(AssembleMatrix, SeventyBySix) {
  const auto m = dataset::assemble_matrix(corpus_entries(10));
  EXPECT_EQ(m.row_count(), 70u);
  EXPECT_EQ(m.feature_count(), 26u);
}

TEST(AssembleMatrix, SingleRow) {
  const auto entries = corpus_entries(1);
  const auto m = dataset::assemble_matrix(std::span(entries).first(1));
  EXPECT_EQ(m.row_count(), 1u);
  EXPECT_EQ(m.feature_count(), 26u);
}

TEST(AssembleMatrix, MismatchedNames) {
  auto entries = corpus_entries(1);
  entries[3].second = features::FeatureVector({"A"}, {1.0});
  EXPECT_THROW(dataset::assemble_matrix(entries), SchemaError);
}

TEST(AssembleMatrix, EmptyInput) {
  EXPECT_THROW(dataset::assemble_matrix({}), InsufficientDataError);
}

TEST(AssembleMatrix, OrderIsPerformerThenCanonicalEmotion) {
  auto entries = corpus_entries(3);
  std::reverse(entries.begin(), entries.end());
  const auto m = dataset::assemble_matrix(entries);
  for (std::size_t i = 0; i < m.row_count(); ++i) {
    EXPECT_EQ(m.rows[i].emotion, kAllEmotions[i % 7]);
    EXPECT_EQ(m.rows[i].performer_id, "p0" + std::to_string(i / 7));
  }
}

TEST(AssembleMatrix, PermutationInvariant) {
  const auto entries = corpus_entries(4);
  const auto base = dataset::assemble_matrix(entries);
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    auto shuffled = entries;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(dataset::assemble_matrix(shuffled), base);
  }
}

// ---- normalize ----

LabeledMatrix small_matrix(std::vector<std::string> names,
                           std::vector<std::tuple<std::string, Emotion, std::vector<double>>> rows) {
  LabeledMatrix m;
  m.feature_names = std::move(names);
  for (auto& [p, e, v] : rows) m.rows.push_back({p, e, v});
  return m;
}

TEST(Normalize, ZScoreWithinPerformer) {
  const auto m = small_matrix({"X"}, {{"a", Emotion::Anger, {1}},
                                      {"a", Emotion::Fear, {2}},
                                      {"a", Emotion::Sadness, {3}}});
  const auto n = dataset::normalize(m);
  EXPECT_NEAR(n.matrix.rows[0].values[0], -1.0, 1e-12);
  EXPECT_NEAR(n.matrix.rows[1].values[0], 0.0, 1e-12);
  EXPECT_NEAR(n.matrix.rows[2].values[0], 1.0, 1e-12);
  ASSERT_EQ(n.audit.size(), 1u);
  EXPECT_EQ(n.audit[0].scope, "a");
  EXPECT_DOUBLE_EQ(n.audit[0].mean, 2.0);
  EXPECT_DOUBLE_EQ(n.audit[0].sd, 1.0);
}

TEST(Normalize, ConstantFeatureMapsToZeros) {
  const auto m = small_matrix({"X"}, {{"a", Emotion::Anger, {5}},
                                      {"a", Emotion::Fear, {5}},
                                      {"a", Emotion::Sadness, {5}}});
  const auto n = dataset::normalize(m);
  for (const auto& r : n.matrix.rows) EXPECT_EQ(r.values[0], 0.0);
  EXPECT_TRUE(n.audit[0].degenerate);
  EXPECT_EQ(n.audit[0].sd, 0.0);
}

TEST(Normalize, BpmNnIsCorpusWide) {
  const auto m = small_matrix({"BPM", "BPM_nn"}, {{"a", Emotion::Anger, {60, 60}},
                                                  {"a", Emotion::Fear, {120, 120}},
                                                  {"b", Emotion::Anger, {90, 90}},
                                                  {"b", Emotion::Fear, {90, 90}}});
  const auto n = dataset::normalize(m);
  const double z = 30.0 / std::sqrt(600.0);
  EXPECT_NEAR(n.matrix.rows[0].values[1], -z, 1e-12);
  EXPECT_NEAR(n.matrix.rows[1].values[1], z, 1e-12);
  EXPECT_NEAR(n.matrix.rows[2].values[1], 0.0, 1e-12);
  EXPECT_NEAR(n.matrix.rows[3].values[1], 0.0, 1e-12);
  EXPECT_NEAR(z, 1.2247, 1e-4);
  // Per-performer BPM: performer b is constant.
  EXPECT_EQ(n.matrix.rows[2].values[0], 0.0);
  const auto it = std::find_if(n.audit.begin(), n.audit.end(),
                               [](const auto& a) { return a.feature == "BPM_nn"; });
  ASSERT_NE(it, n.audit.end());
  EXPECT_EQ(it->scope, "*");
  EXPECT_NEAR(it->sd, std::sqrt(600.0), 1e-12);
}

TEST(Normalize, LonePerformerRowRejected) {
  const auto m = small_matrix({"X"}, {{"a", Emotion::Anger, {1}},
                                      {"a", Emotion::Fear, {2}},
                                      {"b", Emotion::Anger, {3}}});
  EXPECT_THROW(dataset::normalize(m), InsufficientDataError);
}

TEST(Normalize, MeanZeroUnitSdPerPerformer) {
  const auto n = dataset::normalize(dataset::assemble_matrix(corpus_entries(10, 3)));
  std::map<std::string, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < n.matrix.row_count(); ++i) by[n.matrix.rows[i].performer_id].push_back(i);
  for (std::size_t f = 0; f < n.matrix.feature_count(); ++f) {
    if (n.matrix.feature_names[f] == "BPM_nn") continue;
    for (const auto& [p, idx] : by) {
      double mean = 0.0, ss = 0.0;
      for (auto i : idx) mean += n.matrix.rows[i].values[f];
      mean /= idx.size();
      for (auto i : idx) ss += std::pow(n.matrix.rows[i].values[f] - mean, 2);
      EXPECT_NEAR(mean, 0.0, 1e-9);
      EXPECT_NEAR(std::sqrt(ss / (idx.size() - 1)), 1.0, 1e-9);
    }
  }
}

TEST(Normalize, ReproducibleAndFixedPoint) {
  const auto raw = dataset::assemble_matrix(corpus_entries(5, 8));
  const auto once = dataset::normalize(raw);
  EXPECT_EQ(dataset::normalize(raw).matrix, once.matrix);
  const auto again = dataset::normalize(once.matrix);
  for (std::size_t i = 0; i < raw.row_count(); ++i) {
    for (std::size_t f = 0; f < raw.feature_count(); ++f) {
      EXPECT_NEAR(again.matrix.rows[i].values[f], once.matrix.rows[i].values[f], 1e-9);
    }
  }
}

// ---- serialization ----

TEST(MatrixCsv, RoundTripAtNineDigits) {
  const auto m = dataset::assemble_matrix(corpus_entries(2, 5));
  std::ostringstream out;
  dataset::write_matrix_csv(out, m);
  EXPECT_EQ(out.str().substr(0, 26), "performer,emotion,BPM,BPM_");
  std::istringstream in(out.str());
  const auto back = dataset::read_matrix_csv(in);
  EXPECT_EQ(back.feature_names, m.feature_names);
  ASSERT_EQ(back.row_count(), m.row_count());
  for (std::size_t i = 0; i < m.row_count(); ++i) {
    EXPECT_EQ(back.rows[i].performer_id, m.rows[i].performer_id);
    EXPECT_EQ(back.rows[i].emotion, m.rows[i].emotion);
    for (std::size_t f = 0; f < m.feature_count(); ++f) {
      EXPECT_NEAR(back.rows[i].values[f], m.rows[i].values[f],
                  5e-9 * std::abs(m.rows[i].values[f]));
    }
  }
  // Writing what was read reproduces the bytes.
  std::ostringstream again;
  dataset::write_matrix_csv(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(MatrixCsv, Diagnostics) {
  auto expect_schema = [](const std::string& text, const std::string& fragment) {
    std::istringstream in(text);
    try {
      dataset::read_matrix_csv(in);
      ADD_FAILURE() << "expected SchemaError for: " << text;
    } catch (const SchemaError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  expect_schema("", "no header");
  expect_schema("who,emotion,A\n", "header");
  expect_schema("performer,emotion,A\np1,anger\n", "line 2");
  expect_schema("performer,emotion,A\np1,joy,1\n", "joy");
  expect_schema("performer,emotion,A\np1,anger,x1\n", "column 'A'");
  expect_schema("performer,emotion,A\np1,anger,nan\n", "non-finite");
}

TEST(MatrixJson, CarriesAudit) {
  const auto n = dataset::normalize(dataset::assemble_matrix(corpus_entries(2, 5)));
  const auto j = nlohmann::json::parse(dataset::matrix_to_json(n));
  EXPECT_EQ(j["rows"].size(), 14u);
  EXPECT_EQ(j["feature_names"].size(), 26u);
  EXPECT_EQ(j["normalization_audit"].size(), 25u * 2 + 1);
  EXPECT_EQ(j["rows"][0]["emotion"], "anger");
}

TEST(FormatNumber, NineSignificantDigits) {
  EXPECT_EQ(dataset::format_number(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(dataset::format_number(120.0), "120");
}

}  // namespace
}  // namespace affex
