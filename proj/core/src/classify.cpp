#include "affex/classify.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "affex/error.hpp"

namespace affex::classify {

std::string_view to_string(Kernel kernel) { return kernel == Kernel::Rbf ? "rbf" : "linear"; }

Kernel parse_kernel(std::string_view text) {
  if (text == "linear") return Kernel::Linear;
  if (text == "rbf") return Kernel::Rbf;
  throw ConfigError("unknown kernel '" + std::string(text) + "' (expected linear or rbf)");
}

void SvmOptions::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("C must be a positive finite number");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
  if (!(tolerance > 0.0)) throw ConfigError("SVM tolerance must be positive");
  if (max_sweeps == 0) throw ConfigError("SVM sweep cap must be positive");
}

DualSolution solve_dual(const std::vector<std::vector<double>>& q, double C, double tolerance,
                        std::size_t max_sweeps) {
  const std::size_t n = q.size();
  DualSolution sol;
  sol.alphas.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // Q a - 1

  while (sol.sweeps < max_sweeps) {
    ++sol.sweeps;
    double max_violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      double pg = g;
      if (sol.alphas[i] <= 0.0) pg = std::min(g, 0.0);
      else if (sol.alphas[i] >= C) pg = std::max(g, 0.0);
      max_violation = std::max(max_violation, std::abs(pg));
      if (pg == 0.0 || !(q[i][i] > 0.0)) continue;
      const double old = sol.alphas[i];
      const double updated = std::clamp(old - g / q[i][i], 0.0, C);
      const double delta = updated - old;
      if (delta == 0.0) continue;
      sol.alphas[i] = updated;
      for (std::size_t j = 0; j < n; ++j) grad[j] += q[j][i] * delta;
    }
    if (max_violation < tolerance) {
      sol.converged = true;
      break;
    }
  }

  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += sol.alphas[i];
    for (std::size_t j = 0; j < n; ++j) quad += sol.alphas[i] * q[i][j] * sol.alphas[j];
  }
  sol.objective = 0.5 * quad - lin;
  return sol;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

double SvmModel::decision(const BinaryMachine& m, std::span<const double> x) const {
  if (options.kernel == Kernel::Linear) return dot(m.weights, x) + m.bias;
  double f = 0.0;
  const double b2 = bias_feature * bias_feature;
  for (std::size_t i = 0; i < m.support.size(); ++i) {
    f += m.coefficients[i] * (std::exp(-gamma * sq_dist(m.support[i], x)) + b2);
  }
  return f;
}

Emotion SvmModel::predict(std::span<const double> x) const {
  if (x.size() != feature_subset.size() && !feature_subset.empty()) {
    throw DomainError("input has " + std::to_string(x.size()) + " values, model expects " +
                      std::to_string(feature_subset.size()));
  }
  std::array<int, kEmotionCount> votes{};
  for (const auto& m : machines) {
    ++votes[index_of(decision(m, x) > 0.0 ? m.positive : m.negative)];
  }
  Emotion best = classes.front();
  for (Emotion e : classes) {
    if (votes[index_of(e)] > votes[index_of(best)]) best = e;
  }
  return best;
}

SvmModel train_svm(const std::vector<std::vector<double>>& x, std::span<const Emotion> y,
                   std::vector<std::string> feature_subset, const SvmOptions& options,
                   std::span<const Emotion> required) {
  options.validate();
  if (x.size() != y.size()) throw DomainError("inputs and labels differ in length");
  if (x.empty()) throw MissingClassError("no training rows");
  const std::size_t dim = x.front().size();
  for (const auto& row : x) {
    if (row.size() != dim) throw DomainError("training rows differ in width");
  }
  if (!feature_subset.empty() && feature_subset.size() != dim) {
    throw DomainError("feature subset size differs from the input width");
  }

  std::array<bool, kEmotionCount> present{};
  for (Emotion e : y) present[index_of(e)] = true;
  for (Emotion e : required) {
    if (!present[index_of(e)]) {
      throw MissingClassError("class '" + std::string(to_string(e)) + "' has no training rows");
    }
  }

  SvmModel model;
  model.feature_subset = std::move(feature_subset);
  model.options = options;
  for (Emotion e : kAllEmotions) {
    if (present[index_of(e)]) model.classes.push_back(e);
  }
  if (model.classes.size() < 2) throw MissingClassError("training rows cover fewer than 2 classes");

  if (options.kernel == Kernel::Linear) {
    double ss = 0.0;
    for (const auto& row : x) ss += dot(row, row);
    const double rms = std::sqrt(ss / static_cast<double>(x.size()));
    model.bias_feature = rms > 0.0 ? rms : 1.0;
  } else {
    model.bias_feature = 1.0;
  }
  model.gamma = options.gamma > 0.0 ? options.gamma : 1.0 / static_cast<double>(std::max<std::size_t>(dim, 1));
  const double b2 = model.bias_feature * model.bias_feature;

  for (std::size_t a = 0; a < model.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
      BinaryMachine m;
      m.positive = model.classes[a];
      m.negative = model.classes[b];
      std::vector<std::size_t> idx;
      std::vector<double> sign;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == m.positive || y[i] == m.negative) {
          idx.push_back(i);
          sign.push_back(y[i] == m.positive ? 1.0 : -1.0);
        }
      }
      const std::size_t n = idx.size();
      std::vector<std::vector<double>> q(n, std::vector<double>(n));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          const double k = options.kernel == Kernel::Linear
                               ? dot(x[idx[i]], x[idx[j]]) + b2
                               : std::exp(-model.gamma * sq_dist(x[idx[i]], x[idx[j]])) + b2;
          q[i][j] = q[j][i] = sign[i] * sign[j] * k;
        }
      }
      m.dual = solve_dual(q, options.C, options.tolerance, options.max_sweeps);
      if (!m.dual.converged) {
        model.warnings.push_back("ConvergenceWarning: " + std::string(to_string(m.positive)) +
                                 " vs " + std::string(to_string(m.negative)) + " stopped after " +
                                 std::to_string(m.dual.sweeps) + " sweeps");
      }
      if (options.kernel == Kernel::Linear) {
        m.weights.assign(dim, 0.0);
        double bias_weight = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double c = m.dual.alphas[i] * sign[i];
          if (c == 0.0) continue;
          for (std::size_t d = 0; d < dim; ++d) m.weights[d] += c * x[idx[i]][d];
          bias_weight += c;
        }
        m.bias = bias_weight * b2;
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          if (m.dual.alphas[i] > 0.0) {
            m.support.push_back(x[idx[i]]);
            m.coefficients.push_back(m.dual.alphas[i] * sign[i]);
          }
        }
      }
      model.machines.push_back(std::move(m));
    }
  }
  return model;
}

// ---- confusion / F-scores ------------------------------------------------------

ConfusionMatrix ConfusionMatrix::for_classes(std::vector<Emotion> classes) {
  ConfusionMatrix cm;
  cm.counts.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
  cm.classes = std::move(classes);
  return cm;
}

void ConfusionMatrix::add(Emotion truth, Emotion predicted) {
  auto pos = [&](Emotion e) {
    const auto it = std::find(classes.begin(), classes.end(), e);
    if (it == classes.end()) throw DomainError("emotion outside the confusion matrix classes");
    return static_cast<std::size_t>(it - classes.begin());
  };
  ++counts[pos(truth)][pos(predicted)];
}

std::size_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t v : counts.at(c)) s += v;
  return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t c) const {
  std::size_t s = 0;
  for (const auto& row : counts) s += row.at(c);
  return s;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) s += row_sum(c);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const std::size_t n = total();
  if (n == 0) return 0.0;
  std::size_t diag = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) diag += counts[c][c];
  return static_cast<double>(diag) / static_cast<double>(n);
}

FScoreReport f_scores(const ConfusionMatrix& cm, std::string set_name) {
  FScoreReport r;
  r.set_name = std::move(set_name);
  for (std::size_t c = 0; c < cm.classes.size(); ++c) {
    const std::size_t rows = cm.row_sum(c);
    if (rows == 0) {
      throw DomainError("class '" + std::string(to_string(cm.classes[c])) +
                        "' has no true rows in the confusion matrix");
    }
    const std::size_t cols = cm.column_sum(c);
    const double tp = static_cast<double>(cm.counts[c][c]);
    ClassScore s;
    s.emotion = cm.classes[c];
    s.precision = cols > 0 ? tp / static_cast<double>(cols) : 0.0;
    s.recall = tp / static_cast<double>(rows);
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    r.classes.push_back(s);
  }
  if (!r.classes.empty()) {
    for (const auto& s : r.classes) {
      r.macro_precision += s.precision;
      r.macro_recall += s.recall;
      r.macro_f1 += s.f1;
    }
    const double k = static_cast<double>(r.classes.size());
    r.macro_precision /= k;
    r.macro_recall /= k;
    r.macro_f1 /= k;
  }
  return r;
}

// ---- feature sets ------------------------------------------------------------------

std::vector<FeatureSet> default_feature_sets(std::span<const std::string> kept, bool use_bpm_nn) {
  using Kind = FeatureSet::Kind;
  auto fixed = [&](std::string name, std::vector<std::string> names) {
    if (use_bpm_nn) {
      for (auto& n : names) {
        if (n == "BPM") n = "BPM_nn";
      }
    }
    return FeatureSet{std::move(name), Kind::Features, std::move(names), 0};
  };
  std::vector<FeatureSet> sets;
  sets.push_back({std::to_string(kept.size()) + "F", Kind::Features,
                  std::vector<std::string>(kept.begin(), kept.end()), 0});
  sets.push_back({"7PC", Kind::Components, {}, 7});
  sets.push_back({"4PC", Kind::Components, {}, 4});
  sets.push_back({"3PC", Kind::Components, {}, 3});
  sets.push_back(fixed("7F", {"BPM", "LOW", "RMS", "ROH_M", "ROH_IQR", "HAE_M", "OER_M"}));
  sets.push_back(fixed("4F", {"BPM", "EBF_IQR", "EBF_M", "HRD_M"}));
  sets.push_back(fixed("3F", {"NSN_IQR", "NOE_M", "T3_M"}));
  return sets;
}

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

FeatureSet parse_feature_set(std::string_view text, std::vector<std::string>* warnings) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("feature set '" + std::string(text) + "' must look like NAME:F1,F2");
  }
  FeatureSet set;
  set.name = trim(text.substr(0, colon));
  if (set.name.empty()) throw ConfigError("feature set has an empty name");
  std::vector<std::string> items;
  std::string_view rest = text.substr(colon + 1);
  while (true) {
    const auto comma = rest.find(',');
    auto item = trim(rest.substr(0, comma));
    if (item.empty()) throw ConfigError("feature set '" + set.name + "' has an empty entry");
    items.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }

  if (items.size() == 1 && items[0].size() > 2 &&
      items[0].compare(items[0].size() - 2, 2, "PC") == 0 &&
      std::all_of(items[0].begin(), items[0].end() - 2,
                  [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; })) {
    set.kind = FeatureSet::Kind::Components;
    set.components = std::stoul(items[0].substr(0, items[0].size() - 2));
    if (set.components == 0) throw ConfigError("feature set '" + set.name + "' needs >= 1 PC");
    return set;
  }
  for (auto& item : items) {
    if (std::find(set.features.begin(), set.features.end(), item) != set.features.end()) {
      if (warnings) warnings->push_back("feature set '" + set.name + "': duplicate '" + item + "' dropped");
      continue;
    }
    set.features.push_back(std::move(item));
  }
  return set;
}

// ---- leave-one-out -------------------------------------------------------------------

namespace {

std::vector<double> pick(std::span<const double> values, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(values[i]);
  return out;
}

}  // namespace

LooResult leave_one_out(const dataset::LabeledMatrix& matrix, const FeatureSet& set,
                        const LooOptions& options, std::span<const std::string> pca_features,
                        const stats::PcaModel* full_pca) {
  options.svm.validate();
  const std::size_t n = matrix.row_count();
  const auto labels = matrix.labels();

  std::vector<Emotion> classes;
  {
    std::array<std::size_t, kEmotionCount> counts{};
    for (Emotion e : labels) ++counts[index_of(e)];
    for (Emotion e : kAllEmotions) {
      if (counts[index_of(e)] == 1) {
        throw MissingClassError("class '" + std::string(to_string(e)) +
                                "' has a single row; leaving it out empties the class");
      }
      if (counts[index_of(e)] > 0) classes.push_back(e);
    }
  }

  std::vector<std::size_t> feature_idx;
  std::vector<std::string> subset_names;
  std::vector<std::size_t> pca_idx;
  std::vector<std::string> pca_names;
  if (set.kind == FeatureSet::Kind::Features) {
    if (set.features.empty()) throw SubsetError("feature set '" + set.name + "' is empty");
    for (const auto& f : set.features) {
      try {
        feature_idx.push_back(matrix.feature_index(f));
      } catch (const SchemaError&) {
        throw SubsetError("feature set '" + set.name + "' names missing feature " + f);
      }
    }
    subset_names = set.features;
  } else {
    if (pca_features.empty()) {
      pca_names = matrix.feature_names;
    } else {
      pca_names.assign(pca_features.begin(), pca_features.end());
    }
    for (const auto& f : pca_names) pca_idx.push_back(matrix.feature_index(f));
    if (set.components < 1 || set.components > pca_names.size()) {
      throw SubsetError("feature set '" + set.name + "' asks for " + std::to_string(set.components) +
                        " PCs of " + std::to_string(pca_names.size()) + " features");
    }
    if (!options.pca_refit && full_pca == nullptr) {
      throw ConfigError("pca_refit=false needs a PCA model fit on the full matrix");
    }
    for (std::size_t k = 0; k < set.components; ++k) subset_names.push_back("PC" + std::to_string(k + 1));
  }

  std::vector<Emotion> predictions(n, Emotion::Anger);
  std::vector<std::size_t> warnings(n, 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};

  auto run_fold = [&](std::size_t held) {
    std::vector<std::vector<double>> train;
    std::vector<Emotion> train_y;
    std::vector<double> test;
    if (set.kind == FeatureSet::Kind::Features) {
      for (std::size_t i = 0; i < n; ++i) {
        if (i == held) continue;
        train.push_back(pick(matrix.rows[i].values, feature_idx));
        train_y.push_back(labels[i]);
      }
      test = pick(matrix.rows[held].values, feature_idx);
    } else {
      std::vector<std::vector<double>> raw;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == held) continue;
        raw.push_back(pick(matrix.rows[i].values, pca_idx));
        train_y.push_back(labels[i]);
      }
      const auto held_raw = pick(matrix.rows[held].values, pca_idx);
      stats::PcaModel fold_pca;
      const stats::PcaModel* pca = full_pca;
      if (options.pca_refit) {
        fold_pca = stats::pca_fit(raw, pca_names);
        pca = &fold_pca;
      }
      for (const auto& r : raw) train.push_back(stats::pca_project_row(*pca, r, set.components));
      test = stats::pca_project_row(*pca, held_raw, set.components);
    }
    const auto model = train_svm(train, train_y, subset_names, options.svm, classes);
    predictions[held] = model.predict(test);
    warnings[held] = model.warnings.size();
  };

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        run_fold(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  LooResult result;
  result.confusion = ConfusionMatrix::for_classes(classes);
  result.predictions = std::move(predictions);
  for (std::size_t i = 0; i < n; ++i) {
    result.confusion.add(labels[i], result.predictions[i]);
    result.convergence_warnings += warnings[i];
  }
  return result;
}

std::vector<ComparisonEntry> run_comparison(const dataset::LabeledMatrix& matrix,
                                            std::span<const std::string> kept,
                                            const stats::PcaModel& pca,
                                            std::span<const FeatureSet> sets,
                                            const LooOptions& options) {
  for (const auto& set : sets) {
    if (set.kind == FeatureSet::Kind::Features) {
      for (const auto& f : set.features) {
        if (std::find(kept.begin(), kept.end(), f) == kept.end()) {
          throw SubsetError("feature set '" + set.name + "' uses " + f +
                            ", which is not among the kept features");
        }
      }
    } else if (set.components > pca.component_count()) {
      throw SubsetError("feature set '" + set.name + "' asks for " +
                        std::to_string(set.components) + " PCs; the model has " +
                        std::to_string(pca.component_count()));
    }
  }
  std::vector<ComparisonEntry> out;
  for (const auto& set : sets) {
    ComparisonEntry e;
    e.set = set;
    e.loo = leave_one_out(matrix, set, options, kept, &pca);
    e.report = f_scores(e.loo.confusion, set.name);
    out.push_back(std::move(e));
  }
  return out;
}

void write_comparison_csv(std::ostream& out, std::span<const ComparisonEntry> table) {
  out << "set,class,precision,recall,f1\n";
  for (const auto& e : table) {
    for (const auto& s : e.report.classes) {
      out << e.set.name << ',' << to_string(s.emotion) << ',' << dataset::format_number(s.precision)
          << ',' << dataset::format_number(s.recall) << ',' << dataset::format_number(s.f1) << '\n';
    }
    out << e.set.name << ",macro," << dataset::format_number(e.report.macro_precision) << ','
        << dataset::format_number(e.report.macro_recall) << ','
        << dataset::format_number(e.report.macro_f1) << '\n';
  }
}

std::string comparison_to_json(std::span<const ComparisonEntry> table) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& e : table) {
    nlohmann::ordered_json block;
    block["set"] = e.set.name;
    if (e.set.kind == FeatureSet::Kind::Features) {
      block["features"] = e.set.features;
    } else {
      block["components"] = e.set.components;
    }
    std::vector<std::string> classes;
    for (Emotion c : e.loo.confusion.classes) classes.emplace_back(to_string(c));
    block["confusion"] = {{"classes", classes}, {"counts", e.loo.confusion.counts}};
    block["accuracy"] = e.loo.confusion.accuracy();
    auto& scores = block["scores"] = nlohmann::ordered_json::array();
    for (const auto& s : e.report.classes) {
      scores.push_back({{"class", std::string(to_string(s.emotion))},
                        {"precision", s.precision},
                        {"recall", s.recall},
                        {"f1", s.f1}});
    }
    block["macro"] = {{"precision", e.report.macro_precision},
                      {"recall", e.report.macro_recall},
                      {"f1", e.report.macro_f1}};
    block["convergence_warnings"] = e.loo.convergence_warnings;
    j.push_back(std::move(block));
  }
  return j.dump(2) + "\n";
}

}  // namespace affex::classify
