#include "affex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "affex/error.hpp"
#include "affex/special.hpp"

namespace affex::stats {
namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sum_sq_dev(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

struct AnovaParts {
  double ssb = 0.0;
  double ssw = 0.0;
  int df_b = 0;
  int df_w = 0;
  bool means_differ = false;
};

AnovaParts anova_parts(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw InsufficientDataError("ANOVA needs at least 2 groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw InsufficientDataError("ANOVA group has fewer than 2 values");
    n += g.size();
    for (double x : g) grand += x;
  }
  grand /= static_cast<double>(n);

  AnovaParts parts;
  const double first_mean = mean_of(groups.front());
  for (const auto& g : groups) {
    const double m = mean_of(g);
    parts.ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    parts.ssw += sum_sq_dev(g, m);
    if (m != first_mean) parts.means_differ = true;
  }
  parts.df_b = static_cast<int>(groups.size()) - 1;
  parts.df_w = static_cast<int>(n - groups.size());
  return parts;
}

}  // namespace

AnovaStat one_way_anova(std::span<const std::vector<double>> groups) {
  const AnovaParts parts = anova_parts(groups);
  if (!(parts.ssw > 0.0)) {
    throw DegenerateGroupsError(parts.means_differ
                                    ? "zero within-group variance: F is infinite"
                                    : "all values identical: F is undefined");
  }
  AnovaStat out;
  out.df_between = parts.df_b;
  out.df_within = parts.df_w;
  out.ms_within = parts.ssw / parts.df_w;
  out.F = (parts.ssb / parts.df_b) / out.ms_within;
  out.p = special::f_sf(out.F, parts.df_b, parts.df_w);
  return out;
}

std::vector<std::vector<double>> group_by_emotion(std::span<const double> values,
                                                  std::span<const Emotion> labels) {
  if (values.size() != labels.size()) throw DomainError("values and labels differ in length");
  std::array<std::vector<double>, kEmotionCount> buckets;
  for (std::size_t i = 0; i < values.size(); ++i) buckets[index_of(labels[i])].push_back(values[i]);
  std::vector<std::vector<double>> out;
  for (auto& b : buckets) {
    if (!b.empty()) out.push_back(std::move(b));
  }
  return out;
}

std::vector<AnovaResult> anova_columns(std::span<const std::string> names,
                                       std::span<const std::vector<double>> columns,
                                       std::span<const Emotion> labels, double alpha) {
  if (names.size() != columns.size()) throw DomainError("names and columns differ in length");
  std::vector<AnovaResult> out;
  out.reserve(names.size());
  for (std::size_t f = 0; f < names.size(); ++f) {
    const auto groups = group_by_emotion(columns[f], labels);
    const AnovaParts parts = anova_parts(groups);
    AnovaResult r;
    r.feature = names[f];
    r.df_between = parts.df_b;
    r.df_within = parts.df_w;
    if (parts.ssw > 0.0) {
      r.F = (parts.ssb / parts.df_b) / (parts.ssw / parts.df_w);
      r.p = special::f_sf(r.F, parts.df_b, parts.df_w);
    } else if (parts.means_differ) {
      r.F = std::numeric_limits<double>::infinity();
      r.p = 0.0;
    } else {
      r.F = 0.0;
      r.p = 1.0;
    }
    r.kept = r.p < alpha;
    out.push_back(std::move(r));
  }
  return out;
}

GateResult gate_features(const dataset::LabeledMatrix& matrix, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  std::vector<std::vector<double>> columns;
  for (std::size_t f = 0; f < matrix.feature_count(); ++f) columns.push_back(matrix.column(f));
  const auto labels = matrix.labels();
  GateResult out;
  out.table = anova_columns(matrix.feature_names, columns, labels, alpha);
  for (const auto& r : out.table) (r.kept ? out.kept : out.discarded).push_back(r.feature);
  return out;
}

// ---- pairwise separation ---------------------------------------------------

const std::array<EmotionPair, kEmotionPairCount>& emotion_pairs() {
  static const auto pairs = [] {
    std::array<EmotionPair, kEmotionPairCount> p{};
    std::size_t k = 0;
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
      for (std::size_t j = i + 1; j < kEmotionCount; ++j) p[k++] = {kAllEmotions[i], kAllEmotions[j]};
    }
    return p;
  }();
  return pairs;
}

std::size_t pair_index(Emotion a, Emotion b) {
  std::size_t i = index_of(a);
  std::size_t j = index_of(b);
  if (i == j) throw DomainError("an emotion pair needs two distinct emotions");
  if (i > j) std::swap(i, j);
  // Pairs before row i: sum_{r<i} (n-1-r)
  return i * (2 * kEmotionCount - i - 1) / 2 + (j - i - 1);
}

std::string pair_name(const EmotionPair& pair) {
  return std::string(to_string(pair.a)) + "-" + std::string(to_string(pair.b));
}

std::string_view to_string(PostHoc method) {
  switch (method) {
    case PostHoc::Welch: return "welch";
    case PostHoc::Bonferroni: return "bonferroni";
    case PostHoc::Tukey: return "tukey";
  }
  return "welch";
}

PostHoc parse_post_hoc(std::string_view text) {
  if (text == "welch") return PostHoc::Welch;
  if (text == "bonferroni") return PostHoc::Bonferroni;
  if (text == "tukey") return PostHoc::Tukey;
  throw ConfigError("unknown post-hoc method '" + std::string(text) +
                    "' (expected welch, bonferroni or tukey)");
}

WelchResult welch_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2) throw InsufficientDataError("Welch test needs >= 2 values per group");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  const double vx = sum_sq_dev(x, mx) / (nx - 1.0) / nx;
  const double vy = sum_sq_dev(y, my) / (ny - 1.0) / ny;
  WelchResult r;
  const double se2 = vx + vy;
  if (!(se2 > 0.0)) {
    r.t = mx == my ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mx - my);
    r.df = nx + ny - 2.0;
    r.p = mx == my ? 1.0 : 0.0;
    return r;
  }
  r.t = (mx - my) / std::sqrt(se2);
  r.df = se2 * se2 / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
  r.p = special::t_two_sided(r.t, r.df);
  return r;
}

bool SeparationMatrix::separated(std::size_t feature, Emotion a, Emotion b) const {
  return flags.at(feature)[pair_index(a, b)];
}

std::array<bool, kEmotionPairCount> SeparationMatrix::coverage() const {
  std::array<bool, kEmotionPairCount> out{};
  for (const auto& row : flags) {
    for (std::size_t k = 0; k < kEmotionPairCount; ++k) out[k] = out[k] || row[k];
  }
  return out;
}

std::size_t SeparationMatrix::covered_pairs() const {
  const auto c = coverage();
  return static_cast<std::size_t>(std::count(c.begin(), c.end(), true));
}

SeparationMatrix pairwise_separation(const dataset::LabeledMatrix& matrix, double alpha,
                                     PostHoc method) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  const auto labels = matrix.labels();
  SeparationMatrix out;
  out.features = matrix.feature_names;

  std::size_t present = 0;
  std::array<std::size_t, kEmotionCount> counts{};
  for (Emotion e : labels) ++counts[index_of(e)];
  for (std::size_t c : counts) present += c > 0 ? 1 : 0;

  for (std::size_t f = 0; f < matrix.feature_count(); ++f) {
    const auto column = matrix.column(f);
    std::array<std::vector<double>, kEmotionCount> groups;
    for (std::size_t i = 0; i < column.size(); ++i) groups[index_of(labels[i])].push_back(column[i]);

    double ms_within = 0.0;
    int df_within = 0;
    if (method == PostHoc::Tukey) {
      std::vector<std::vector<double>> nonempty;
      for (const auto& g : groups) {
        if (!g.empty()) nonempty.push_back(g);
      }
      const AnovaParts parts = anova_parts(nonempty);
      df_within = parts.df_w;
      ms_within = parts.ssw / parts.df_w;
    }

    std::array<double, kEmotionPairCount> p{};
    std::array<bool, kEmotionPairCount> flag{};
    for (std::size_t k = 0; k < kEmotionPairCount; ++k) {
      const auto& pair = emotion_pairs()[k];
      const auto& ga = groups[index_of(pair.a)];
      const auto& gb = groups[index_of(pair.b)];
      if (ga.empty() || gb.empty()) {
        p[k] = 1.0;
        continue;
      }
      switch (method) {
        case PostHoc::Welch:
          p[k] = welch_t_test(ga, gb).p;
          break;
        case PostHoc::Bonferroni:
          p[k] = std::min(1.0, welch_t_test(ga, gb).p * static_cast<double>(kEmotionPairCount));
          break;
        case PostHoc::Tukey: {
          const double diff = std::abs(mean_of(ga) - mean_of(gb));
          if (!(ms_within > 0.0)) {
            p[k] = diff > 0.0 ? 0.0 : 1.0;
            break;
          }
          const double se = std::sqrt(0.5 * ms_within *
                                      (1.0 / static_cast<double>(ga.size()) +
                                       1.0 / static_cast<double>(gb.size())));
          const double q = diff / se;
          p[k] = std::clamp(1.0 - special::studentized_range_cdf(q, static_cast<double>(present),
                                                                 df_within),
                            0.0, 1.0);
          break;
        }
      }
      flag[k] = p[k] < alpha;
    }
    out.p_values.push_back(p);
    out.flags.push_back(flag);
  }
  return out;
}

// ---- PCA ---------------------------------------------------------------------

SymmetricEigen jacobi_eigen(std::vector<std::vector<double>> a, double tol, int max_sweeps) {
  const std::size_t n = a.size();
  for (const auto& row : a) {
    if (row.size() != n) throw DomainError("Jacobi eigen-solver needs a square matrix");
  }
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) s += a[i][j] * a[i][j];
      }
    }
    return std::sqrt(s);
  };

  SymmetricEigen out;
  while (off_norm() >= tol) {
    if (out.sweeps >= max_sweeps) break;
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        a[p][q] = 0.0;
        a[q][p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a[i][i] > a[j][j]; });
  for (std::size_t idx : order) {
    out.values.push_back(a[idx][idx]);
    std::vector<double> vec(n);
    for (std::size_t k = 0; k < n; ++k) vec[k] = v[k][idx];
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

std::size_t PcaModel::components_for(double fraction) const {
  for (std::size_t k = 0; k < explained.size(); ++k) {
    if (explained[k] >= fraction) return k + 1;
  }
  return explained.size();
}

PcaModel pca_fit(const std::vector<std::vector<double>>& rows, std::vector<std::string> names) {
  const std::size_t n = rows.size();
  const std::size_t p = names.size();
  if (n < 2) throw InsufficientDataError("PCA needs at least 2 rows");
  if (p < 2) throw InsufficientDataError("PCA needs at least 2 features");
  for (const auto& r : rows) {
    if (r.size() != p) throw DomainError("PCA row width differs from the feature count");
  }

  PcaModel m;
  m.feature_names = std::move(names);
  m.means.assign(p, 0.0);
  m.sds.assign(p, 0.0);
  for (std::size_t f = 0; f < p; ++f) {
    double s = 0.0;
    for (const auto& r : rows) s += r[f];
    m.means[f] = s / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[f] - m.means[f]) * (r[f] - m.means[f]);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    m.sds[f] = sd > 1e-12 * std::max(1.0, std::abs(m.means[f])) ? sd : 0.0;
  }

  std::vector<std::vector<double>> z(n, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < p; ++f) {
      if (m.sds[f] > 0.0) z[i][f] = (rows[i][f] - m.means[f]) / m.sds[f];
    }
  }
  std::vector<std::vector<double>> corr(p, std::vector<double>(p, 0.0));
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += z[i][a] * z[i][b];
      corr[a][b] = corr[b][a] = s / static_cast<double>(n - 1);
    }
  }

  SymmetricEigen eig = jacobi_eigen(std::move(corr));
  m.eigenvalues = std::move(eig.values);
  m.loadings = std::move(eig.vectors);
  for (auto& vec : m.loadings) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < vec.size(); ++k) {
      if (std::abs(vec[k]) > std::abs(vec[arg])) arg = k;
    }
    if (vec[arg] < 0.0) {
      for (double& x : vec) x = -x;
    }
  }

  double total = 0.0;
  for (double e : m.eigenvalues) total += std::max(e, 0.0);
  double cum = 0.0;
  for (double e : m.eigenvalues) {
    cum += std::max(e, 0.0);
    m.explained.push_back(total > 0.0 ? cum / total : 0.0);
    if (e > 1.0) ++m.n_kaiser;
  }
  return m;
}

PcaModel pca_fit(const dataset::LabeledMatrix& matrix, std::span<const std::string> features) {
  std::vector<std::size_t> idx;
  for (const auto& f : features) idx.push_back(matrix.feature_index(f));
  std::vector<std::vector<double>> rows;
  rows.reserve(matrix.row_count());
  for (const auto& r : matrix.rows) {
    std::vector<double> v;
    v.reserve(idx.size());
    for (std::size_t i : idx) v.push_back(r.values[i]);
    rows.push_back(std::move(v));
  }
  return pca_fit(rows, std::vector<std::string>(features.begin(), features.end()));
}

std::vector<double> pca_project_row(const PcaModel& model, std::span<const double> row,
                                    std::size_t k) {
  if (k < 1 || k > model.component_count()) {
    throw DomainError("projection needs 1 <= k <= " + std::to_string(model.component_count()));
  }
  if (row.size() != model.feature_names.size()) throw DomainError("row width differs from the PCA model");
  std::vector<double> z(row.size(), 0.0);
  for (std::size_t f = 0; f < row.size(); ++f) {
    if (model.sds[f] > 0.0) z[f] = (row[f] - model.means[f]) / model.sds[f];
  }
  std::vector<double> scores(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    double s = 0.0;
    for (std::size_t f = 0; f < z.size(); ++f) s += model.loadings[c][f] * z[f];
    scores[c] = s;
  }
  return scores;
}

std::vector<std::vector<double>> pca_project(const PcaModel& model,
                                             const dataset::LabeledMatrix& matrix,
                                             std::size_t k) {
  std::vector<std::size_t> idx;
  for (const auto& f : model.feature_names) idx.push_back(matrix.feature_index(f));
  std::vector<std::vector<double>> out;
  out.reserve(matrix.row_count());
  std::vector<double> row(idx.size());
  for (const auto& r : matrix.rows) {
    for (std::size_t i = 0; i < idx.size(); ++i) row[i] = r.values[idx[i]];
    out.push_back(pca_project_row(model, row, k));
  }
  return out;
}

// ---- reports -------------------------------------------------------------------

void write_anova_csv(std::ostream& out, std::span<const AnovaResult> table) {
  out << "feature,F,p,kept\n";
  for (const auto& r : table) {
    out << r.feature << ',' << dataset::format_number(r.F) << ',' << dataset::format_number(r.p)
        << ',' << (r.kept ? 1 : 0) << '\n';
  }
}

void write_separation_csv(std::ostream& out, const SeparationMatrix& sep) {
  out << "feature,pair,flag\n";
  for (std::size_t f = 0; f < sep.features.size(); ++f) {
    for (std::size_t k = 0; k < kEmotionPairCount; ++k) {
      out << sep.features[f] << ',' << pair_name(emotion_pairs()[k]) << ','
          << (sep.flags[f][k] ? 1 : 0) << '\n';
    }
  }
}

std::string pca_to_json(const PcaModel& model) {
  nlohmann::ordered_json j;
  j["feature_names"] = model.feature_names;
  j["means"] = model.means;
  j["sds"] = model.sds;
  j["eigenvalues"] = model.eigenvalues;
  j["explained"] = model.explained;
  j["n_kaiser"] = model.n_kaiser;
  j["loadings"] = model.loadings;
  return j.dump(2) + "\n";
}

}  // namespace affex::stats
