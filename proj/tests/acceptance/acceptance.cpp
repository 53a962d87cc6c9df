// Acceptance suite: one PASS/FAIL line per criterion. Usage:
//   affex_acceptance <work dir>
// Criteria 3-5 drive the affex CLI end to end on the default synthetic corpus.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "affex/classify.hpp"
#include "affex/dataset.hpp"
#include "affex/fsutil.hpp"
#include "affex/stats.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace affex;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "FAILED: ") + what);
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int run(const std::string& cmd, const fs::path& log) {
  const std::string full = cmd + " >>" + log.string() + " 2>&1";
  const int status = std::system(full.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = fsutil::read_text(e.path());
  }
  return files;
}

dataset::LabeledMatrix read_matrix(const fs::path& path) {
  std::ifstream in(path);
  return dataset::read_matrix_csv(in);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// synth -> extract -> analyze -> classify under `dir`; returns false on any nonzero exit.
bool run_chain(const fs::path& dir, int jobs) {
  const std::string cli = AFFEX_CLI_PATH;
  const std::string j = " --jobs " + std::to_string(jobs);
  const auto log = dir / "chain.log";
  fs::create_directories(dir);
  return run(cli + " synth --out " + (dir / "corpus").string() + j, log) == 0 &&
         run(cli + " extract " + (dir / "corpus" / "manifest.csv").string() + " --out " +
                 (dir / "extract").string() + j,
             log) == 0 &&
         run(cli + " analyze " + (dir / "extract" / "features.csv").string() + " --out " +
                 (dir / "analyze").string(),
             log) == 0 &&
         run(cli + " classify " + (dir / "extract" / "features.csv").string() + " --out " +
                 (dir / "classify").string() + j,
             log) == 0;
}

// ---- criterion 1 ----

Verdict feature_oracles(const fs::path& work) {
  Verdict v;
  const auto start = Clock::now();
  const auto log = work / "feature_oracles.log";
  fs::remove(log);
  v.check(run(AFFEX_TEST_DSP, log) == 0, "dsp-core examples and properties");
  v.check(run(AFFEX_TEST_FEATURES, log) == 0, "features examples and properties");
  const double t = seconds_since(start);
  v.check(t < 30.0, "runtime " + fmt("%.1f", t) + " s < 30 s");
  return v;
}

// ---- criterion 2 ----

std::vector<std::vector<double>> correlation(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size(), d = rows[0].size();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]) / (n - 1);
  for (double& s : sd) s = std::sqrt(s);
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]) / (sd[a] * sd[b] * (n - 1));
  return c;
}

Verdict statistics_oracles() {
  Verdict v;
  const auto start = Clock::now();

  const auto hand = stats::one_way_anova(std::vector<std::vector<double>>{{1, 2}, {3, 4}});
  v.check(std::abs(hand.F - 8.0) < 1e-12 && std::abs(hand.p - 0.1056) <= 1e-3,
          "ANOVA hand case F = " + fmt("%.6f", hand.F) + ", p = " + fmt("%.4f", hand.p));

  // Balanced n = 20 designs with p in [0.01, 0.5].
  std::mt19937_64 rng(7301);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int checked = 0; checked < 20;) {
    const std::size_t k = rng() % 2 ? 4 : 2;
    std::vector<std::vector<double>> g(k, std::vector<double>(20 / k));
    for (std::size_t i = 0; i < k; ++i) {
      const double shift = 0.7 * static_cast<double>(i) * static_cast<double>(rng() % 2);
      for (double& x : g[i]) x = n01(rng) + shift;
    }
    const double p = stats::one_way_anova(g).p;
    if (p < 0.01 || p > 0.5) continue;
    worst = std::max(worst, std::abs(p - testing::permutation_p(g, 100000, rng)));
    ++checked;
  }
  v.check(worst <= 0.01, "ANOVA vs 1e5-shuffle permutation oracle, 20 instances, max |dp| = " +
                             fmt("%.4f", worst) + " <= 0.01");

  double pca_err = 0.0;
  for (std::size_t n : {10, 12, 70}) {
    const std::size_t d = n == 70 ? 24 : 6;
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& r : rows) {
      for (double& x : r) x = n01(rng);
      for (std::size_t j = 1; j < d; ++j) r[j] += 0.6 * r[j - 1];
    }
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("F" + std::to_string(j));
    const auto model = stats::pca_fit(rows, names);
    const auto r = correlation(rows);
    double trace = 0.0;
    for (double e : model.eigenvalues) trace += e;
    pca_err = std::max(pca_err, std::abs(trace - static_cast<double>(d)));
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        double gram = 0.0, recon = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          gram += model.loadings[a][k] * model.loadings[b][k];
          recon += model.loadings[k][a] * model.eigenvalues[k] * model.loadings[k][b];
        }
        pca_err = std::max(pca_err, std::abs(gram - (a == b ? 1.0 : 0.0)));
        pca_err = std::max(pca_err, std::abs(recon - r[a][b]));
      }
    }
  }
  v.check(pca_err <= 1e-8, "PCA trace, orthonormality, reconstruction: max error " +
                               fmt("%.2e", pca_err) + " <= 1e-8");

  double dual_gap = 0.0;
  for (int problem = 0; problem < 20; ++problem) {
    const double C = problem % 2 ? 1.0 : 0.1 * (1 + problem);
    const auto q = testing::random_dual_problem(20, 3, 0.8, rng);
    const auto sol = classify::solve_dual(q, C, 1e-6, 100000);
    dual_gap = std::max(dual_gap, std::abs(sol.objective - testing::projected_gradient_oracle(q, C, rng)));
  }
  v.check(dual_gap <= 1e-4, "SVM dual objective vs projected-gradient oracle, 20 problems: max gap " +
                                fmt("%.2e", dual_gap) + " <= 1e-4");

  const double t = seconds_since(start);
  v.check(t < 300.0, "runtime " + fmt("%.1f", t) + " s < 300 s");
  return v;
}

// ---- criterion 3 ----

Verdict pipeline_shape(const fs::path& run1) {
  Verdict v;
  const auto start = Clock::now();
  const bool ok = run_chain(run1, 1);
  const double t = seconds_since(start);
  v.check(ok, "synth, extract, analyze, classify exit 0");
  if (!ok) return v;

  const auto m = read_matrix(run1 / "extract" / "features.csv");
  v.check(m.row_count() == 70 && m.feature_count() == 26,
          "matrix " + std::to_string(m.row_count()) + "x" + std::to_string(m.feature_count()) + " = 70x26");

  const auto truth = nlohmann::json::parse(fsutil::read_text(run1 / "corpus" / "truth.json"));
  std::set<std::string> planted, discarded;
  for (const auto& f : truth["planted_null_features"]) planted.insert(f.get<std::string>());
  for (const auto& row : read_csv(run1 / "analyze" / "anova.csv")) {
    if (row.at(3) == "0") discarded.insert(row.at(0));
  }
  std::string names;
  for (const auto& f : discarded) names += (names.empty() ? "" : ",") + f;
  v.check(planted.size() == 2 && discarded == planted, "discarded {" + names + "} = planted nulls");

  std::set<std::string> covered;
  for (const auto& row : read_csv(run1 / "analyze" / "separation.csv")) {
    if (row.at(2) == "1") covered.insert(row.at(1));
  }
  v.check(covered.size() == 21, std::to_string(covered.size()) + "/21 pairs covered");

  const auto table = nlohmann::json::parse(fsutil::read_text(run1 / "classify" / "comparison.json"));
  std::vector<std::string> sets;
  bool sums_ok = true;
  for (const auto& block : table) {
    sets.push_back(block["set"]);
    for (const auto& row : block["confusion"]["counts"]) {
      std::size_t s = 0;
      for (const auto& c : row) s += c.get<std::size_t>();
      sums_ok = sums_ok && s == 10;
    }
  }
  v.check(sums_ok, "LOO confusion row sums all 10");
  std::string set_names;
  for (const auto& s : sets) set_names += (set_names.empty() ? "" : ",") + s;
  v.check(sets == std::vector<std::string>{"24F", "7PC", "4PC", "3PC", "7F", "4F", "3F"},
          "sets " + set_names);
  v.check(t < 300.0, "runtime " + fmt("%.1f", t) + " s < 300 s");
  return v;
}

// ---- criterion 4 ----

Verdict classification_sanity(const fs::path& run1) {
  Verdict v;
  const auto table = nlohmann::json::parse(fsutil::read_text(run1 / "classify" / "comparison.json"));
  double f1 = -1.0;
  for (const auto& block : table) {
    if (block["set"] == "24F") f1 = block["macro"]["f1"];
  }
  v.check(f1 >= 0.95, "24F macro-F1 " + fmt("%.4f", f1) + " >= 0.95");

  // Shuffled labels on the gated, normalized matrix.
  const auto m = read_matrix(run1 / "analyze" / "normalized.csv");
  std::vector<std::string> kept;
  for (const auto& row : read_csv(run1 / "analyze" / "anova.csv")) {
    if (row.at(3) == "1") kept.push_back(row.at(0));
  }
  const classify::FeatureSet set{"24F", classify::FeatureSet::Kind::Features, kept, 0};
  std::mt19937_64 rng(20140901);
  std::vector<double> acc;
  for (int rep = 0; rep < 50; ++rep) {
    auto shuffled = m;
    std::vector<Emotion> y;
    for (const auto& r : m.rows) y.push_back(r.emotion);
    std::shuffle(y.begin(), y.end(), rng);
    for (std::size_t i = 0; i < y.size(); ++i) shuffled.rows[i].emotion = y[i];
    acc.push_back(classify::leave_one_out(shuffled, set, {}).confusion.accuracy());
  }
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / (acc.size() - 1));
  v.check(std::abs(mean - 1.0 / 7.0) <= 3.0 * sd, "shuffled-label accuracy over 50 replicates: mean " +
                                                        fmt("%.4f", mean) + ", sd " + fmt("%.4f", sd) +
                                                        ", |mean - 1/7| <= 3 sd");
  return v;
}

// ---- criterion 5 ----

Verdict determinism(const fs::path& work) {
  Verdict v;
  const bool ok2 = run_chain(work / "run2", 1);
  const bool ok8 = run_chain(work / "run8", 8);
  v.check(ok2 && ok8, "repeat chain (--jobs 1) and parallel chain (--jobs 8) exit 0");
  if (!(ok2 && ok8)) return v;
  for (const char* stage : {"corpus", "extract", "analyze", "classify"}) {
    const auto a = snapshot(work / "run1" / stage);
    v.check(a == snapshot(work / "run2" / stage) && a == snapshot(work / "run8" / stage),
            std::string(stage) + ": " + std::to_string(a.size()) + " files byte-identical");
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "affex_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"1 feature oracle suite", [&] { return feature_oracles(work); }},
      {"2 statistics oracle suite", [] { return statistics_oracles(); }},
      {"3 pipeline shape on the default synthetic corpus", [&] { return pipeline_shape(work / "run1"); }},
      {"4 classification sanity", [&] { return classification_sanity(work / "run1"); }},
      {"5 determinism across runs and --jobs 1 vs 8", [&] { return determinism(work); }},
  };

  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : v.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
