// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "dominet/commands.hpp"
#include "dominet/config.hpp"
#include "dominet/csv.hpp"
#include "dominet/forest.hpp"
#include "dominet/lasso.hpp"
#include "dominet/metrics.hpp"
#include "dominet/network.hpp"
#include "dominet/preprocess.hpp"
#include "dominet/rng.hpp"
#include "dominet/synth.hpp"
#include "test_util.hpp"

using namespace dominet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- independent oracles ----------------------------------------------------

long double quantile_bisect(long double p) {
  long double lo = -40.0L, hi = 40.0L;
  for (int i = 0; i < 300; ++i) {
    const long double mid = (lo + hi) / 2.0L;
    (0.5L * std::erfc(-mid / std::sqrt(2.0L)) < p ? lo : hi) = mid;
  }
  return (lo + hi) / 2.0L;
}

double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<double>& b,
                 double lambda, const Eigen::VectorXd& psi) {
  const Eigen::Index t = X.rows();
  double rss = 0.0;
  for (Eigen::Index i = 0; i < t; ++i) {
    double fit = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) fit += X(i, static_cast<Eigen::Index>(j)) * b[j];
    rss += (y(i) - fit) * (y(i) - fit);
  }
  double pen = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) pen += psi(static_cast<Eigen::Index>(j)) * std::fabs(b[j]);
  return rss / static_cast<double>(t) + lambda / static_cast<double>(t) * pen;
}

// Grid over [-3, 3]^p followed by compass search with halving steps. The
// objective is convex with a separable nonsmooth part, so coordinate moves
// reach the global minimum.
double grid_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                   const Eigen::VectorXd& psi) {
  const auto p = static_cast<std::size_t>(X.cols());
  const double step = 0.05;
  const int n = static_cast<int>(std::lround(6.0 / step)) + 1;
  std::vector<double> b(p), best(p);
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<int> idx(p, 0);
  while (true) {
    for (std::size_t j = 0; j < p; ++j) b[j] = -3.0 + step * idx[j];
    const double v = objective(X, y, b, lambda, psi);
    if (v < best_val) {
      best_val = v;
      best = b;
    }
    std::size_t j = 0;
    while (j < p && ++idx[j] == n) idx[j++] = 0;
    if (j == p) break;
  }
  for (double h = step; h > 1e-13; h /= 2.0) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::size_t j = 0; j < p; ++j) {
        for (double dir : {1.0, -1.0}) {
          std::vector<double> c = best;
          c[j] += dir * h;
          // also probe the kink at zero when the step crosses it
          if (best[j] != 0.0 && std::fabs(best[j]) < h) c[j] = 0.0;
          const double v = objective(X, y, c, lambda, psi);
          if (v < best_val) {
            best_val = v;
            best = c;
            moved = true;
          }
        }
      }
    }
  }
  return best_val;
}

double kkt_independent(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& b,
                       double lambda, const Eigen::VectorXd& psi) {
  const double t = static_cast<double>(X.rows());
  const Eigen::VectorXd r = y - X * b;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double g = 2.0 / t * X.col(j).dot(r);
    const double bound = lambda / t * psi(j);
    const double v = b(j) != 0.0 ? std::fabs(g - bound * (b(j) > 0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::fabs(g) - bound);
    worst = std::max(worst, v);
  }
  return worst;
}

// ---- criteria ----------------------------------------------------------------

Outcome lasso_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_gap = 0.0, worst_kkt = 0.0;
  bool all_converged = true;
  for (int inst = 0; inst < 25; ++inst) {
    const int p = 1 + inst % 3;
    Rng rng(1000 + static_cast<std::uint64_t>(inst));
    const Eigen::MatrixXd X = testutil::standardize_columns(testutil::gaussian_matrix(rng, 50, p));
    Eigen::VectorXd y = Eigen::VectorXd::Zero(50);
    for (int j = 0; j < p; ++j) y += (0.8 - 0.5 * j) * X.col(j);
    for (int i = 0; i < 50; ++i) y(i) += standard_normal(rng);
    const NodewiseFit fit = fit_rigorous_lasso(y, X, LassoConfig{});
    all_converged = all_converged && fit.converged;
    const std::vector<double> b(fit.beta.data(), fit.beta.data() + p);
    const double got = objective(X, y, b, fit.lambda, fit.psi);
    const double best = grid_oracle(X, y, fit.lambda, fit.psi);
    worst_gap = std::max(worst_gap, got - best);
    worst_kkt = std::max(worst_kkt, kkt_independent(X, y, fit.beta, fit.lambda, fit.psi));
  }
  const double secs = seconds_since(t0);
  return {all_converged && worst_gap <= 1e-8 && worst_kkt <= 1e-6 && secs < 30.0,
          fmt("max objective excess %.3g, max KKT violation %.3g, %.1fs", worst_gap, worst_kkt, secs)};
}

Outcome lambda_formula() {
  double worst = 0.0;
  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    LassoConfig cfg;
    const double n = 20.0 + std::floor(uniform01(rng) * 480.0);
    const std::size_t p = 1 + uniform_index(rng, 200);
    if (k >= 5) {
      cfg.c = 1.0 + uniform01(rng);
      cfg.gamma = 0.005 + 0.3 * uniform01(rng);
    }
    const long double gamma = cfg.gamma ? *cfg.gamma : 0.1L / std::log(static_cast<long double>(n));
    const long double q = quantile_bisect(1.0L - gamma / (2.0L * static_cast<long double>(p)));
    const long double oracle = 2.0L * cfg.c * std::sqrt(static_cast<long double>(n)) * q;
    const double got = rigorous_lambda(n, p, cfg);
    worst = std::max(worst, static_cast<double>(std::fabs((got - oracle) / oracle)));
  }
  return {worst <= 1e-6, fmt("max relative error %.3g over 20 combinations (5 at c=1.1, gamma=0.1/ln n)", worst)};
}

Outcome hand_network() {
  CoefficientMatrix cm;
  cm.unit_ids = {"1", "2", "3"};
  cm.B.resize(3, 3);
  cm.B << 0, 0.5, 0, 0.2, 0, 0, 0, 0, 0;
  const Eigen::Vector3d var(1, 4, 1);
  const ConcentrationMatrix c = concentration(cm, var);
  // dense arithmetic oracle
  double K[3][3];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) K[i][j] = ((i == j ? 1.0 : 0.0) - cm.B(i, j)) / var(i);
  }
  double kerr = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) kerr = std::max(kerr, std::fabs(c.K(i, j) - K[i][j]));
  }
  const double expect[3][3] = {{1, -0.5, 0}, {-0.05, 0.25, 0}, {0, 0, 1}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) kerr = std::max(kerr, std::fabs(c.K(i, j) - expect[i][j]));
  }
  double n_or[3];
  for (int j = 0; j < 3; ++j) n_or[j] = std::sqrt(K[0][j] * K[0][j] + K[1][j] * K[1][j] + K[2][j] * K[2][j]);
  const Eigen::VectorXd norms = column_norms(c);
  double nerr = 0.0;
  for (int j = 0; j < 3; ++j) nerr = std::max(nerr, std::fabs(norms(j) - n_or[j]));
  nerr = std::max({nerr, std::fabs(norms(0) - std::sqrt(1.0025)), std::fabs(norms(1) - std::sqrt(0.3125)),
                   std::fabs(norms(2) - 1.0)});
  // sorted (1.00125, 1.0, 0.55902): ratios 1.00125, 1.78885, so k = 2
  const DominanceRanking r = dominant_count(norms, cm.unit_ids);
  const bool order_ok = r.ordered_units == std::vector<std::string>{"1", "3", "2"};
  const double ratio2 = n_or[2] / n_or[1];
  const bool k_ok = r.k == 2 && std::fabs(r.growth_ratios[1] - ratio2) <= 1e-12;
  return {kerr <= 1e-12 && nerr <= 1e-12 && order_ok && k_ok,
          fmt("K error %.3g, norm error %.3g, k=%zu, order %s", kerr, nerr, r.k, order_ok ? "ok" : "wrong")};
}

Outcome planted_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = true;
  for (std::size_t m = 1; m <= 3; ++m) {
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      SynthPanelSpec spec;
      spec.n_dominant = m;
      spec.seed = seed;
      const SynthPanel data = generate_dominant_panel(spec);
      const NetworkResult res = run_network(data.panel, RunConfig{});
      std::vector<std::string> top(res.ranking.ordered_units.begin(),
                                   res.ranking.ordered_units.begin() + static_cast<std::ptrdiff_t>(m));
      std::sort(top.begin(), top.end());
      hits += res.ranking.k == m && top == data.dominant_ids ? 1 : 0;
    }
    pass = pass && hits >= 90;
    detail += fmt("m=%zu %d/100; ", m, hits);
  }
  const double secs = seconds_since(t0);
  return {pass && secs < 600.0, detail + fmt("%.1fs", secs)};
}

Outcome table_derivations() {
  const MetricSet m = confusion_metrics({13, 15, 5, 41});
  const double e1 = std::fabs(*m.ppv - 0.46428571);
  const double e2 = std::fabs(*m.tpr - 0.72222222);
  const double e3 = std::fabs(*m.npv - 0.89130435);
  const double e4 = std::fabs(*m.tnr - 41.0 / 56.0);
  const double worst = std::max({e1, e2, e3, e4});
  return {worst <= 1e-6,
          fmt("PPV %.6f TPR %.6f NPV %.6f TNR %.6f (TNR = 41/56)", *m.ppv,
              *m.tpr, *m.npv, *m.tnr)};
}

Outcome auc_bruteforce() {
  Rng rng(11);
  int exact = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 2 + uniform_index(rng, 19);
    std::vector<double> s(n);
    std::vector<Label> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, 6)) / 5.0;
      l[i] = i == 0 ? Label::Dominant : (i == 1 ? Label::Follower : (uniform01(rng) < 0.4 ? Label::Dominant : Label::Follower));
    }
    double wins2 = 0.0, pairs = 0.0;  // twice the win count keeps ties integral
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (l[i] != Label::Dominant || l[j] != Label::Follower) continue;
        pairs += 1.0;
        wins2 += s[i] > s[j] ? 2.0 : (s[i] == s[j] ? 1.0 : 0.0);
      }
    }
    exact += roc_auc(s, l).auc == wins2 / (2.0 * pairs) ? 1 : 0;
  }
  return {exact == 50, fmt("%d/50 vectors exactly equal", exact)};
}

std::vector<std::size_t> top_by(const std::vector<double>& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

Outcome forest_signal() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthClassSpec spec;  // 74 units, 375 features, 3 informative, effect 1.5
  const SynthClassification data = generate_classification_data(spec);
  std::vector<std::size_t> planted;
  for (const auto& name : data.informative) {
    planted.push_back(static_cast<std::size_t>(
        std::find(data.features.feature_names.begin(), data.features.feature_names.end(), name) -
        data.features.feature_names.begin()));
  }
  ForestConfig cfg;
  cfg.n_trees = 500;
  cfg.n_runs = 20;
  std::vector<RunResult> runs;
  const RunAggregate agg = multi_run(data.features, cfg, &runs);
  int top5 = 0;
  for (const RunResult& r : runs) {
    const auto top = top_by(r.mda, 5);
    bool all = true;
    for (std::size_t f : planted) all = all && std::find(top.begin(), top.end(), f) != top.end();
    top5 += all ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  const bool auc_ok = agg.auc.mean >= 0.90;
  const bool mda_ok = top5 >= 19;
  return {auc_ok && mda_ok && secs < 300.0,
          fmt("mean OOB AUC %.4f (need >= 0.90: %s); planted in MDA top-5 in %d/20 runs (%s); %.1fs",
              agg.auc.mean, auc_ok ? "ok" : "short", top5, mda_ok ? "ok" : "short", secs)};
}

Outcome null_behavior() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n_runs = 50, reps_per_run = 2;
  ForestConfig cfg;
  cfg.n_trees = 500;
  std::vector<double> aucs;
  std::vector<std::vector<double>> mdas;
  std::vector<double> null_max, null_all;
  for (std::size_t r = 0; r < n_runs; ++r) {
    SynthClassSpec spec;
    spec.effect_size = 0.0;
    spec.seed = 5000 + r;
    const SynthClassification data = generate_classification_data(spec);
    const RunResult run = single_run(data.features, cfg, 9000 + r);
    aucs.push_back(run.auc);
    mdas.push_back(run.mda);
    // label-permuted replicates of the same matrix give the null band
    for (std::size_t k = 0; k < reps_per_run; ++k) {
      FeatureMatrix perm = data.features;
      Rng rng(derive_seed(77, r * reps_per_run + k));
      auto& l = *perm.labels;
      for (std::size_t i = l.size(); i > 1; --i) std::swap(l[i - 1], l[uniform_index(rng, i)]);
      const RunResult nr = single_run(perm, cfg, 20000 + r * reps_per_run + k);
      null_max.push_back(*std::max_element(nr.mda.begin(), nr.mda.end()));
      null_all.insert(null_all.end(), nr.mda.begin(), nr.mda.end());
    }
  }
  const double mean_auc = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(n_runs);
  // Family-wise band: the 1 - alpha quantile of the per-replicate maximum.
  std::sort(null_max.begin(), null_max.end());
  const auto qi = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(null_max.size()))) - 1;
  const double band = null_max[qi];
  // Per-comparison band pooled over exchangeable null features; reported only,
  // since 375 features x 50 runs at alpha 0.01 exceed 5% somewhere by chance.
  std::sort(null_all.begin(), null_all.end());
  const double pointwise =
      null_all[static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(null_all.size()))) - 1];
  const std::size_t p = mdas[0].size();
  std::size_t worst = 0, worst_pointwise = 0;
  for (std::size_t f = 0; f < p; ++f) {
    std::size_t count = 0, count_pw = 0;
    for (const auto& m : mdas) {
      count += m[f] > band ? 1 : 0;
      count_pw += m[f] > pointwise ? 1 : 0;
    }
    worst = std::max(worst, count);
    worst_pointwise = std::max(worst_pointwise, count_pw);
  }
  const double secs = seconds_since(t0);
  const bool auc_ok = mean_auc >= 0.45 && mean_auc <= 0.55;
  const bool band_ok = static_cast<double>(worst) <= 0.05 * static_cast<double>(n_runs);
  return {auc_ok && band_ok,
          fmt("mean OOB AUC %.4f; null band %.4f from %zu permuted replicates; worst feature above band "
              "in %zu/%zu runs (per-feature band %.4f: worst %zu/%zu); %.1fs",
              mean_auc, band, null_max.size(), worst, n_runs, pointwise, worst_pointwise, n_runs, secs)};
}

Outcome preprocessing_contracts() {
  bool ok = true;
  std::string why;
  auto frame = [](const Eigen::MatrixXd& v) {
    FeatureMatrix F;
    for (Eigen::Index i = 0; i < v.rows(); ++i) F.unit_ids.push_back("r" + std::to_string(i));
    for (Eigen::Index j = 0; j < v.cols(); ++j) F.feature_names.push_back("f" + std::to_string(j));
    F.values = v;
    return F;
  };
  Eigen::MatrixXd v(100, 4);
  for (int i = 0; i < 100; ++i) {
    v(i, 0) = i < 95 ? 1.0 : 2.0;
    v(i, 1) = i < 96 ? 1.0 : 2.0;
    v(i, 2) = 7.0;
    v(i, 3) = i;
  }
  const auto nzv = near_zero_variance_filter(frame(v)).second;
  if (nzv.removed_nzv != std::vector<std::string>{"f1", "f2"}) {
    ok = false;
    why += "nzv boundary; ";
  }
  Rng rng(3);
  Eigen::MatrixXd d = testutil::gaussian_matrix(rng, 60, 3);
  d.col(2) = d.col(1);
  if (correlation_prune(frame(d), 0.85).second.removed_corr.size() != 1) {
    ok = false;
    why += "identical pair; ";
  }
  const Eigen::MatrixXd z = testutil::gaussian_matrix(rng, 4000, 3);
  Eigen::MatrixXd chain(4000, 3);
  chain.col(0) = z.col(0);
  chain.col(2) = z.col(1);
  chain.col(1) = 0.9 * z.col(0) + 0.4 * z.col(1) + 0.05 * z.col(2);
  if (correlation_prune(frame(chain), 0.85).second.removed_corr != std::vector<std::string>{"f1"}) {
    ok = false;
    why += "chain; ";
  }
  int idem = 0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    Rng r2(s);
    const Eigen::MatrixXd base = testutil::gaussian_matrix(r2, 50, 6);
    Eigen::MatrixXd m(50, 18);
    for (int j = 0; j < 18; ++j) m.col(j) = base.col(j % 6) + 0.3 * testutil::gaussian_matrix(r2, 50, 1).col(0);
    const FeatureMatrix once = correlation_prune(frame(m), 0.85).first;
    idem += correlation_prune(once, 0.85).second.removed_corr.empty() ? 1 : 0;
  }
  if (idem != 20) ok = false;
  return {ok, fmt("boundary examples %s; idempotent on %d/20 matrices", why.empty() ? "exact" : why.c_str(), idem)};
}

int run_cli(const std::string& args) {
  return testutil::run_command("\"" + std::string(DOMINET_CLI_PATH) + "\" " + args + " >/dev/null 2>&1");
}

Outcome determinism() {
  testutil::TempDir dir;
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  {
    std::ofstream(dir.path() / "c.cfg") << "synth.panel.n_dominant = 2\nforest.n_runs = 4\nforest.n_trees = 200\n"
                                           "tune.enabled = true\ntune.folds = 3\ntune.repeats = 1\n";
  }
  const std::string cfg = " --config " + q(dir.path() / "c.cfg");
  if (run_cli("synth" + cfg + " --out " + q(dir.path() / "s")) != 0) return {false, "synth failed"};
  std::size_t files = 0, same = 0;
  for (const char* cmd : {"network", "classify"}) {
    const fs::path in = dir.path() / "s" / (std::string(cmd) == "network" ? "panel.csv" : "features.csv");
    std::vector<fs::path> outs;
    for (int threads : {1, 4, 8}) {
      const fs::path out = dir.path() / (std::string(cmd) + std::to_string(threads));
      if (run_cli(std::string(cmd) + " " + q(in) + cfg + " --threads " + std::to_string(threads) + " --out " +
                  q(out)) != 0) {
        return {false, std::string(cmd) + " failed"};
      }
      outs.push_back(out);
    }
    for (const auto& entry : fs::directory_iterator(outs[0])) {
      const std::string ref = read_file(entry.path());
      ++files;
      bool eq = true;
      for (std::size_t k = 1; k < outs.size(); ++k) eq = eq && read_file(outs[k] / entry.path().filename()) == ref;
      same += eq ? 1 : 0;
    }
  }
  return {files > 0 && same == files, fmt("%zu/%zu report files byte-identical across 1, 4, 8 threads", same, files)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"lasso oracle equivalence", lasso_oracle},
      {"lambda formula", lambda_formula},
      {"concentration and ranking hand oracle", hand_network},
      {"planted-dominance recovery", planted_recovery},
      {"confusion-table derivations", table_derivations},
      {"AUC brute-force equivalence", auc_bruteforce},
      {"forest signal detection", forest_signal},
      {"null behavior", null_behavior},
      {"preprocessing contracts", preprocessing_contracts},
      {"thread-count determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
