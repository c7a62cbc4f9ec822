#include "dominet/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "dominet/csv.hpp"
#include "dominet/error.hpp"
#include "dominet/parallel.hpp"

namespace dominet {
namespace {

constexpr std::uint64_t kTreeStream = 1;
constexpr std::uint64_t kMdaStream = 2;
constexpr std::uint64_t kFoldStream = 3;
constexpr std::uint64_t kCvForestStream = 4;

constexpr char kDumpMagic[8] = {'D', 'O', 'M', 'I', 'N', 'E', 'T', 'F'};
constexpr std::uint32_t kDumpVersion = 1;

struct ClassCounts {
  std::size_t follower = 0;
  std::size_t dominant = 0;
};

ClassCounts count_classes(std::span<const Label> labels) {
  ClassCounts c;
  for (auto l : labels) (l == Label::Dominant ? c.dominant : c.follower) += 1;
  return c;
}

double correctness(double vote, Label truth) {
  return truth == Label::Dominant ? vote : 1.0 - vote;
}

void check_forest_inputs(const FeatureMatrix& F, const ForestConfig& cfg) {
  F.validate();
  const auto& labels = F.require_labels();
  if (F.features() < 1) throw Error(ErrorCode::Dimension, "forest needs at least one feature");
  cfg.validate(F.features());
  const auto counts = count_classes(labels);
  if (counts.dominant == 0 || counts.follower == 0) {
    throw Error(ErrorCode::Class, "forest needs both dominant and follower units");
  }
  if (cfg.stratified && (counts.dominant < 2 || counts.follower < 2)) {
    throw Error(ErrorCode::Stratification,
                "stratified bootstrap needs at least 2 units per class (dominant " +
                    std::to_string(counts.dominant) + ", follower " +
                    std::to_string(counts.follower) + ")");
  }
}

Tree grow_tree(const FeatureMatrix& F, const ForestConfig& cfg, std::size_t t) {
  Rng rng(derive_seed(cfg.seed, t, kTreeStream));
  const auto& labels = *F.labels;
  auto inbag = bootstrap_inbag(labels, cfg.stratified, rng);
  return fit_tree(F.values, labels, std::move(inbag), cfg, rng);
}

void aggregate_oob(ForestModel& model, const FeatureMatrix& F) {
  const std::size_t m = F.units();
  std::vector<double> votes(m, 0.0);
  model.oob_coverage.assign(m, 0);
  for (const auto& tree : model.trees) {
    for (std::size_t i = 0; i < m; ++i) {
      if (tree.inbag[i] != 0) continue;
      votes[i] += tree.vote_row(F.values, static_cast<Eigen::Index>(i));
      ++model.oob_coverage[i];
    }
  }
  model.oob_probabilities.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    model.oob_probabilities[i] =
        model.oob_coverage[i] > 0
            ? votes[i] / static_cast<double>(model.oob_coverage[i])
            : std::numeric_limits<double>::quiet_NaN();
  }
}

ForestModel make_model(const FeatureMatrix& F, const ForestConfig& cfg) {
  ForestModel model;
  model.config = cfg;
  model.config.mtry = cfg.resolved_mtry(F.features());
  model.feature_names = F.feature_names;
  model.labels = *F.labels;
  model.trees.resize(cfg.n_trees);
  return model;
}

// Features ordered by descending score; ties keep the lower index first.
std::vector<std::size_t> rank_desc(const std::vector<double>& score) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  return idx;
}

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::Parse, "truncated forest dump");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ULL << 32)) throw Error(ErrorCode::Parse, "corrupt forest dump");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error(ErrorCode::Parse, "truncated forest dump");
  return s;
}

}  // namespace

std::size_t ForestConfig::resolved_mtry(std::size_t p) const {
  if (mtry != 0) return mtry;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))));
}

void ForestConfig::validate(std::size_t p) const {
  if (n_trees < 1) throw Error(ErrorCode::Spec, "n_trees must be >= 1");
  if (n_runs < 1) throw Error(ErrorCode::Spec, "n_runs must be >= 1");
  if (min_node_size < 1) throw Error(ErrorCode::Spec, "min_node_size must be >= 1");
  if (resolved_mtry(p) > p) {
    throw Error(ErrorCode::Spec, "mtry " + std::to_string(mtry) +
                                     " exceeds the feature count " + std::to_string(p));
  }
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

std::vector<std::size_t> ForestModel::uncovered_units() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < oob_coverage.size(); ++i) {
    if (oob_coverage[i] == 0) out.push_back(i);
  }
  return out;
}

std::vector<std::uint32_t> bootstrap_inbag(std::span<const Label> labels,
                                           bool stratified, Rng& rng) {
  std::vector<std::uint32_t> inbag(labels.size(), 0);
  if (!stratified) {
    for (std::size_t k = 0; k < labels.size(); ++k) {
      ++inbag[uniform_index(rng, labels.size())];
    }
    return inbag;
  }
  for (Label cls : {Label::Follower, Label::Dominant}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      ++inbag[members[uniform_index(rng, members.size())]];
    }
  }
  return inbag;
}

Tree fit_tree(const Eigen::MatrixXd& X, std::span<const Label> labels,
              std::vector<std::uint32_t> inbag, const ForestConfig& cfg, Rng& rng) {
  const std::size_t m = labels.size();
  const auto p = static_cast<std::size_t>(X.cols());
  if (inbag.size() != m || static_cast<std::size_t>(X.rows()) != m) {
    throw Error(ErrorCode::Dimension, "in-bag vector, labels and data disagree in size");
  }
  std::vector<std::size_t> samples;
  double root_weight = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (inbag[i] > 0) {
      samples.push_back(i);
      root_weight += inbag[i];
    }
  }
  if (samples.empty()) throw Error(ErrorCode::Sampling, "empty in-bag sample");
  const std::size_t mtry = cfg.resolved_mtry(p);
  if (mtry > p) throw Error(ErrorCode::Spec, "mtry exceeds the feature count");
  const auto min_node = static_cast<double>(cfg.min_node_size);

  Tree tree;
  tree.inbag = std::move(inbag);
  tree.nodes.emplace_back();

  struct Pending {
    std::size_t node, begin, end;
  };
  std::vector<Pending> stack{{0, 0, samples.size()}};
  std::vector<std::size_t> pool(p);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  struct Entry {
    double value;
    std::size_t unit;
  };
  std::vector<Entry> buf;

  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    double c0 = 0.0, c1 = 0.0;
    for (std::size_t q = cur.begin; q < cur.end; ++q) {
      const std::size_t u = samples[q];
      (labels[u] == Label::Dominant ? c1 : c0) += tree.inbag[u];
    }
    tree.nodes[cur.node].count_follower = c0;
    tree.nodes[cur.node].count_dominant = c1;
    const double n = c0 + c1;
    if (c0 == 0.0 || c1 == 0.0 || n < 2.0 * min_node) continue;

    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t j = k + uniform_index(rng, p - k);
      std::swap(pool[k], pool[j]);
    }

    bool found = false;
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t f = pool[k];
      const auto col = static_cast<Eigen::Index>(f);
      buf.clear();
      for (std::size_t q = cur.begin; q < cur.end; ++q) {
        buf.push_back({X(static_cast<Eigen::Index>(samples[q]), col), samples[q]});
      }
      std::sort(buf.begin(), buf.end(), [](const Entry& a, const Entry& b) {
        return a.value < b.value || (a.value == b.value && a.unit < b.unit);
      });
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t q = 0; q + 1 < buf.size(); ++q) {
        const std::size_t u = buf[q].unit;
        (labels[u] == Label::Dominant ? l1 : l0) += tree.inbag[u];
        if (!(buf[q].value < buf[q + 1].value)) continue;
        const double nl = l0 + l1;
        const double nr = n - nl;
        if (nl < min_node || nr < min_node) continue;
        const double r0 = c0 - l0, r1 = c1 - l1;
        const double score = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr;
        const double a = buf[q].value, b = buf[q + 1].value;
        double thr = a + (b - a) / 2.0;
        if (!(thr < b) || thr < a) thr = a;
        const bool better =
            !found || score > best_score ||
            (score == best_score &&
             (f < best_feature || (f == best_feature && thr < best_threshold)));
        if (better) {
          found = true;
          best_score = score;
          best_feature = f;
          best_threshold = thr;
        }
      }
    }
    if (!found) continue;

    const double parent_term = (c0 * c0 + c1 * c1) / n;
    auto& node = tree.nodes[cur.node];
    node.feature = static_cast<std::int32_t>(best_feature);
    node.threshold = best_threshold;
    node.impurity_decrease = std::max(0.0, best_score - parent_term) / root_weight;

    const auto col = static_cast<Eigen::Index>(best_feature);
    const auto mid_it = std::stable_partition(
        samples.begin() + static_cast<std::ptrdiff_t>(cur.begin),
        samples.begin() + static_cast<std::ptrdiff_t>(cur.end),
        [&](std::size_t u) { return X(static_cast<Eigen::Index>(u), col) <= best_threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - samples.begin());

    const auto left = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    tree.nodes[cur.node].left = left;
    tree.nodes[cur.node].right = left + 1;
    stack.push_back({static_cast<std::size_t>(left) + 1, mid, cur.end});
    stack.push_back({static_cast<std::size_t>(left), cur.begin, mid});
  }
  return tree;
}

ForestModel fit_forest(const FeatureMatrix& F, const ForestConfig& cfg) {
  check_forest_inputs(F, cfg);
  ForestModel model = make_model(F, cfg);
  parallel::for_each_index(model.trees.size(), [&](std::size_t t) {
    model.trees[t] = grow_tree(F, model.config, t);
  });
  aggregate_oob(model, F);
  return model;
}

ForestModel fit_forest_serial(const FeatureMatrix& F, const ForestConfig& cfg) {
  check_forest_inputs(F, cfg);
  ForestModel model = make_model(F, cfg);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    model.trees[t] = grow_tree(F, model.config, t);
  }
  aggregate_oob(model, F);
  return model;
}

std::vector<double> predict_proba(const ForestModel& model, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != model.feature_names.size()) {
    throw Error(ErrorCode::Dimension, "prediction data has the wrong feature count");
  }
  std::vector<double> out(static_cast<std::size_t>(X.rows()), 0.0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double votes = 0.0;
    for (const auto& tree : model.trees) votes += tree.vote_row(X, i);
    out[static_cast<std::size_t>(i)] = votes / static_cast<double>(model.trees.size());
  }
  return out;
}

std::vector<double> mdi_importance(const ForestModel& model) {
  std::vector<double> total(model.feature_names.size(), 0.0);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0) total[static_cast<std::size_t>(node.feature)] += node.impurity_decrease;
    }
  }
  for (double& v : total) v /= static_cast<double>(model.trees.size());
  return total;
}

std::vector<bool> split_usage(const ForestModel& model) {
  std::vector<bool> used(model.feature_names.size(), false);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0) used[static_cast<std::size_t>(node.feature)] = true;
    }
  }
  return used;
}

std::vector<double> mda_importance(const ForestModel& model, const FeatureMatrix& F,
                                   std::uint64_t seed) {
  const auto& X = F.values;
  const std::size_t p = model.feature_names.size();
  if (static_cast<std::size_t>(X.cols()) != p || F.units() != model.labels.size()) {
    throw Error(ErrorCode::Dimension, "MDA data does not match the fitted forest");
  }
  const auto& labels = model.labels;
  struct TreeDrop {
    bool has_oob = false;
    std::vector<std::pair<std::size_t, double>> drops;
  };
  std::vector<TreeDrop> per_tree(model.trees.size());

  parallel::for_each_index(model.trees.size(), [&](std::size_t t) {
    const Tree& tree = model.trees[t];
    std::vector<std::size_t> oob;
    for (std::size_t i = 0; i < tree.inbag.size(); ++i) {
      if (tree.inbag[i] == 0) oob.push_back(i);
    }
    if (oob.empty()) return;
    per_tree[t].has_oob = true;
    double base = 0.0;
    for (std::size_t u : oob) {
      base += correctness(tree.vote_row(X, static_cast<Eigen::Index>(u)), labels[u]);
    }
    std::vector<std::size_t> features;
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0) features.push_back(static_cast<std::size_t>(node.feature));
    }
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());

    Rng rng(derive_seed(seed, t, kMdaStream));
    std::vector<std::size_t> perm;
    for (std::size_t f : features) {
      perm = oob;
      for (std::size_t k = perm.size(); k > 1; --k) {
        std::swap(perm[k - 1], perm[uniform_index(rng, k)]);
      }
      const auto fi = static_cast<std::int32_t>(f);
      double permuted = 0.0;
      for (std::size_t k = 0; k < oob.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(oob[k]);
        const auto donor = static_cast<Eigen::Index>(perm[k]);
        const double v = tree.vote([&](std::int32_t feat) {
          return feat == fi ? X(donor, feat) : X(row, feat);
        });
        permuted += correctness(v, labels[oob[k]]);
      }
      per_tree[t].drops.emplace_back(f, (base - permuted) / static_cast<double>(oob.size()));
    }
  });

  std::vector<double> total(p, 0.0);
  std::size_t trees_with_oob = 0;
  for (const auto& td : per_tree) {
    if (!td.has_oob) continue;
    ++trees_with_oob;
    for (const auto& [f, d] : td.drops) total[f] += d;
  }
  if (trees_with_oob > 0) {
    for (double& v : total) v /= static_cast<double>(trees_with_oob);
  }
  return total;
}

RunResult single_run(const FeatureMatrix& F, const ForestConfig& cfg,
                     std::uint64_t run_seed) {
  ForestConfig run_cfg = cfg;
  run_cfg.seed = run_seed;
  const ForestModel model = fit_forest(F, run_cfg);

  RunResult r;
  r.seed = run_seed;
  r.mdi = mdi_importance(model);
  r.mda = mda_importance(model, F, run_seed);
  r.used = split_usage(model);
  r.oob_probabilities = model.oob_probabilities;

  std::vector<double> scores;
  std::vector<Label> truth;
  for (std::size_t i = 0; i < F.units(); ++i) {
    if (model.oob_coverage[i] == 0) {
      ++r.uncovered;
      continue;
    }
    const double prob = model.oob_probabilities[i];
    scores.push_back(prob);
    truth.push_back(model.labels[i]);
    const bool predicted = prob > 0.5;
    const bool actual = model.labels[i] == Label::Dominant;
    if (predicted && actual) r.confusion.tp += 1.0;
    else if (predicted) r.confusion.fp += 1.0;
    else if (actual) r.confusion.fn += 1.0;
    else r.confusion.tn += 1.0;
  }
  r.oob_error = r.confusion.total() > 0.0
                    ? (r.confusion.fp + r.confusion.fn) / r.confusion.total()
                    : std::numeric_limits<double>::quiet_NaN();
  const auto present = count_classes(truth);
  if (present.dominant > 0 && present.follower > 0) {
    r.auc = roc_auc(scores, truth).auc;
    r.cutoff = optimal_cutoff(scores, truth);
  } else {
    r.auc = std::numeric_limits<double>::quiet_NaN();
    r.cutoff.threshold = std::numeric_limits<double>::quiet_NaN();
    r.cutoff.youden_j = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

RunAggregate multi_run(const FeatureMatrix& F, const ForestConfig& cfg,
                       std::vector<RunResult>* runs) {
  check_forest_inputs(F, cfg);
  const std::size_t p = F.features();
  RunAggregate agg;
  agg.n_runs = cfg.n_runs;
  agg.n_units = F.units();
  agg.feature_names = F.feature_names;
  agg.mdi_mean.assign(p, 0.0);
  agg.mda_mean.assign(p, 0.0);
  agg.topk_frequency.assign(p, 0);

  std::vector<double> prob_sum(F.units(), 0.0);
  std::vector<std::size_t> prob_count(F.units(), 0);
  std::vector<double> auc, err, ppv, npv, tpr, tnr, bal, thr, youden;
  const std::size_t k = std::min(cfg.top_k, p);
  for (std::size_t run = 0; run < cfg.n_runs; ++run) {
    RunResult r = single_run(F, cfg, cfg.seed + run);
    for (std::size_t j = 0; j < p; ++j) {
      agg.mdi_mean[j] += r.mdi[j];
      agg.mda_mean[j] += r.mda[j];
    }
    if (cfg.frequency_mode == FrequencyMode::TopKByMdi) {
      const auto order = rank_desc(r.mdi);
      for (std::size_t q = 0; q < k; ++q) ++agg.topk_frequency[order[q]];
    } else {
      for (std::size_t j = 0; j < p; ++j) agg.topk_frequency[j] += r.used[j] ? 1 : 0;
    }
    agg.confusion_mean.tp += r.confusion.tp;
    agg.confusion_mean.fp += r.confusion.fp;
    agg.confusion_mean.fn += r.confusion.fn;
    agg.confusion_mean.tn += r.confusion.tn;
    if (r.uncovered > 0) ++agg.runs_with_uncovered_units;
    for (std::size_t i = 0; i < F.units(); ++i) {
      if (std::isnan(r.oob_probabilities[i])) continue;
      prob_sum[i] += r.oob_probabilities[i];
      ++prob_count[i];
    }
    if (!std::isnan(r.auc)) {
      auc.push_back(r.auc);
      thr.push_back(r.cutoff.threshold);
      youden.push_back(r.cutoff.youden_j);
    }
    if (!std::isnan(r.oob_error)) err.push_back(r.oob_error);
    if (r.confusion.total() > 0.0) {
      const MetricSet m = confusion_metrics(r.confusion);
      if (m.ppv) ppv.push_back(*m.ppv);
      if (m.npv) npv.push_back(*m.npv);
      if (m.tpr) tpr.push_back(*m.tpr);
      if (m.tnr) tnr.push_back(*m.tnr);
      if (m.balanced_accuracy) bal.push_back(*m.balanced_accuracy);
    }
    if (runs) runs->push_back(std::move(r));
  }
  const auto n = static_cast<double>(cfg.n_runs);
  for (std::size_t j = 0; j < p; ++j) {
    agg.mdi_mean[j] /= n;
    agg.mda_mean[j] /= n;
  }
  agg.mean_oob_probability.resize(F.units());
  for (std::size_t i = 0; i < F.units(); ++i) {
    agg.mean_oob_probability[i] =
        prob_count[i] > 0 ? prob_sum[i] / static_cast<double>(prob_count[i])
                          : std::numeric_limits<double>::quiet_NaN();
  }
  auto& cm = agg.confusion_mean;
  cm.tp /= n;
  cm.fp /= n;
  cm.fn /= n;
  cm.tn /= n;
  agg.confusion_floored = {std::floor(cm.tp), std::floor(cm.fp), std::floor(cm.fn),
                           std::floor(cm.tn)};
  if (agg.confusion_floored.total() > 0.0) {
    agg.floored_metrics = confusion_metrics(agg.confusion_floored);
  }
  agg.auc = mean_se(auc);
  agg.oob_error = mean_se(err);
  agg.ppv = mean_se(ppv);
  agg.npv = mean_se(npv);
  agg.tpr = mean_se(tpr);
  agg.tnr = mean_se(tnr);
  agg.balanced_accuracy = mean_se(bal);
  agg.cutoff_threshold = mean_se(thr);
  agg.cutoff_youden = mean_se(youden);
  return agg;
}

TuneResult tune_mtry(const FeatureMatrix& F, const ForestConfig& cfg,
                     std::vector<std::size_t> grid, std::size_t folds,
                     std::size_t repeats) {
  check_forest_inputs(F, cfg);
  if (grid.empty()) throw Error(ErrorCode::Spec, "mtry grid is empty");
  if (folds < 2 || repeats < 1) throw Error(ErrorCode::Spec, "need folds >= 2 and repeats >= 1");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (std::size_t v : grid) {
    if (v < 1 || v > F.features()) {
      throw Error(ErrorCode::Spec, "mtry candidate " + std::to_string(v) +
                                       " outside [1, " + std::to_string(F.features()) + "]");
    }
  }
  const auto& labels = *F.labels;
  const auto counts = count_classes(labels);
  if (counts.dominant < folds || counts.follower < folds) {
    throw Error(ErrorCode::Fold, "each class needs at least " + std::to_string(folds) +
                                     " units for stratified " + std::to_string(folds) +
                                     "-fold CV");
  }

  // fold_of[r][i]: fold of unit i in repeat r.
  std::vector<std::vector<std::size_t>> fold_of(repeats, std::vector<std::size_t>(F.units()));
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(cfg.seed, r, kFoldStream));
    for (Label cls : {Label::Follower, Label::Dominant}) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == cls) members.push_back(i);
      }
      for (std::size_t k = members.size(); k > 1; --k) {
        std::swap(members[k - 1], members[uniform_index(rng, k)]);
      }
      for (std::size_t q = 0; q < members.size(); ++q) fold_of[r][members[q]] = q % folds;
    }
  }

  TuneResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t mtry : grid) {
    std::vector<double> aucs;
    for (std::size_t r = 0; r < repeats; ++r) {
      for (std::size_t k = 0; k < folds; ++k) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < F.units(); ++i) {
          (fold_of[r][i] == k ? test : train).push_back(i);
        }
        const FeatureMatrix train_f = F.select_units(train);
        const FeatureMatrix test_f = F.select_units(test);
        ForestConfig fold_cfg = cfg;
        fold_cfg.mtry = mtry;
        fold_cfg.seed = derive_seed(cfg.seed, r * folds + k, kCvForestStream);
        const ForestModel model = fit_forest(train_f, fold_cfg);
        const auto scores = predict_proba(model, test_f.values);
        aucs.push_back(roc_auc(scores, *test_f.labels).auc);
      }
    }
    TuneRow row{mtry, mean_se(aucs)};
    if (row.auc.mean > best) {
      best = row.auc.mean;
      result.best_mtry = mtry;
    }
    result.table.push_back(row);
  }
  return result;
}

std::vector<std::size_t> mda_ranking(const RunAggregate& agg) {
  return rank_desc(agg.mda_mean);
}

nlohmann::json forest_summary_json(const ForestModel& model,
                                   const std::vector<std::string>& unit_ids) {
  nlohmann::json probs = nlohmann::json::array();
  for (double v : model.oob_probabilities) {
    probs.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  }
  double nodes = 0.0, depth = 0.0;
  for (const auto& t : model.trees) {
    nodes += static_cast<double>(t.nodes.size());
    depth += static_cast<double>(t.depth());
  }
  const auto n = static_cast<double>(model.trees.size());
  std::vector<std::string> uncovered;
  for (auto i : model.uncovered_units()) uncovered.push_back(unit_ids.at(i));
  return {
      {"schema_version", kSchemaVersion},
      {"n_trees", model.config.n_trees},
      {"mtry", model.config.mtry},
      {"min_node_size", model.config.min_node_size},
      {"stratified", model.config.stratified},
      {"seed", model.config.seed},
      {"n_features", model.feature_names.size()},
      {"units", unit_ids},
      {"oob_probabilities", probs},
      {"oob_coverage", model.oob_coverage},
      {"uncovered_units", uncovered},
      {"mean_nodes", nodes / n},
      {"mean_depth", depth / n},
  };
}

nlohmann::json aggregate_to_json(const RunAggregate& agg) {
  return {
      {"schema_version", kSchemaVersion},
      {"n_runs", agg.n_runs},
      {"n_units", agg.n_units},
      {"confusion_mean", confusion_to_json(agg.confusion_mean)},
      {"confusion_floored", confusion_to_json(agg.confusion_floored)},
      {"confusion_floored_total", agg.confusion_floored.total()},
      {"floored_table_metrics", metrics_to_json(agg.floored_metrics)},
      {"auc", mean_se_to_json(agg.auc)},
      {"oob_error", mean_se_to_json(agg.oob_error)},
      {"ppv", mean_se_to_json(agg.ppv)},
      {"npv", mean_se_to_json(agg.npv)},
      {"tpr", mean_se_to_json(agg.tpr)},
      {"tnr", mean_se_to_json(agg.tnr)},
      {"balanced_accuracy", mean_se_to_json(agg.balanced_accuracy)},
      {"optimal_cutoff", mean_se_to_json(agg.cutoff_threshold)},
      {"optimal_cutoff_youden_j", mean_se_to_json(agg.cutoff_youden)},
      {"runs_with_uncovered_units", agg.runs_with_uncovered_units},
  };
}

nlohmann::json tune_to_json(const TuneResult& tune) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : tune.table) {
    rows.push_back({{"mtry", row.mtry}, {"cv_auc", mean_se_to_json(row.auc)}});
  }
  return {{"schema_version", kSchemaVersion}, {"best_mtry", tune.best_mtry}, {"grid", rows}};
}

std::string importance_to_csv(const RunAggregate& agg) {
  std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  out += "feature,mdi_mean,mda_mean,topk_frequency\n";
  for (std::size_t j : mda_ranking(agg)) {
    out += csv_escape(agg.feature_names[j]) + "," + format_double(agg.mdi_mean[j]) + "," +
           format_double(agg.mda_mean[j]) + "," + std::to_string(agg.topk_frequency[j]) + "\n";
  }
  return out;
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string());
    out.write(kDumpMagic, sizeof(kDumpMagic));
    put<std::uint32_t>(out, kDumpVersion);
    const auto& c = model.config;
    put<std::uint64_t>(out, c.n_trees);
    put<std::uint64_t>(out, c.mtry);
    put<std::uint64_t>(out, c.min_node_size);
    put<std::uint8_t>(out, c.stratified ? 1 : 0);
    put<std::uint64_t>(out, c.seed);
    put<std::uint64_t>(out, model.feature_names.size());
    for (const auto& name : model.feature_names) put_string(out, name);
    put<std::uint64_t>(out, model.labels.size());
    for (auto l : model.labels) put<std::uint8_t>(out, static_cast<std::uint8_t>(l));
    for (std::size_t i = 0; i < model.labels.size(); ++i) {
      put<double>(out, model.oob_probabilities[i]);
      put<std::uint64_t>(out, model.oob_coverage[i]);
    }
    put<std::uint64_t>(out, model.trees.size());
    for (const auto& tree : model.trees) {
      put<std::uint64_t>(out, tree.nodes.size());
      for (const auto& n : tree.nodes) {
        put(out, n.feature);
        put(out, n.threshold);
        put(out, n.left);
        put(out, n.right);
        put(out, n.count_follower);
        put(out, n.count_dominant);
        put(out, n.impurity_decrease);
      }
      for (auto v : tree.inbag) put<std::uint32_t>(out, v);
    }
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ForestModel load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[sizeof(kDumpMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDumpMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::Parse, path.string() + " is not a forest dump");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kDumpVersion) {
    throw Error(ErrorCode::Parse, "unsupported forest dump version " + std::to_string(version));
  }
  ForestModel model;
  auto& c = model.config;
  c.n_trees = get<std::uint64_t>(in);
  c.mtry = get<std::uint64_t>(in);
  c.min_node_size = get<std::uint64_t>(in);
  c.stratified = get<std::uint8_t>(in) != 0;
  c.seed = get<std::uint64_t>(in);
  const auto p = get<std::uint64_t>(in);
  for (std::uint64_t j = 0; j < p; ++j) model.feature_names.push_back(get_string(in));
  const auto m = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < m; ++i) {
    const auto l = get<std::uint8_t>(in);
    if (l > 1) throw Error(ErrorCode::Parse, "corrupt label in forest dump");
    model.labels.push_back(static_cast<Label>(l));
  }
  for (std::uint64_t i = 0; i < m; ++i) {
    model.oob_probabilities.push_back(get<double>(in));
    model.oob_coverage.push_back(get<std::uint64_t>(in));
  }
  const auto n_trees = get<std::uint64_t>(in);
  model.trees.resize(n_trees);
  for (auto& tree : model.trees) {
    const auto n_nodes = get<std::uint64_t>(in);
    tree.nodes.resize(n_nodes);
    for (auto& n : tree.nodes) {
      n.feature = get<std::int32_t>(in);
      n.threshold = get<double>(in);
      n.left = get<std::int32_t>(in);
      n.right = get<std::int32_t>(in);
      n.count_follower = get<double>(in);
      n.count_dominant = get<double>(in);
      n.impurity_decrease = get<double>(in);
      if (n.feature >= static_cast<std::int32_t>(p) ||
          (n.feature >= 0 && (n.left < 0 || n.right < 0 ||
                              static_cast<std::uint64_t>(n.right) >= n_nodes))) {
        throw Error(ErrorCode::Parse, "corrupt tree node in forest dump");
      }
    }
    tree.inbag.resize(m);
    for (auto& v : tree.inbag) v = get<std::uint32_t>(in);
  }
  return model;
}

}  // namespace dominet
