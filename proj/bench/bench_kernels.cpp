// Serial reference vs OpenMP kernel timings. The second benchmark argument
// is the thread count; 0 selects the serial reference.

#include <benchmark/benchmark.h>

#include "dominet/forest.hpp"
#include "dominet/lasso.hpp"
#include "dominet/network.hpp"
#include "dominet/panel.hpp"
#include "dominet/parallel.hpp"
#include "dominet/preprocess.hpp"
#include "dominet/rng.hpp"
#include "dominet/synth.hpp"

using namespace dominet;

namespace {

Eigen::MatrixXd gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = standard_normal(rng);
  }
  return m;
}

void BM_Nodewise(benchmark::State& state) {
  SynthPanelSpec spec;
  spec.n_units = static_cast<std::size_t>(state.range(0));
  spec.n_periods = 120;
  const StandardizedPanel sp = standardize(generate_dominant_panel(spec).panel);
  const int threads = static_cast<int>(state.range(1));
  parallel::set_threads(threads);
  for (auto _ : state) {
    auto fits = threads == 0 ? nodewise_regressions_serial(sp, LassoConfig{}, LassoMethod::Rigorous)
                             : nodewise_regressions(sp, LassoConfig{}, LassoMethod::Rigorous);
    benchmark::DoNotOptimize(fits.data());
  }
}

void BM_Correlation(benchmark::State& state) {
  const Eigen::MatrixXd v = gaussian(74, static_cast<std::size_t>(state.range(0)), 1);
  const int threads = static_cast<int>(state.range(1));
  parallel::set_threads(threads);
  for (auto _ : state) {
    Eigen::MatrixXd r = threads == 0 ? abs_correlation_matrix_serial(v) : abs_correlation_matrix(v);
    benchmark::DoNotOptimize(r.data());
  }
}

void BM_Forest(benchmark::State& state) {
  SynthClassSpec spec;
  const FeatureMatrix F = generate_classification_data(spec).features;
  ForestConfig cfg;
  cfg.n_trees = static_cast<std::size_t>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  parallel::set_threads(threads);
  for (auto _ : state) {
    ForestModel m = threads == 0 ? fit_forest_serial(F, cfg) : fit_forest(F, cfg);
    benchmark::DoNotOptimize(m.trees.data());
  }
}

void BM_ColumnNorms(benchmark::State& state) {
  ConcentrationMatrix c;
  c.K = gaussian(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0)), 2);
  const int threads = static_cast<int>(state.range(1));
  parallel::set_threads(threads);
  for (auto _ : state) {
    Eigen::VectorXd n = threads == 0 ? column_norms_serial(c) : column_norms(c);
    benchmark::DoNotOptimize(n.data());
  }
}

}  // namespace

BENCHMARK(BM_Nodewise)->ArgsProduct({{20, 40}, {0, 1, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Correlation)->ArgsProduct({{375, 1000}, {0, 1, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forest)->ArgsProduct({{500}, {0, 1, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ColumnNorms)->ArgsProduct({{500, 2000}, {0, 1, 4}})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
