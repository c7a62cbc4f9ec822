#include "dominet/commands.hpp"

#include <cmath>
#include <cstdio>

#include "dominet/csv.hpp"
#include "dominet/error.hpp"
#include "dominet/svg.hpp"

namespace dominet {
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

FeatureMatrix load_labeled(const fs::path& features_csv,
                           const std::optional<fs::path>& labels_csv) {
  FeatureMatrix F = load_feature_csv(features_csv);
  if (labels_csv) apply_label_csv(F, *labels_csv);
  F.require_labels();
  return F;
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

std::string ms_line(const char* name, const nlohmann::json& j) {
  if (!j.contains("mean") || j["n"].get<std::size_t>() == 0) return std::string(name) + ": n/a\n";
  const auto ci = j["ci95"];
  return std::string(name) + ": " + fixed(j["mean"].get<double>()) + " (95% CI " +
         fixed(ci[0].get<double>()) + " to " + fixed(ci[1].get<double>()) + ")\n";
}

}  // namespace

NetworkResult run_network(const Panel& input, const RunConfig& cfg) {
  const Panel panel = cfg.exclude_units.empty() ? input : exclude_units(input, cfg.exclude_units);
  validate_panel(panel);
  const StandardizedPanel sp = standardize(panel);

  NetworkResult r;
  r.unit_ids = sp.unit_ids;
  r.fits = nodewise_regressions(sp, cfg.lasso, cfg.lasso_method, cfg.criterion);
  r.coefficients = stack_coefficients(r.fits, sp.unit_ids);
  Eigen::VectorXd variances(static_cast<Eigen::Index>(r.fits.size()));
  for (const auto& f : r.fits) {
    variances(static_cast<Eigen::Index>(f.unit_index)) = f.residual_variance;
  }
  r.concentration = concentration(r.coefficients, variances);
  r.norms = column_norms(r.concentration);
  r.ranking = dominant_count(r.norms, sp.unit_ids);
  if (cfg.norm_diagnostic) {
    const Eigen::VectorXd densities = panel.values.colwise().mean().transpose();
    r.diagnostic = norm_density_diagnostic(r.norms, densities);
  }
  return r;
}

void cmd_network(const fs::path& panel_csv, const RunConfig& cfg, std::ostream& log) {
  const PanelLoad load = load_panel_csv(panel_csv, cfg.missing);
  const NetworkResult r = run_network(load.panel, cfg);
  const fs::path& out = cfg.out_dir;

  nlohmann::json ranking = ranking_to_json(r.ranking);
  ranking["dropped_units"] = load.dropped_units;
  ranking["excluded_units"] = cfg.exclude_units;
  ranking["n_periods_differenced"] = load.panel.periods() - 1;
  ranking["config"] = config_to_json(cfg);
  write_json(out / "ranking.json", ranking);
  write_file_atomic(out / "ranking.csv", ranking_to_csv(r.ranking));
  write_file_atomic(out / "edges.csv", edges_to_csv(edge_list(r.coefficients)));

  nlohmann::json fits = nlohmann::json::array();
  std::size_t unconverged = 0;
  for (const auto& f : r.fits) {
    fits.push_back(fit_to_json(f, r.unit_ids));
    if (!f.converged || !f.loadings_converged) ++unconverged;
  }
  write_json(out / "fits.json",
             {{"schema_version", kSchemaVersion}, {"unconverged", unconverged}, {"fits", fits}});

  LineChart chart;
  chart.title = "Sorted concentration column norms";
  chart.x_label = "rank";
  chart.y_label = "column norm";
  ChartSeries s{"norm", {}, {}, true};
  for (Eigen::Index i = 0; i < r.ranking.norms.size(); ++i) {
    s.x.push_back(static_cast<double>(i + 1));
    s.y.push_back(r.ranking.norms(i));
  }
  chart.series.push_back(std::move(s));
  chart.vertical_line = static_cast<double>(r.ranking.k) + 0.5;
  write_file_atomic(out / "norms.svg", render_svg(chart));

  if (r.diagnostic) write_json(out / "diagnostic.json", diagnostic_to_json(*r.diagnostic));

  log << "units: " << r.unit_ids.size() << "\n";
  if (!load.dropped_units.empty()) log << "dropped (missing values): " << load.dropped_units.size() << "\n";
  log << "dominant units (k=" << r.ranking.k << "):";
  for (std::size_t i = 0; i < r.ranking.k; ++i) log << " " << r.ranking.ordered_units[i];
  log << "\n";
  if (unconverged > 0) log << "warning: " << unconverged << " regressions did not fully converge\n";
  log << "reports written to " << out.string() << "\n";
}

void cmd_classify(const fs::path& features_csv, const std::optional<fs::path>& labels_csv,
                  const RunConfig& cfg, std::ostream& log) {
  const FeatureMatrix raw = load_labeled(features_csv, labels_csv);
  auto [F, report] = preprocess_features(raw, cfg.nzv, cfg.correlation_cutoff, cfg.keep_features);
  const fs::path& out = cfg.out_dir;
  write_json(out / "filter_report.json", filter_report_to_json(report));

  ForestConfig forest = cfg.forest;
  if (cfg.tune) {
    const auto grid = cfg.tune_grid.empty() ? default_tune_grid(F.features()) : cfg.tune_grid;
    const TuneResult tune = tune_mtry(F, forest, grid, cfg.tune_folds, cfg.tune_repeats);
    forest.mtry = tune.best_mtry;
    write_json(out / "tune.json", tune_to_json(tune));
  }
  const RunAggregate agg = multi_run(F, forest);

  nlohmann::json metrics = aggregate_to_json(agg);
  metrics["mtry"] = forest.resolved_mtry(F.features());
  metrics["n_features"] = F.features();
  metrics["config"] = config_to_json(cfg);

  std::vector<double> scores;
  std::vector<Label> truth;
  std::string probs = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  probs += "unit,label,mean_oob_probability\n";
  for (std::size_t i = 0; i < F.units(); ++i) {
    const double p = agg.mean_oob_probability[i];
    const Label l = (*F.labels)[i];
    probs += csv_escape(F.unit_ids[i]) + "," + (l == Label::Dominant ? "dominant" : "follower") +
             "," + format_double(p) + "\n";
    if (std::isnan(p)) continue;
    scores.push_back(p);
    truth.push_back(l);
  }
  write_file_atomic(out / "oob_probabilities.csv", probs);
  const RocResult roc = roc_auc(scores, truth);
  metrics["mean_probability_auc"] = roc.auc;
  write_json(out / "metrics.json", metrics);
  write_file_atomic(out / "roc.csv", roc_to_csv(roc));

  LineChart chart;
  chart.title = "ROC of mean OOB probability";
  chart.x_label = "false positive rate";
  chart.y_label = "true positive rate";
  chart.diagonal = true;
  chart.x_range = std::pair{0.0, 1.0};
  chart.y_range = std::pair{0.0, 1.0};
  ChartSeries s{"AUC " + fixed(roc.auc, 3), {}, {}, false};
  for (const auto& pt : roc.curve) {
    s.x.push_back(pt.fpr);
    s.y.push_back(pt.tpr);
  }
  chart.series.push_back(std::move(s));
  write_file_atomic(out / "roc.svg", render_svg(chart));

  write_file_atomic(out / "importance.csv", importance_to_csv(agg));
  std::vector<std::string> order;
  for (auto j : mda_ranking(agg)) order.push_back(agg.feature_names[j]);
  write_file_atomic(out / "group_means.csv", group_means_to_csv(group_mean_differences(F, &order)));

  ForestConfig seed_cfg = forest;
  const ForestModel model = fit_forest(F, seed_cfg);
  write_json(out / "model_summary.json", forest_summary_json(model, F.unit_ids));
  if (cfg.dump_model) save_forest(model, out / "model.bin");

  log << "features: " << raw.features() << " -> " << F.features() << " after filtering\n";
  log << "runs: " << agg.n_runs << ", trees per run: " << forest.n_trees
      << ", mtry: " << forest.resolved_mtry(F.features()) << "\n";
  log << "OOB AUC: " << fixed(agg.auc.mean) << " +/- " << fixed(1.96 * agg.auc.se) << "\n";
  log << "OOB error: " << fixed(agg.oob_error.mean) << "\n";
  log << "top features by MDA:";
  for (std::size_t q = 0; q < std::min<std::size_t>(5, order.size()); ++q) log << " " << order[q];
  log << "\n";
  log << "reports written to " << out.string() << "\n";
}

void cmd_tune(const fs::path& features_csv, const std::optional<fs::path>& labels_csv,
              const RunConfig& cfg, std::ostream& log) {
  const FeatureMatrix raw = load_labeled(features_csv, labels_csv);
  auto [F, report] = preprocess_features(raw, cfg.nzv, cfg.correlation_cutoff, cfg.keep_features);
  const auto grid = cfg.tune_grid.empty() ? default_tune_grid(F.features()) : cfg.tune_grid;
  const TuneResult tune = tune_mtry(F, cfg.forest, grid, cfg.tune_folds, cfg.tune_repeats);
  nlohmann::json j = tune_to_json(tune);
  j["n_features"] = F.features();
  j["config"] = config_to_json(cfg);
  write_json(cfg.out_dir / "tune.json", j);
  for (const auto& row : tune.table) {
    log << "mtry " << row.mtry << ": CV AUC " << fixed(row.auc.mean) << " (se "
        << fixed(row.auc.se) << ")\n";
  }
  log << "best mtry: " << tune.best_mtry << "\n";
}

void cmd_synth(const std::string& kind, const RunConfig& cfg, std::ostream& log) {
  if (kind != "panel" && kind != "classification" && kind != "both") {
    throw Error(ErrorCode::Usage, "synth kind must be panel, classification or both");
  }
  const fs::path& out = cfg.out_dir;
  if (kind != "classification") {
    const SynthPanel data = generate_dominant_panel(cfg.synth_panel);
    write_file_atomic(out / "panel.csv", panel_to_csv(data.panel));
    write_json(out / "panel_truth.json", panel_truth_json(cfg.synth_panel, data));
    log << "panel: " << data.panel.units() << " units x " << data.panel.periods()
        << " periods; dominant:";
    for (const auto& id : data.dominant_ids) log << " " << id;
    log << "\n";
  }
  if (kind != "panel") {
    const SynthClassification data = generate_classification_data(cfg.synth_class);
    write_file_atomic(out / "features.csv", feature_matrix_to_csv(data.features));
    write_json(out / "features_truth.json", classification_truth_json(cfg.synth_class, data));
    log << "features: " << data.features.units() << " units x " << data.features.features()
        << " features; informative:";
    for (const auto& id : data.informative) log << " " << id;
    log << "\n";
  }
}

void cmd_report(const fs::path& dir, std::ostream& log) {
  bool any = false;
  if (fs::exists(dir / "ranking.json")) {
    any = true;
    const auto j = read_json(dir / "ranking.json");
    log << "== network ==\n";
    log << "units ranked: " << j["units"].size() << "\n";
    log << "k = " << j["k"].get<std::size_t>() << ":";
    for (const auto& u : j["dominant"]) log << " " << u.get<std::string>();
    log << "\n";
    const auto& norms = j["norms"];
    for (std::size_t i = 0; i < std::min<std::size_t>(10, norms.size()); ++i) {
      log << "  " << (i + 1) << ". " << j["units"][i].get<std::string>() << "  "
          << fixed(norms[i].get<double>()) << "\n";
    }
  }
  if (fs::exists(dir / "diagnostic.json")) {
    const auto j = read_json(dir / "diagnostic.json");
    log << "norm vs density: r = " << fixed(j["correlation"].get<double>()) << ", R^2 = "
        << fixed(j["r_squared"].get<double>()) << "\n";
  }
  if (fs::exists(dir / "metrics.json")) {
    any = true;
    const auto j = read_json(dir / "metrics.json");
    log << "== classification ==\n";
    log << "runs: " << j["n_runs"].get<std::size_t>() << ", mtry: " << j["mtry"].get<std::size_t>()
        << "\n";
    log << ms_line("OOB AUC", j["auc"]) << ms_line("OOB error", j["oob_error"])
        << ms_line("PPV", j["ppv"]) << ms_line("NPV", j["npv"]) << ms_line("TPR", j["tpr"])
        << ms_line("TNR", j["tnr"]);
    const auto& c = j["confusion_floored"];
    log << "floored mean confusion: tp " << c["tp"].get<double>() << ", fp " << c["fp"].get<double>()
        << ", fn " << c["fn"].get<double>() << ", tn " << c["tn"].get<double>() << "\n";
  }
  if (fs::exists(dir / "importance.csv")) {
    const auto table = read_csv(dir / "importance.csv");
    log << "top features by MDA:\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(10, table.rows.size()); ++i) {
      log << "  " << (i + 1) << ". " << table.rows[i][0] << "  mda " << table.rows[i][2]
          << "  freq " << table.rows[i][3] << "\n";
    }
  }
  if (fs::exists(dir / "tune.json")) {
    any = true;
    const auto j = read_json(dir / "tune.json");
    log << "tuned mtry: " << j["best_mtry"].get<std::size_t>() << "\n";
  }
  if (!any) throw Error(ErrorCode::Io, "no reports found in " + dir.string());
}

}  // namespace dominet
