#include "dominet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "dominet/csv.hpp"
#include "dominet/error.hpp"

namespace dominet {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct BadValue {
  std::string what;
};

double to_double(std::string_view v) {
  double out = 0.0;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw BadValue{"expected a finite number"};
  }
  return out;
}

std::uint64_t to_u64(std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw BadValue{"expected a non-negative integer"};
  }
  return out;
}

std::size_t to_size(std::string_view v) { return static_cast<std::size_t>(to_u64(v)); }

int to_int(std::string_view v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw BadValue{"expected an integer"};
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw BadValue{"expected true or false"};
}

std::vector<std::string> to_list(std::string_view v) {
  std::vector<std::string> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"seed", [](RunConfig& c, std::string_view v) { c.set_seed(to_u64(v)); }},
      {"threads", [](RunConfig& c, std::string_view v) { c.threads = to_int(v); }},
      {"out_dir", [](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); }},

      {"lasso.method",
       [](RunConfig& c, std::string_view v) {
         if (v == "rigorous") c.lasso_method = LassoMethod::Rigorous;
         else if (v == "adaptive") c.lasso_method = LassoMethod::Adaptive;
         else throw BadValue{"expected rigorous or adaptive"};
       }},
      {"lasso.criterion",
       [](RunConfig& c, std::string_view v) {
         if (v == "bic") c.criterion = InformationCriterion::Bic;
         else if (v == "aic") c.criterion = InformationCriterion::Aic;
         else throw BadValue{"expected bic or aic"};
       }},
      {"lasso.c", [](RunConfig& c, std::string_view v) { c.lasso.c = to_double(v); }},
      {"lasso.gamma",
       [](RunConfig& c, std::string_view v) {
         if (v == "auto") c.lasso.gamma.reset();
         else c.lasso.gamma = to_double(v);
       }},
      {"lasso.max_loading_iters",
       [](RunConfig& c, std::string_view v) { c.lasso.max_loading_iters = to_int(v); }},
      {"lasso.loading_tol", [](RunConfig& c, std::string_view v) { c.lasso.loading_tol = to_double(v); }},
      {"lasso.cd_tol", [](RunConfig& c, std::string_view v) { c.lasso.cd_tol = to_double(v); }},
      {"lasso.cd_max_iters", [](RunConfig& c, std::string_view v) { c.lasso.cd_max_iters = to_int(v); }},
      {"lasso.autocorrelation_robust",
       [](RunConfig& c, std::string_view v) { c.lasso.autocorrelation_robust = to_bool(v); }},
      {"lasso.post", [](RunConfig& c, std::string_view v) { c.lasso.post_lasso = to_bool(v); }},
      {"lasso.lambda",
       [](RunConfig& c, std::string_view v) {
         if (v == "auto") c.lasso.lambda_override.reset();
         else c.lasso.lambda_override = to_double(v);
       }},

      {"network.norm_diagnostic", [](RunConfig& c, std::string_view v) { c.norm_diagnostic = to_bool(v); }},
      {"network.exclude_units", [](RunConfig& c, std::string_view v) { c.exclude_units = to_list(v); }},
      {"network.missing",
       [](RunConfig& c, std::string_view v) {
         if (v == "fail") c.missing = MissingPolicy::Fail;
         else if (v == "drop_unit") c.missing = MissingPolicy::DropUnit;
         else throw BadValue{"expected fail or drop_unit"};
       }},

      {"preprocess.nzv_freq_ratio", [](RunConfig& c, std::string_view v) { c.nzv.freq_ratio_cut = to_double(v); }},
      {"preprocess.nzv_unique_pct", [](RunConfig& c, std::string_view v) { c.nzv.unique_pct_cut = to_double(v); }},
      {"preprocess.correlation_cutoff",
       [](RunConfig& c, std::string_view v) { c.correlation_cutoff = to_double(v); }},
      {"preprocess.keep", [](RunConfig& c, std::string_view v) { c.keep_features = to_list(v); }},

      {"forest.n_trees", [](RunConfig& c, std::string_view v) { c.forest.n_trees = to_size(v); }},
      {"forest.mtry",
       [](RunConfig& c, std::string_view v) { c.forest.mtry = v == "auto" ? 0 : to_size(v); }},
      {"forest.min_node_size", [](RunConfig& c, std::string_view v) { c.forest.min_node_size = to_size(v); }},
      {"forest.stratified", [](RunConfig& c, std::string_view v) { c.forest.stratified = to_bool(v); }},
      {"forest.n_runs", [](RunConfig& c, std::string_view v) { c.forest.n_runs = to_size(v); }},
      {"forest.top_k", [](RunConfig& c, std::string_view v) { c.forest.top_k = to_size(v); }},
      {"forest.frequency",
       [](RunConfig& c, std::string_view v) {
         if (v == "topk_mdi") c.forest.frequency_mode = FrequencyMode::TopKByMdi;
         else if (v == "split_usage") c.forest.frequency_mode = FrequencyMode::SplitUsage;
         else throw BadValue{"expected topk_mdi or split_usage"};
       }},

      {"forest.dump_model", [](RunConfig& c, std::string_view v) { c.dump_model = to_bool(v); }},
      {"tune.enabled", [](RunConfig& c, std::string_view v) { c.tune = to_bool(v); }},
      {"tune.grid",
       [](RunConfig& c, std::string_view v) {
         c.tune_grid.clear();
         for (const auto& item : to_list(v)) c.tune_grid.push_back(to_size(item));
       }},
      {"tune.folds", [](RunConfig& c, std::string_view v) { c.tune_folds = to_size(v); }},
      {"tune.repeats", [](RunConfig& c, std::string_view v) { c.tune_repeats = to_size(v); }},

      {"synth.panel.n_units", [](RunConfig& c, std::string_view v) { c.synth_panel.n_units = to_size(v); }},
      {"synth.panel.n_periods", [](RunConfig& c, std::string_view v) { c.synth_panel.n_periods = to_size(v); }},
      {"synth.panel.n_dominant", [](RunConfig& c, std::string_view v) { c.synth_panel.n_dominant = to_size(v); }},
      {"synth.panel.loading_low", [](RunConfig& c, std::string_view v) { c.synth_panel.loading_low = to_double(v); }},
      {"synth.panel.loading_high", [](RunConfig& c, std::string_view v) { c.synth_panel.loading_high = to_double(v); }},
      {"synth.panel.spatial_rho", [](RunConfig& c, std::string_view v) { c.synth_panel.spatial_rho = to_double(v); }},
      {"synth.panel.noise_sd", [](RunConfig& c, std::string_view v) { c.synth_panel.noise_sd = to_double(v); }},
      {"synth.panel.dominant_correlation",
       [](RunConfig& c, std::string_view v) { c.synth_panel.dominant_correlation = to_double(v); }},
      {"synth.class.n_units", [](RunConfig& c, std::string_view v) { c.synth_class.n_units = to_size(v); }},
      {"synth.class.n_features", [](RunConfig& c, std::string_view v) { c.synth_class.n_features = to_size(v); }},
      {"synth.class.n_informative", [](RunConfig& c, std::string_view v) { c.synth_class.n_informative = to_size(v); }},
      {"synth.class.effect_size", [](RunConfig& c, std::string_view v) { c.synth_class.effect_size = to_double(v); }},
      {"synth.class.class_ratio", [](RunConfig& c, std::string_view v) { c.synth_class.class_ratio = to_double(v); }},
      {"synth.class.block_size", [](RunConfig& c, std::string_view v) { c.synth_class.block_size = to_size(v); }},
      {"synth.class.block_rho", [](RunConfig& c, std::string_view v) { c.synth_class.block_rho = to_double(v); }},
  };
  return table;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  forest.seed = s;
  synth_panel.seed = s;
  synth_class.seed = s;
}

void RunConfig::validate() const {
  lasso.validate();
  if (!(correlation_cutoff > 0.0 && correlation_cutoff <= 1.0)) {
    throw Error(ErrorCode::Spec, "preprocess.correlation_cutoff must be in (0, 1]");
  }
  if (!(nzv.freq_ratio_cut >= 1.0)) throw Error(ErrorCode::Spec, "preprocess.nzv_freq_ratio must be >= 1");
  if (!(nzv.unique_pct_cut >= 0.0 && nzv.unique_pct_cut <= 100.0)) {
    throw Error(ErrorCode::Spec, "preprocess.nzv_unique_pct must be in [0, 100]");
  }
  if (forest.n_trees < 1) throw Error(ErrorCode::Spec, "forest.n_trees must be >= 1");
  if (forest.n_runs < 1) throw Error(ErrorCode::Spec, "forest.n_runs must be >= 1");
  if (forest.min_node_size < 1) throw Error(ErrorCode::Spec, "forest.min_node_size must be >= 1");
  if (tune_folds < 2) throw Error(ErrorCode::Spec, "tune.folds must be >= 2");
  if (tune_repeats < 1) throw Error(ErrorCode::Spec, "tune.repeats must be >= 1");
  if (threads < 0) throw Error(ErrorCode::Spec, "threads must be >= 0");
}

RunConfig parse_config(std::string_view text, std::string_view source, RunConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::Usage, where + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw Error(ErrorCode::Usage, where + ": unknown key '" + std::string(key) + "'");
    }
    if (!seen.insert(std::string(key)).second) {
      throw Error(ErrorCode::Usage, where + ": duplicate key '" + std::string(key) + "'");
    }
    try {
      it->second(base, value);
    } catch (const BadValue& bad) {
      throw Error(ErrorCode::Usage, where + ": " + std::string(key) + ": " + bad.what +
                                        ", got '" + std::string(value) + "'");
    }
  }
  base.validate();
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

nlohmann::json config_to_json(const RunConfig& c) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json("auto");
  };
  return {
      {"seed", c.seed},
      {"lasso",
       {{"method", c.lasso_method == LassoMethod::Rigorous ? "rigorous" : "adaptive"},
        {"criterion", c.criterion == InformationCriterion::Bic ? "bic" : "aic"},
        {"c", c.lasso.c},
        {"gamma", opt(c.lasso.gamma)},
        {"lambda", opt(c.lasso.lambda_override)},
        {"max_loading_iters", c.lasso.max_loading_iters},
        {"loading_tol", c.lasso.loading_tol},
        {"cd_tol", c.lasso.cd_tol},
        {"cd_max_iters", c.lasso.cd_max_iters},
        {"autocorrelation_robust", c.lasso.autocorrelation_robust},
        {"post", c.lasso.post_lasso}}},
      {"network",
       {{"norm_diagnostic", c.norm_diagnostic},
        {"exclude_units", c.exclude_units},
        {"missing", c.missing == MissingPolicy::Fail ? "fail" : "drop_unit"}}},
      {"preprocess",
       {{"nzv_freq_ratio", c.nzv.freq_ratio_cut},
        {"nzv_unique_pct", c.nzv.unique_pct_cut},
        {"correlation_cutoff", c.correlation_cutoff},
        {"keep", c.keep_features}}},
      {"forest",
       {{"n_trees", c.forest.n_trees},
        {"mtry", c.forest.mtry == 0 ? nlohmann::json("auto") : nlohmann::json(c.forest.mtry)},
        {"min_node_size", c.forest.min_node_size},
        {"stratified", c.forest.stratified},
        {"n_runs", c.forest.n_runs},
        {"top_k", c.forest.top_k},
        {"dump_model", c.dump_model},
        {"frequency",
         c.forest.frequency_mode == FrequencyMode::TopKByMdi ? "topk_mdi" : "split_usage"}}},
      {"tune",
       {{"enabled", c.tune},
        {"grid", c.tune_grid},
        {"folds", c.tune_folds},
        {"repeats", c.tune_repeats}}},
  };
}

std::vector<std::size_t> default_tune_grid(std::size_t p) {
  const auto s = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))));
  std::vector<std::size_t> grid{std::max<std::size_t>(1, s / 2), s, std::min(p, 2 * s)};
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace dominet
