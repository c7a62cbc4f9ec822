#include "dominet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "dominet/csv.hpp"
#include "dominet/error.hpp"
#include "dominet/parallel.hpp"

namespace dominet {
namespace {

std::optional<Label> parse_label(std::string_view text, std::string_view where) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (s.empty()) return std::nullopt;
  if (s == "dominant") return Label::Dominant;
  if (s == "follower") return Label::Follower;
  throw Error(ErrorCode::Label,
              "unknown label '" + std::string(text) + "' at " + std::string(where));
}

const char* label_name(Label l) { return l == Label::Dominant ? "dominant" : "follower"; }

// Columns centered and scaled to unit Euclidean norm. Zero-variance columns
// are reported by name.
Eigen::MatrixXd unit_norm_columns(const Eigen::MatrixXd& values,
                                  const std::vector<std::string>* names) {
  Eigen::MatrixXd z(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const double mean = values.col(j).mean();
    double ss = 0.0;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      const double d = values(i, j) - mean;
      z(i, j) = d;
      ss += d * d;
    }
    if (!(ss > 0.0)) {
      const std::string name =
          names ? (*names)[static_cast<std::size_t>(j)] : std::to_string(j);
      throw Error(ErrorCode::DegenerateColumn,
                  "feature '" + name +
                      "' has zero variance; apply the near-zero-variance filter first");
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (Eigen::Index i = 0; i < values.rows(); ++i) z(i, j) *= inv;
  }
  return z;
}

double column_dot(const Eigen::MatrixXd& z, Eigen::Index a, Eigen::Index b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) s += z(i, a) * z(i, b);
  return s;
}

void fill_correlation_column(const Eigen::MatrixXd& z, Eigen::MatrixXd& r,
                             Eigen::Index j) {
  r(j, j) = 1.0;
  for (Eigen::Index k = j + 1; k < z.cols(); ++k) {
    r(j, k) = std::min(1.0, std::fabs(column_dot(z, j, k)));
  }
}

void mirror_upper(Eigen::MatrixXd& r) {
  for (Eigen::Index j = 0; j < r.cols(); ++j) {
    for (Eigen::Index k = j + 1; k < r.cols(); ++k) r(k, j) = r(j, k);
  }
}

}  // namespace

void FeatureMatrix::validate() const {
  if (static_cast<std::size_t>(values.rows()) != unit_ids.size() ||
      static_cast<std::size_t>(values.cols()) != feature_names.size()) {
    throw Error(ErrorCode::Dimension, "feature matrix shape does not match its names");
  }
  if (labels && labels->size() != unit_ids.size()) {
    throw Error(ErrorCode::Label, "labels must cover every unit");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : feature_names) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::Validation, "duplicate feature name '" + name + "'");
    }
  }
  seen.clear();
  for (const auto& id : unit_ids) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::Validation, "duplicate unit id '" + id + "'");
    }
  }
  if (!values.allFinite()) {
    throw Error(ErrorCode::NumericInput, "feature matrix contains non-finite values");
  }
}

const std::vector<Label>& FeatureMatrix::require_labels() const {
  if (!labels) throw Error(ErrorCode::Label, "feature matrix has no labels");
  return *labels;
}

FeatureMatrix FeatureMatrix::select_features(const std::vector<std::size_t>& columns) const {
  FeatureMatrix out;
  out.unit_ids = unit_ids;
  out.labels = labels;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.feature_names.push_back(feature_names[columns[k]]);
    out.values.col(static_cast<Eigen::Index>(k)) =
        values.col(static_cast<Eigen::Index>(columns[k]));
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_units(const std::vector<std::size_t>& rows) const {
  FeatureMatrix out;
  out.feature_names = feature_names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  if (labels) out.labels.emplace();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.unit_ids.push_back(unit_ids[rows[k]]);
    out.values.row(static_cast<Eigen::Index>(k)) =
        values.row(static_cast<Eigen::Index>(rows[k]));
    if (labels) out.labels->push_back((*labels)[rows[k]]);
  }
  return out;
}

std::pair<FeatureMatrix, FilterReport> near_zero_variance_filter(
    const FeatureMatrix& F, double freq_ratio_cut, double unique_pct_cut) {
  if (F.units() < 2) {
    throw Error(ErrorCode::InsufficientData, "near-zero-variance filter needs M >= 2");
  }
  FilterReport report;
  std::vector<std::size_t> keep;
  const auto m = static_cast<double>(F.units());
  for (std::size_t j = 0; j < F.features(); ++j) {
    std::map<double, std::size_t> counts;
    for (Eigen::Index i = 0; i < F.values.rows(); ++i) {
      ++counts[F.values(i, static_cast<Eigen::Index>(j))];
    }
    std::size_t first = 0, second = 0;
    for (const auto& [value, count] : counts) {
      if (count > first) {
        second = first;
        first = count;
      } else if (count > second) {
        second = count;
      }
    }
    const double ratio = second == 0 ? std::numeric_limits<double>::infinity()
                                     : static_cast<double>(first) / static_cast<double>(second);
    const double unique_pct = 100.0 * static_cast<double>(counts.size()) / m;
    if (ratio > freq_ratio_cut && unique_pct < unique_pct_cut) {
      report.removed_nzv.push_back(F.feature_names[j]);
    } else {
      keep.push_back(j);
      report.surviving.push_back(F.feature_names[j]);
    }
  }
  return {F.select_features(keep), report};
}

Eigen::MatrixXd abs_correlation_matrix(const Eigen::MatrixXd& values) {
  const Eigen::MatrixXd z = unit_norm_columns(values, nullptr);
  Eigen::MatrixXd r(values.cols(), values.cols());
  parallel::for_each_index(static_cast<std::size_t>(values.cols()), [&](std::size_t j) {
    fill_correlation_column(z, r, static_cast<Eigen::Index>(j));
  });
  mirror_upper(r);
  return r;
}

Eigen::MatrixXd abs_correlation_matrix_serial(const Eigen::MatrixXd& values) {
  const Eigen::MatrixXd z = unit_norm_columns(values, nullptr);
  Eigen::MatrixXd r(values.cols(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) fill_correlation_column(z, r, j);
  mirror_upper(r);
  return r;
}

std::pair<FeatureMatrix, FilterReport> correlation_prune(
    const FeatureMatrix& F, double cutoff, const std::vector<std::string>& keep) {
  const std::size_t p = F.features();
  FilterReport report;
  report.cutoff = cutoff;
  if (p == 0) return {F, report};
  unit_norm_columns(F.values, &F.feature_names);  // names any degenerate column
  const Eigen::MatrixXd r = abs_correlation_matrix(F.values);

  const std::set<std::string> pinned_names(keep.begin(), keep.end());
  std::vector<bool> pinned(p), alive(p, true);
  for (std::size_t j = 0; j < p; ++j) pinned[j] = pinned_names.count(F.feature_names[j]) > 0;

  std::size_t n_alive = p;
  while (n_alive > 1) {
    double worst = cutoff;
    std::size_t a = p, b = p;
    for (std::size_t i = 0; i < p; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < p; ++j) {
        if (!alive[j] || (pinned[i] && pinned[j])) continue;
        const double v = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v > worst) {
          worst = v;
          a = i;
          b = j;
        }
      }
    }
    if (a == p) break;

    std::size_t drop;
    if (pinned[a]) {
      drop = b;
    } else if (pinned[b]) {
      drop = a;
    } else {
      auto mean_abs = [&](std::size_t c) {
        double s = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
          if (k != c && alive[k]) s += r(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
        }
        return s / static_cast<double>(n_alive - 1);
      };
      drop = mean_abs(a) > mean_abs(b) ? a : b;
    }
    alive[drop] = false;
    --n_alive;
  }

  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < p; ++j) {
    if (alive[j]) {
      kept.push_back(j);
      report.surviving.push_back(F.feature_names[j]);
    } else {
      report.removed_corr.push_back(F.feature_names[j]);
    }
  }
  return {F.select_features(kept), report};
}

std::pair<FeatureMatrix, FilterReport> preprocess_features(
    const FeatureMatrix& F, const NzvOptions& nzv, double cutoff,
    const std::vector<std::string>& keep) {
  auto [filtered, nzv_report] =
      near_zero_variance_filter(F, nzv.freq_ratio_cut, nzv.unique_pct_cut);
  auto [pruned, corr_report] = correlation_prune(filtered, cutoff, keep);
  corr_report.removed_nzv = std::move(nzv_report.removed_nzv);
  return {std::move(pruned), std::move(corr_report)};
}

std::vector<GroupMeans> group_mean_differences(const FeatureMatrix& F,
                                               const std::vector<std::string>* ordering) {
  const auto& labels = F.require_labels();
  std::size_t n_dom = 0;
  for (auto l : labels) n_dom += l == Label::Dominant ? 1 : 0;
  const std::size_t n_fol = labels.size() - n_dom;
  if (n_dom == 0 || n_fol == 0) {
    throw Error(ErrorCode::Class, "group means need both dominant and follower units");
  }

  std::vector<std::size_t> columns;
  if (ordering) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < F.features(); ++j) index.emplace(F.feature_names[j], j);
    for (const auto& name : *ordering) {
      if (auto it = index.find(name); it != index.end()) columns.push_back(it->second);
    }
  } else {
    for (std::size_t j = 0; j < F.features(); ++j) columns.push_back(j);
  }

  std::vector<GroupMeans> rows;
  for (std::size_t j : columns) {
    double dom = 0.0, fol = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double v = F.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      (labels[i] == Label::Dominant ? dom : fol) += v;
    }
    rows.push_back({F.feature_names[j], fol / static_cast<double>(n_fol),
                    dom / static_cast<double>(n_dom)});
  }
  return rows;
}

FeatureMatrix parse_feature_csv(std::string_view text, std::string_view source) {
  const CsvTable table = parse_csv(text, source);
  if (table.header.size() < 2 || table.header[0] != "unit" || table.header[1] != "label") {
    throw Error(ErrorCode::Parse,
                std::string(source) + ":1 header must start with 'unit,label'");
  }
  FeatureMatrix F;
  F.feature_names.assign(table.header.begin() + 2, table.header.end());
  const auto m = static_cast<Eigen::Index>(table.rows.size());
  const auto p = static_cast<Eigen::Index>(F.feature_names.size());
  F.values.resize(m, p);
  std::vector<std::optional<Label>> labels;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::string line =
        std::string(source) + ":" + std::to_string(table.line_numbers[static_cast<std::size_t>(i)]);
    F.unit_ids.push_back(row[0]);
    labels.push_back(parse_label(row[1], line));
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto v = parse_cell(row[static_cast<std::size_t>(j) + 2],
                                line + " column " + std::to_string(j + 3));
      if (!v) {
        throw Error(ErrorCode::Validation,
                    "missing value for feature '" + F.feature_names[static_cast<std::size_t>(j)] +
                        "' at " + line);
      }
      F.values(i, j) = *v;
    }
  }
  const auto labeled = std::count_if(labels.begin(), labels.end(),
                                     [](const auto& l) { return l.has_value(); });
  if (labeled == m && m > 0) {
    F.labels.emplace();
    for (const auto& l : labels) F.labels->push_back(*l);
  } else if (labeled > 0) {
    throw Error(ErrorCode::Label, std::string(source) + ": labels must cover every unit");
  }
  F.validate();
  return F;
}

FeatureMatrix load_feature_csv(const std::filesystem::path& path) {
  return parse_feature_csv(read_file(path), path.string());
}

std::string feature_matrix_to_csv(const FeatureMatrix& F) {
  std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  out += "unit,label";
  for (const auto& name : F.feature_names) out += "," + csv_escape(name);
  out += "\n";
  for (std::size_t i = 0; i < F.units(); ++i) {
    out += csv_escape(F.unit_ids[i]) + ",";
    if (F.labels) out += label_name((*F.labels)[i]);
    for (std::size_t j = 0; j < F.features(); ++j) {
      out += "," + format_double(F.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += "\n";
  }
  return out;
}

void apply_label_csv(FeatureMatrix& F, const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() != 2 || table.header[0] != "unit" || table.header[1] != "label") {
    throw Error(ErrorCode::Parse, path.string() + ":1 header must be 'unit,label'");
  }
  std::unordered_map<std::string, Label> by_unit;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = path.string() + ":" + std::to_string(table.line_numbers[r]);
    const auto label = parse_label(table.rows[r][1], where);
    if (!label) throw Error(ErrorCode::Label, "empty label at " + where);
    by_unit[table.rows[r][0]] = *label;
  }
  std::vector<Label> labels;
  for (const auto& id : F.unit_ids) {
    auto it = by_unit.find(id);
    if (it == by_unit.end()) {
      throw Error(ErrorCode::Label, "no label for unit '" + id + "' in " + path.string());
    }
    labels.push_back(it->second);
  }
  F.labels = std::move(labels);
}

nlohmann::json filter_report_to_json(const FilterReport& report) {
  return {
      {"schema_version", kSchemaVersion},
      {"cutoff", report.cutoff},
      {"removed_nzv", report.removed_nzv},
      {"removed_corr", report.removed_corr},
      {"surviving", report.surviving},
      {"counts",
       {{"removed_nzv", report.removed_nzv.size()},
        {"removed_corr", report.removed_corr.size()},
        {"surviving", report.surviving.size()}}},
  };
}

std::string group_means_to_csv(const std::vector<GroupMeans>& rows) {
  std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  out += "feature,follower_mean,dominant_mean\n";
  for (const auto& r : rows) {
    out += csv_escape(r.feature) + "," + format_double(r.follower_mean) + "," +
           format_double(r.dominant_mean) + "\n";
  }
  return out;
}

}  // namespace dominet
