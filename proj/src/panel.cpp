#include "dominet/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_set>

#include "dominet/csv.hpp"
#include "dominet/error.hpp"

namespace dominet {

bool parse_iso_date(const std::string& text, int& year, int& month, int& day) {
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return false;
  if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') return false;
  auto digits = [&](std::size_t from, std::size_t len, int& out) {
    out = 0;
    for (std::size_t i = from; i < from + len; ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
      out = out * 10 + (text[i] - '0');
    }
    return true;
  };
  if (!digits(0, 4, year) || !digits(5, 2, month) || !digits(8, 2, day)) {
    return false;
  }
  if (month < 1 || month > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int limit = kDays[month - 1];
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && leap) limit = 29;
  return day <= limit;
}

void validate_panel(const Panel& p) {
  const auto n = static_cast<Eigen::Index>(p.unit_ids.size());
  const auto t = static_cast<Eigen::Index>(p.time_index.size());
  if (p.values.rows() != t || p.values.cols() != n) {
    throw Error(ErrorCode::Validation,
                "panel values are " + std::to_string(p.values.rows()) + "x" +
                    std::to_string(p.values.cols()) + " but index is " +
                    std::to_string(t) + "x" + std::to_string(n));
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : p.unit_ids) {
    if (id.empty()) throw Error(ErrorCode::Validation, "empty unit id");
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::Validation, "duplicate unit id '" + id + "'");
    }
  }
  std::tuple<int, int, int> prev{-1, 0, 0};
  for (std::size_t i = 0; i < p.time_index.size(); ++i) {
    int y = 0, m = 0, d = 0;
    if (!parse_iso_date(p.time_index[i], y, m, d)) {
      throw Error(ErrorCode::Validation,
                  "malformed ISO-8601 date '" + p.time_index[i] + "'");
    }
    const std::tuple<int, int, int> cur{y, m, d};
    if (i > 0 && !(prev < cur)) {
      throw Error(ErrorCode::Validation,
                  "dates not strictly increasing at '" + p.time_index[i] + "'");
    }
    prev = cur;
  }
  if (!p.values.allFinite()) {
    throw Error(ErrorCode::Validation, "panel contains missing or non-finite values");
  }
}

PanelLoad parse_panel_csv(std::string_view text, std::string_view source,
                          MissingPolicy policy) {
  const CsvTable table = parse_csv(text, source);
  if (table.header.empty() || table.header.front() != "date") {
    throw Error(ErrorCode::Parse,
                std::string(source) + ":1 first column header must be 'date'");
  }
  const std::size_t n_units = table.header.size() - 1;
  const std::size_t n_rows = table.rows.size();

  std::vector<std::vector<double>> columns(n_units, std::vector<double>(n_rows));
  std::vector<bool> has_missing(n_units, false);
  std::vector<std::string> dates(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& row = table.rows[r];
    dates[r] = row[0];
    for (std::size_t c = 0; c < n_units; ++c) {
      const std::string where = std::string(source) + ":" +
                                std::to_string(table.line_numbers[r]) +
                                " column " + std::to_string(c + 2);
      const auto value = parse_cell(row[c + 1], where);
      if (!value) {
        if (policy == MissingPolicy::Fail) {
          throw Error(ErrorCode::Validation, "missing value for unit '" +
                                                 table.header[c + 1] + "' at " +
                                                 where);
        }
        has_missing[c] = true;
        columns[c][r] = 0.0;
      } else {
        columns[c][r] = *value;
      }
    }
  }

  PanelLoad out;
  out.panel.time_index = std::move(dates);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < n_units; ++c) {
    if (has_missing[c]) {
      out.dropped_units.push_back(table.header[c + 1]);
    } else {
      keep.push_back(c);
      out.panel.unit_ids.push_back(table.header[c + 1]);
    }
  }
  out.panel.values.resize(static_cast<Eigen::Index>(n_rows),
                          static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    for (std::size_t r = 0; r < n_rows; ++r) {
      out.panel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          columns[keep[k]][r];
    }
  }
  // Duplicate ids are checked over the full header, dropped or not.
  std::set<std::string> all_ids;
  for (std::size_t c = 0; c < n_units; ++c) {
    if (!all_ids.insert(table.header[c + 1]).second) {
      throw Error(ErrorCode::Validation,
                  "duplicate unit id '" + table.header[c + 1] + "'");
    }
  }
  validate_panel(out.panel);
  return out;
}

PanelLoad load_panel_csv(const std::filesystem::path& path, MissingPolicy policy) {
  return parse_panel_csv(read_file(path), path.string(), policy);
}

std::string panel_to_csv(const Panel& p) {
  std::string out = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
  out += "date";
  for (const auto& id : p.unit_ids) out += "," + csv_escape(id);
  out += "\n";
  for (Eigen::Index t = 0; t < p.values.rows(); ++t) {
    out += p.time_index[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < p.values.cols(); ++i) {
      out += "," + format_double(p.values(t, i));
    }
    out += "\n";
  }
  return out;
}

Panel exclude_units(const Panel& p, const std::vector<std::string>& ids) {
  std::set<std::string> drop(ids.begin(), ids.end());
  for (const auto& id : drop) {
    if (std::find(p.unit_ids.begin(), p.unit_ids.end(), id) == p.unit_ids.end()) {
      throw Error(ErrorCode::Validation, "cannot exclude unknown unit '" + id + "'");
    }
  }
  Panel out;
  out.time_index = p.time_index;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < p.unit_ids.size(); ++i) {
    if (!drop.count(p.unit_ids[i])) {
      keep.push_back(static_cast<Eigen::Index>(i));
      out.unit_ids.push_back(p.unit_ids[i]);
    }
  }
  out.values.resize(p.values.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.values.col(static_cast<Eigen::Index>(k)) = p.values.col(keep[k]);
  }
  return out;
}

Panel first_difference(const Panel& p) {
  if (p.values.rows() < 2) {
    throw Error(ErrorCode::InsufficientData,
                "first difference needs at least 2 periods, got " +
                    std::to_string(p.values.rows()));
  }
  const Eigen::Index t = p.values.rows() - 1;
  Panel out;
  out.unit_ids = p.unit_ids;
  out.time_index.assign(p.time_index.begin() + 1, p.time_index.end());
  out.values = p.values.bottomRows(t) - p.values.topRows(t);
  return out;
}

StandardizedPanel scale_columns(const Panel& p) {
  const Eigen::Index t = p.values.rows();
  if (t < 2) {
    throw Error(ErrorCode::InsufficientData,
                "scaling needs at least 2 periods, got " + std::to_string(t));
  }
  StandardizedPanel out;
  out.unit_ids = p.unit_ids;
  out.time_index = p.time_index;
  out.values.resize(t, p.values.cols());
  out.column_means.resize(p.values.cols());
  out.column_sds.resize(p.values.cols());
  for (Eigen::Index i = 0; i < p.values.cols(); ++i) {
    const double mean = p.values.col(i).mean();
    const Eigen::VectorXd centered = p.values.col(i).array() - mean;
    const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(t - 1));
    // Spread below this is rounding noise on a constant series.
    if (!(sd > 1e-12 * std::max(1.0, std::fabs(mean)))) {
      throw Error(ErrorCode::DegenerateColumn,
                  "unit '" + p.unit_ids[static_cast<std::size_t>(i)] +
                      "' has zero variance after differencing");
    }
    out.column_means(i) = mean;
    out.column_sds(i) = sd;
    out.values.col(i) = centered / sd;
  }
  return out;
}

}  // namespace dominet
