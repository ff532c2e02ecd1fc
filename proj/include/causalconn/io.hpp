// Copyright 2026 The causalconn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Text file formats. Tables are CSV with a block of "# key: value" metadata
// lines before the header row. Doubles are written with 17 significant
// digits so that reading them back is exact.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "causalconn/connectivity.hpp"
#include "causalconn/effects.hpp"
#include "causalconn/error.hpp"
#include "causalconn/experiment.hpp"
#include "causalconn/propensity.hpp"
#include "causalconn/simultaneous.hpp"
#include "causalconn/var_core.hpp"

#ifndef CAUSALCONN_VERSION
#define CAUSALCONN_VERSION "0.0.0"
#endif

namespace causalconn {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string format_optional(const std::optional<double>& x) { return x ? format_double(*x) : "NA"; }

/// Metadata lines written above every table.
struct Metadata {
  std::vector<std::pair<std::string, std::string>> entries;

  Metadata& add(std::string key, std::string value) {
    entries.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    return std::nullopt;
  }
};

inline Metadata standard_metadata(std::uint64_t seed, const Json& params) {
  Metadata m;
  m.add("causalconn", CAUSALCONN_VERSION);
  m.add("seed", std::to_string(seed));
  m.add("params", params.dump());
  return m;
}

struct CsvTable {
  Metadata metadata;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
  std::string source;

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    fail(ErrorCode::ParseError, source + ": missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

inline CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (have_header) continue;
      const std::string body = line.substr(line.find_first_not_of("# ") == std::string::npos
                                               ? line.size()
                                               : line.find_first_not_of("# "));
      const auto colon = body.find(':');
      if (colon != std::string::npos) {
        std::string value = body.substr(colon + 1);
        if (!value.empty() && value[0] == ' ') value.erase(0, 1);
        t.metadata.add(body.substr(0, colon), value);
      }
      continue;
    }
    auto cells = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      fail(ErrorCode::ParseError, source + ":" + std::to_string(number) + ": expected " +
                                      std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(number);
  }
  require(have_header, ErrorCode::ParseError, source + ": no header row");
  return t;
}

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::ParseError, path.string() + ": cannot open");
  return parse_csv(in, path.string());
}

/// Parses one numeric cell; `where` names the file position in errors.
inline double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  while (begin < end && *begin == ' ') ++begin;
  if (begin < end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec == std::errc::result_out_of_range && ptr == end) {
    // overflow becomes inf, underflow a denormal or zero
    v = std::strtod(std::string(begin, end).c_str(), nullptr);
    ec = std::errc();
  }
  if (ec != std::errc() || ptr != end) {
    // from_chars does not accept "nan"/"inf" spelled in every way; treat them as non-finite
    std::string lower;
    for (const char* c = begin; c < end; ++c) lower.push_back(static_cast<char>(std::tolower(*c)));
    if (lower == "nan" || lower == "-nan" || lower == "na" || lower == "inf" || lower == "-inf")
      fail(ErrorCode::NonFiniteValue, where + ": non-finite value '" + cell + "'");
    fail(ErrorCode::ParseError, where + ": not a number: '" + cell + "'");
  }
  if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, where + ": non-finite value '" + cell + "'");
  return v;
}

inline std::string cell_position(const CsvTable& t, std::size_t row, std::size_t col) {
  return t.source + ":" + std::to_string(t.line_numbers[row]) + ":" + std::to_string(col + 1);
}

/// Writes to a sibling temporary file and renames it into place, so a file
/// either exists complete or not at all.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Internal, tmp.string() + ": cannot open for writing");
    out << contents;
    out.flush();
    require(out.good(), ErrorCode::Internal, tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

class CsvWriter {
 public:
  explicit CsvWriter(const Metadata& meta) {
    for (const auto& [k, v] : meta.entries) out_ << "# " << k << ": " << v << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

// ---- time series panels: one row per unit, first column the unit label

inline std::string panel_csv(const TimeSeriesPanel& panel, const Metadata& meta = {}) {
  CsvWriter w(meta);
  std::vector<std::string> header{"unit"};
  for (Eigen::Index t = 0; t < panel.length(); ++t) header.push_back(std::to_string(t));
  w.row(header);
  for (Eigen::Index u = 0; u < panel.units(); ++u) {
    std::vector<std::string> cells{panel.unit_labels()[static_cast<std::size_t>(u)]};
    for (Eigen::Index t = 0; t < panel.length(); ++t) cells.push_back(format_double(panel(u, t)));
    w.row(cells);
  }
  return w.str();
}

inline TimeSeriesPanel parse_panel(const CsvTable& t) {
  require(t.header.size() >= 2, ErrorCode::ShapeMismatch, t.source + ": a panel needs at least one time point");
  require(!t.rows.empty(), ErrorCode::ShapeMismatch, t.source + ": a panel needs at least one unit");
  const auto units = static_cast<Eigen::Index>(t.rows.size());
  const auto length = static_cast<Eigen::Index>(t.header.size() - 1);
  Eigen::MatrixXd values(units, length);
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    labels.push_back(t.rows[r][0]);
    for (std::size_t c = 1; c < t.header.size(); ++c)
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) =
          parse_number(t.rows[r][c], cell_position(t, r, c));
  }
  return TimeSeriesPanel(std::move(values), std::move(labels));
}

inline TimeSeriesPanel read_panel(const fs::path& path) { return parse_panel(read_csv(path)); }

// ---- covariate tables: subject_id, covariates..., treatment column

inline std::string covariates_csv(const CovariateTable& table, const std::string& treatment_column,
                                  const Metadata& meta = {}) {
  CsvWriter w(meta);
  std::vector<std::string> header{"subject_id"};
  for (Eigen::Index k = 0; k < table.covariates(); ++k)
    header.push_back(table.covariate_names.empty() ? "w" + std::to_string(k)
                                                   : table.covariate_names[static_cast<std::size_t>(k)]);
  header.push_back(treatment_column);
  w.row(header);
  for (Eigen::Index i = 0; i < table.subjects(); ++i) {
    std::vector<std::string> cells{table.subject_ids.empty() ? "s" + std::to_string(i)
                                                             : table.subject_ids[static_cast<std::size_t>(i)]};
    for (Eigen::Index k = 0; k < table.covariates(); ++k) cells.push_back(format_double(table.values(i, k)));
    cells.push_back(std::to_string(table.treatment(i)));
    w.row(cells);
  }
  return w.str();
}

inline CovariateTable parse_covariates(const CsvTable& t, const std::string& treatment_column) {
  const std::size_t id_col = t.column("subject_id");
  const std::size_t z_col = t.column(treatment_column);
  CovariateTable table;
  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != id_col && c != z_col) {
      cov_cols.push_back(c);
      table.covariate_names.push_back(t.header[c]);
    }
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  table.values.resize(n, static_cast<Eigen::Index>(cov_cols.size()));
  table.treatment.resize(n);
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& id = t.rows[r][id_col];
    require(seen.insert(id).second, ErrorCode::ShapeMismatch, cell_position(t, r, id_col) + ": duplicate subject '" + id + "'");
    table.subject_ids.push_back(id);
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          parse_number(t.rows[r][cov_cols[k]], cell_position(t, r, cov_cols[k]));
    const double z = parse_number(t.rows[r][z_col], cell_position(t, r, z_col));
    require(z == 0.0 || z == 1.0, ErrorCode::ParseError, cell_position(t, r, z_col) + ": treatment must be 0 or 1");
    table.treatment(static_cast<Eigen::Index>(r)) = static_cast<int>(z);
  }
  return table;
}

inline CovariateTable read_covariates(const fs::path& path, const std::string& treatment_column) {
  return parse_covariates(read_csv(path), treatment_column);
}

// ---- outcome panels: subject_id, then one column per pair "source:target"

inline std::string outcomes_csv(const OutcomePanel& y, const std::vector<std::string>& unit_labels,
                                const Metadata& meta = {}) {
  Metadata m = meta;
  std::string units;
  for (std::size_t i = 0; i < unit_labels.size(); ++i) units += (i ? ";" : "") + unit_labels[i];
  m.add("units", units);
  CsvWriter w(m);
  std::vector<std::string> header{"subject_id"};
  for (const UnitPair& p : y.pairs) header.push_back(to_string(p));
  w.row(header);
  for (Eigen::Index i = 0; i < y.subjects(); ++i) {
    std::vector<std::string> cells{y.subject_ids[static_cast<std::size_t>(i)]};
    for (Eigen::Index k = 0; k < y.components(); ++k) cells.push_back(format_double(y.values(i, k)));
    w.row(cells);
  }
  return w.str();
}

inline UnitPair parse_pair(const std::string& s, const std::string& where) {
  const auto colon = s.find(':');
  require(colon != std::string::npos, ErrorCode::ParseError, where + ": pair '" + s + "' is not source:target");
  const double a = parse_number(s.substr(0, colon), where);
  const double b = parse_number(s.substr(colon + 1), where);
  require(a >= 0 && b >= 0 && a == std::floor(a) && b == std::floor(b) && a != b, ErrorCode::ParseError,
          where + ": bad pair '" + s + "'");
  return {static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)};
}

inline OutcomePanel parse_outcomes(const CsvTable& t) {
  require(!t.header.empty() && t.header[0] == "subject_id", ErrorCode::ParseError,
          t.source + ": first column must be subject_id");
  OutcomePanel y;
  for (std::size_t c = 1; c < t.header.size(); ++c) y.pairs.push_back(parse_pair(t.header[c], t.source + ":header"));
  y.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(y.pairs.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    y.subject_ids.push_back(t.rows[r][0]);
    for (std::size_t c = 1; c < t.header.size(); ++c)
      y.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) =
          parse_number(t.rows[r][c], cell_position(t, r, c));
  }
  return y;
}

inline OutcomePanel read_outcomes(const fs::path& path) { return parse_outcomes(read_csv(path)); }

// ---- result tables

inline std::string connectivity_csv(const ConnectivityOutcome& c, const Metadata& meta = {}) {
  Metadata m = meta;
  m.add("subject_id", c.subject_id).add("order", std::to_string(c.model.order));
  CsvWriter w(m);
  w.row({"source", "target", "f_value", "df1", "df2", "p_value", "rank_adjusted", "conditioning"});
  for (const auto& [pair, f] : c.entries) {
    std::string cond;
    const auto it = c.model.conditioning.find(pair);
    if (it != c.model.conditioning.end())
      for (std::size_t i = 0; i < it->second.size(); ++i) cond += (i ? ";" : "") + std::to_string(it->second[i]);
    w.row({std::to_string(pair.source), std::to_string(pair.target), format_double(f.value), std::to_string(f.df1),
           std::to_string(f.df2), format_double(f.p_value), f.rank_adjusted ? "1" : "0", cond});
  }
  return w.str();
}

inline std::string derivation_report_csv(const std::vector<DerivationIssue>& issues,
                                         const std::vector<DroppedPair>& dropped, const Metadata& meta = {}) {
  CsvWriter w(meta);
  w.row({"subject_id", "source", "target", "code", "missing"});
  for (const auto& i : issues)
    w.row({i.subject_id, std::to_string(i.source), std::to_string(i.target), i.code, i.missing ? "1" : "0"});
  for (const auto& d : dropped)
    w.row({d.subject_id, std::to_string(d.pair.source), std::to_string(d.pair.target), "DroppedFromPanel", "1"});
  return w.str();
}

inline std::string effects_csv(const EffectEstimates& e, const Metadata& meta = {}) {
  CsvWriter w(meta);
  w.row({"pair", "tau_star", "variance", "active"});
  for (std::size_t k = 0; k < e.pairs.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    w.row({to_string(e.pairs[k]), format_double(e.tau_star(kk)), format_double(e.variance(kk)), e.active[k] ? "1" : "0"});
  }
  return w.str();
}

inline std::string inference_csv(const EffectEstimates& e, const SimultaneousResult& r, Eigen::Index n,
                                 const Metadata& meta = {}) {
  Metadata m = meta;
  m.add("quantile", format_double(r.quantile)).add("stepdown_rejections", std::to_string(r.stepdown_rejections));
  m.add("total_rejections", std::to_string(r.rejections.size()));
  CsvWriter w(m);
  w.row({"pair", "tau_star", "variance", "std_stat", "ci_lower", "ci_upper", "rejected", "stage"});
  const Eigen::VectorXd t = standardized_statistics(e.tau_star, e.variance, n);
  for (std::size_t a = 0; a < r.active.size(); ++a) {
    const Eigen::Index k = r.active[a];
    std::string stage;
    for (std::size_t j = 0; j < r.rejections.size(); ++j)
      if (r.rejections[j] == k) stage = r.stages[j] == 0 ? "augmented" : "stepdown:" + std::to_string(r.stages[j]);
    w.row({to_string(e.pairs[static_cast<std::size_t>(k)]), format_double(e.tau_star(k)), format_double(e.variance(k)),
           format_double(t(k)), format_double(r.intervals[a].lower), format_double(r.intervals[a].upper),
           stage.empty() ? "0" : "1", stage});
  }
  return w.str();
}

inline Json propensity_summary(const PropensityFit& fit, const CovariateTable& table) {
  Json j;
  j["link"] = to_string(fit.link);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["log_likelihood"] = fit.log_likelihood;
  const Eigen::VectorXd se = fit.standard_errors();
  Json coefs = Json::array();
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    Json c;
    c["covariate"] = table.covariate_names.empty() ? "w" + std::to_string(k)
                                                   : table.covariate_names[static_cast<std::size_t>(k)];
    c["beta"] = fit.beta(k);
    c["se"] = se(k);
    coefs.push_back(c);
  }
  j["coefficients"] = coefs;
  j["min_fitted"] = fit.fitted.minCoeff();
  j["max_fitted"] = fit.fitted.maxCoeff();
  j["subjects"] = fit.fitted.size();
  j["treated"] = table.treated();
  return j;
}

inline const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> h{"cell",  "delta",       "n",      "p",        "method",   "description",
                                          "fwer",  "fwer_se",     "power",  "fdp_mean", "fdpex",    "fdpex_se",
                                          "bias_mean", "rmse", "replications", "failed"};
  return h;
}

inline std::vector<std::string> metrics_row(const MetricsReport& m) {
  return {m.cell,
          format_double(m.delta),
          std::to_string(m.n),
          std::to_string(m.p),
          m.method.name(),
          m.method.description(),
          format_double(m.fwer),
          format_double(m.fwer_se),
          format_optional(m.power),
          format_double(m.fdp_mean),
          format_double(m.fdpex),
          format_double(m.fdpex_se),
          format_double(m.bias_mean),
          format_double(m.rmse),
          std::to_string(m.replications),
          std::to_string(m.failed)};
}

inline std::string metrics_csv(const std::vector<MetricsReport>& reports, const Metadata& meta = {}) {
  CsvWriter w(meta);
  w.row(metrics_header());
  for (const auto& m : reports) w.row(metrics_row(m));
  return w.str();
}

inline std::string detail_csv(const std::vector<std::vector<ReplicationDetail>>& details, const Metadata& meta = {}) {
  CsvWriter w(meta);
  w.row({"replication", "method", "failed", "rejections", "stepdown_rejections", "false_rejections", "quantile", "error"});
  for (const auto& rep : details)
    for (const auto& d : rep) {
      const std::set<UnitPair> truth(d.truth.begin(), d.truth.end());
      std::string rej;
      int false_count = 0;
      for (std::size_t i = 0; i < d.rejections.size(); ++i) {
        rej += (i ? ";" : "") + to_string(d.rejections[i]);
        false_count += truth.contains(d.rejections[i]) ? 0 : 1;
      }
      w.row({std::to_string(d.replication), d.method.name(), d.failed ? "1" : "0", rej,
             std::to_string(d.stepdown_rejections), std::to_string(false_count), format_double(d.quantile), d.error});
    }
  return w.str();
}

// ---- datasets

struct StudyDataset {
  std::vector<TimeSeriesPanel> panels;
  CovariateTable table;  // rows in the same order as panels
  std::vector<std::string> notes;
};

struct ManifestOptions {
  bool allow_unequal_length = false;
  Eigen::Index min_length = 0;
};

/// Manifest: {"subjects": [{"id": ..., "file": ...}], "covariates": file,
/// "treatment_column": name}. Relative paths resolve against the manifest.
inline StudyDataset load_dataset(const fs::path& manifest_path, ManifestOptions options = {}) {
  std::ifstream in(manifest_path);
  require(in.good(), ErrorCode::ParseError, manifest_path.string() + ": cannot open");
  Json m;
  try {
    m = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::ParseError, manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  require(m.contains("subjects") && m["subjects"].is_array() && m.contains("covariates"), ErrorCode::ParseError,
          manifest_path.string() + ": manifest needs 'subjects' and 'covariates'");
  const std::string treatment = m.value("treatment_column", std::string("treatment"));
  if (m.contains("allow_unequal_length")) options.allow_unequal_length = m["allow_unequal_length"].get<bool>();
  if (m.contains("min_length")) options.min_length = m["min_length"].get<Eigen::Index>();

  const CovariateTable all = read_covariates(resolve(m["covariates"].get<std::string>()), treatment);
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < all.subject_ids.size(); ++i) row_of[all.subject_ids[i]] = static_cast<Eigen::Index>(i);

  StudyDataset ds;
  std::vector<Eigen::Index> rows;
  for (const Json& s : m["subjects"]) {
    const std::string id = s.at("id").get<std::string>();
    const auto it = row_of.find(id);
    require(it != row_of.end(), ErrorCode::ShapeMismatch, "subject '" + id + "' has no covariate row");
    TimeSeriesPanel panel;
    try {
      panel = read_panel(resolve(s.at("file").get<std::string>()));
    } catch (const Error& e) {
      throw Error(e.code(), "subject '" + id + "': " + e.what());
    }
    if (!ds.panels.empty()) {
      const TimeSeriesPanel& first = ds.panels.front();
      require(panel.unit_labels() == first.unit_labels(), ErrorCode::ShapeMismatch,
              "subject '" + id + "': unit labels differ from the first subject");
      if (!options.allow_unequal_length)
        require(panel.length() == first.length(), ErrorCode::ShapeMismatch,
                "subject '" + id + "': length " + std::to_string(panel.length()) + " differs from " +
                    std::to_string(first.length()));
    }
    require(panel.length() >= options.min_length, ErrorCode::SeriesTooShort,
            "subject '" + id + "': length " + std::to_string(panel.length()) + " below the configured minimum");
    ds.panels.push_back(std::move(panel));
    rows.push_back(it->second);
  }
  require(!ds.panels.empty(), ErrorCode::ShapeMismatch, "manifest lists no subjects");
  Eigen::Index shortest = ds.panels.front().length(), longest = shortest;
  for (const auto& panel : ds.panels) {
    shortest = std::min(shortest, panel.length());
    longest = std::max(longest, panel.length());
  }
  ds.notes.push_back(std::to_string(ds.panels.size()) + " subjects, " + std::to_string(ds.panels.front().units()) +
                     " units, T in [" + std::to_string(shortest) + ", " + std::to_string(longest) + "]");
  ds.table.values.resize(static_cast<Eigen::Index>(rows.size()), all.covariates());
  ds.table.treatment.resize(static_cast<Eigen::Index>(rows.size()));
  ds.table.covariate_names = all.covariate_names;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.table.values.row(static_cast<Eigen::Index>(i)) = all.values.row(rows[i]);
    ds.table.treatment(static_cast<Eigen::Index>(i)) = all.treatment(rows[i]);
    ds.table.subject_ids.push_back(all.subject_ids[static_cast<std::size_t>(rows[i])]);
  }
  if (rows.size() < all.subject_ids.size())
    ds.notes.push_back(std::to_string(all.subject_ids.size() - rows.size()) + " covariate rows without a series");
  return ds;
}

/// Writes panels/<id>.csv, covariates.csv and manifest.json under `dir`.
inline void write_dataset(const fs::path& dir, const StudyDataset& ds, const std::string& treatment_column,
                          const Metadata& meta = {}) {
  Json manifest;
  manifest["covariates"] = "covariates.csv";
  manifest["treatment_column"] = treatment_column;
  manifest["subjects"] = Json::array();
  for (std::size_t i = 0; i < ds.panels.size(); ++i) {
    const std::string& id = ds.table.subject_ids[i];
    const std::string file = "panels/" + id + ".csv";
    write_file_atomic(dir / file, panel_csv(ds.panels[i], meta));
    manifest["subjects"].push_back({{"id", id}, {"file", file}});
  }
  write_file_atomic(dir / "covariates.csv", covariates_csv(ds.table, treatment_column, meta));
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace causalconn
