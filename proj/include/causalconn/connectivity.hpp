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

// Per-subject effective connectivity: the series is split into two contiguous
// blocks, the VAR order and the conditioning sets are chosen on the first, and
// conditional Granger F statistics are computed on the second.

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causalconn/error.hpp"
#include "causalconn/stats.hpp"
#include "causalconn/var_core.hpp"

namespace causalconn {

/// Ordered pair of units: `source` (j1) possibly Granger-causing `target` (j2).
struct UnitPair {
  Eigen::Index source = 0;
  Eigen::Index target = 0;

  auto operator<=>(const UnitPair&) const = default;
  bool operator==(const UnitPair&) const = default;
};

inline std::string to_string(const UnitPair& pair) {
  return std::to_string(pair.source) + ":" + std::to_string(pair.target);
}

/// All p(p-1) ordered pairs in lexicographic order.
inline std::vector<UnitPair> all_ordered_pairs(Eigen::Index units) {
  std::vector<UnitPair> pairs;
  pairs.reserve(static_cast<std::size_t>(units * (units - 1)));
  for (Eigen::Index a = 0; a < units; ++a)
    for (Eigen::Index b = 0; b < units; ++b)
      if (a != b) pairs.push_back({a, b});
  return pairs;
}

enum class SelectionCriterion { BIC, AIC };
enum class ScreeningRule { CrossCorrelation, PartialCorrelation };

struct SplitConfig {
  double split_fraction = 0.5;
  int max_order = 3;
  /// Largest conditioning set; unset means min(5, p - 2).
  std::optional<int> max_conditioning;
  SelectionCriterion selection_criterion = SelectionCriterion::BIC;
  ScreeningRule screening_rule = ScreeningRule::CrossCorrelation;
};

inline int resolved_max_conditioning(const SplitConfig& config, Eigen::Index units) {
  const int cap = static_cast<int>(std::max<Eigen::Index>(units - 2, 0));
  if (config.max_conditioning) return std::min(*config.max_conditioning, cap);
  return std::min(5, cap);
}

struct ModelChoice {
  int order = 1;
  std::map<UnitPair, std::vector<Eigen::Index>> conditioning;
  /// Criterion value per candidate order (index 0 is order 1); +inf marks an
  /// order that could not be fitted.
  std::vector<double> criterion_values;

  bool operator==(const ModelChoice& other) const {
    return order == other.order && conditioning == other.conditioning;
  }
};

struct FStatistic {
  double value = 0.0;
  int df1 = 0;
  int df2 = 0;
  double p_value = 1.0;
  double rss_reduced = 0.0;
  double rss_full = 0.0;
  /// Collinear regressors were dropped and the degrees of freedom adjusted.
  bool rank_adjusted = false;

  bool operator==(const FStatistic&) const = default;
};

/// One machine-readable line of a derivation report.
struct DerivationIssue {
  std::string subject_id;
  Eigen::Index source = 0;
  Eigen::Index target = 0;
  std::string code;
  /// The pair has no F statistic (as opposed to a flagged but usable one).
  bool missing = true;

  bool operator==(const DerivationIssue&) const = default;
};

struct ConnectivityOutcome {
  std::string subject_id;
  std::map<UnitPair, FStatistic> entries;
  ModelChoice model;
  std::vector<DerivationIssue> report;

  bool operator==(const ConnectivityOutcome&) const = default;
};

/// Nominal second-stage degrees of freedom (n_eff - (l + 2) r - 1).
inline int nominal_df2(Eigen::Index block_length, int order, int conditioning_size) {
  return static_cast<int>(block_length - order) - (conditioning_size + 2) * order - 1;
}

inline void validate_split_config(const SplitConfig& config) {
  require(config.split_fraction > 0.0 && config.split_fraction < 1.0, ErrorCode::ConfigInvalid,
          "split_fraction must lie in (0, 1)");
  require(config.max_order >= 1, ErrorCode::ConfigInvalid, "max_order must be at least 1");
  require(!config.max_conditioning || *config.max_conditioning >= 0, ErrorCode::ConfigInvalid,
          "max_conditioning must be nonnegative");
}

/// First block [0, T0) and second block [T0, T) with T0 = floor(fraction * T).
inline std::pair<TimeRange, TimeRange> split_panel(Eigen::Index length, const SplitConfig& config) {
  validate_split_config(config);
  if (length < 4 * (static_cast<Eigen::Index>(config.max_order) + 1))
    fail(ErrorCode::SeriesTooShort, "series of length " + std::to_string(length) + " is shorter than 4 * (max_order + 1)");
  const auto t0 = static_cast<Eigen::Index>(std::floor(config.split_fraction * static_cast<double>(length)));
  if (t0 < 1 || t0 >= length) fail(ErrorCode::SeriesTooShort, "split leaves an empty block");
  return {TimeRange{0, t0}, TimeRange{t0, length}};
}

inline std::pair<TimeRange, TimeRange> split_panel(const TimeSeriesPanel& panel, const SplitConfig& config) {
  return split_panel(panel.length(), config);
}

namespace detail {

inline double log_det_or_neg_inf(const Eigen::MatrixXd& sym) {
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const auto diag = llt.matrixLLT().diagonal();
  double out = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0)) return -std::numeric_limits<double>::infinity();
    out += 2.0 * std::log(diag(i));
  }
  return out;
}

// |corr| between residual columns; zero when either is numerically null.
inline double abs_correlation(const Eigen::VectorXd& a, double a_scale, const Eigen::VectorXd& b, double b_scale) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= 1e-10 * a_scale || nb <= 1e-10 * b_scale || na == 0.0 || nb == 0.0) return 0.0;
  return std::min(1.0, std::abs(a.dot(b)) / (na * nb));
}

/// Candidate units for `target` ranked by screening score (descending, ties
/// by ascending index).
inline std::vector<Eigen::Index> screening_ranking(const LaggedDesign& design, Eigen::Index target, int order,
                                                   ScreeningRule rule) {
  const Eigen::Index p = static_cast<Eigen::Index>(design.units().size());
  std::vector<Eigen::Index> conditioning_cols{LaggedDesign::intercept_column()};
  if (rule == ScreeningRule::PartialCorrelation)
    for (int lag = 1; lag <= order; ++lag) conditioning_cols.push_back(design.lag_column(target, lag));

  std::vector<Eigen::Index> responses{design.current_column(target)};
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index k : design.units()) {
    if (k == target) continue;
    candidates.push_back(k);
    for (int lag = 1; lag <= order; ++lag) responses.push_back(design.lag_column(k, lag));
  }
  const Eigen::MatrixXd raw = design.residuals(responses, {});
  const Eigen::MatrixXd res = design.residuals(responses, conditioning_cols);

  std::vector<std::pair<double, Eigen::Index>> scored;
  scored.reserve(candidates.size());
  const Eigen::VectorXd y = res.col(0);
  const double y_scale = raw.col(0).norm();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double score = 0.0;
    for (int lag = 1; lag <= order; ++lag) {
      const Eigen::Index col = 1 + static_cast<Eigen::Index>(c) * order + (lag - 1);
      score = std::max(score, abs_correlation(res.col(col), raw.col(col).norm(), y, y_scale));
    }
    scored.emplace_back(score, candidates[c]);
  }
  (void)p;
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<Eigen::Index> ranking;
  ranking.reserve(scored.size());
  for (const auto& s : scored) ranking.push_back(s.second);
  return ranking;
}

inline std::vector<Eigen::Index> pick_conditioning(const std::vector<Eigen::Index>& ranking, Eigen::Index source,
                                                   int capacity) {
  std::vector<Eigen::Index> chosen;
  for (Eigen::Index k : ranking) {
    if (static_cast<int>(chosen.size()) >= capacity) break;
    if (k == source) continue;
    chosen.push_back(k);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// Reduced-model fit shared across sources with the same conditioning set.
struct ReducedKey {
  Eigen::Index target;
  std::vector<Eigen::Index> conditioning;
  auto operator<=>(const ReducedKey&) const = default;
};

inline std::vector<Eigen::Index> reduced_units(Eigen::Index target, const std::vector<Eigen::Index>& conditioning) {
  std::vector<Eigen::Index> units{target};
  units.insert(units.end(), conditioning.begin(), conditioning.end());
  return units;
}

inline FStatistic granger_from_fits(const SubsetFit& reduced, const SubsetFit& full, Eigen::Index n_eff, int order,
                                    int conditioning_size) {
  FStatistic f;
  f.rss_reduced = reduced.rss;
  f.rss_full = full.rss;
  f.rank_adjusted = reduced.dropped() > 0 || full.dropped() > 0;
  if (f.rank_adjusted) {
    f.df1 = static_cast<int>(full.rank - reduced.rank);
    f.df2 = static_cast<int>(n_eff - full.rank);
  } else {
    f.df1 = order;
    f.df2 = nominal_df2(n_eff + order, order, conditioning_size);
  }
  if (f.df2 < 1) fail(ErrorCode::InsufficientSamples, "second-stage residual degrees of freedom below 1");
  if (full.rss == 0.0 || full.rss <= 1e-20 * full.response_ss)
    fail(ErrorCode::DegenerateResidual, "full-model residual sum of squares is zero");
  if (f.df1 == 0) {
    f.value = 0.0;
    f.p_value = 1.0;
    return f;
  }
  double value = ((reduced.rss - full.rss) / f.df1) / (full.rss / f.df2);
  if (value < 0.0) {
    if (value < -1e-10) fail(ErrorCode::Internal, "full model fits worse than the nested reduced model");
    value = 0.0;
  }
  f.value = value;
  f.p_value = f_upper_tail(value, f.df1, f.df2);
  return f;
}

}  // namespace detail

/// Chooses the VAR order by an information criterion on a full-panel VAR
/// fitted over `selection_block`, then for every pair the conditioning set
/// from screening scores against the target on that same block.
inline ModelChoice select_model(const TimeSeriesPanel& panel, TimeRange selection_block, const SplitConfig& config,
                                const std::vector<UnitPair>& pairs) {
  validate_split_config(config);
  const Eigen::Index p = panel.units();
  const int max_order = config.max_order;
  const LaggedDesign design(panel, selection_block, max_order);
  const Eigen::Index n_eff = design.effective_samples();

  ModelChoice choice;
  choice.criterion_values.assign(static_cast<std::size_t>(max_order), std::numeric_limits<double>::infinity());
  std::vector<Eigen::Index> currents;
  for (Eigen::Index u = 0; u < p; ++u) currents.push_back(design.current_column(u));

  double best = std::numeric_limits<double>::infinity();
  int best_order = 0;
  for (int r = 1; r <= max_order; ++r) {
    const Eigen::Index k = 1 + p * r;
    if (k >= n_eff) break;
    std::vector<Eigen::Index> regressors(static_cast<std::size_t>(k));
    std::iota(regressors.begin(), regressors.end(), Eigen::Index{0});
    const Eigen::MatrixXd resid = design.residuals(currents, regressors);
    const Eigen::MatrixXd sigma = resid.transpose() * resid / static_cast<double>(n_eff);
    const double params = static_cast<double>(p * k);
    const double penalty = config.selection_criterion == SelectionCriterion::BIC
                               ? std::log(static_cast<double>(n_eff)) * params
                               : 2.0 * params;
    const double value = static_cast<double>(n_eff) * detail::log_det_or_neg_inf(sigma) + penalty;
    choice.criterion_values[static_cast<std::size_t>(r - 1)] = value;
    if (best_order == 0 || value < best) {
      best = value;
      best_order = r;
    }
  }
  if (best_order == 0)
    fail(ErrorCode::InsufficientSamples, "selection block too short for a full-panel VAR of order 1");
  choice.order = best_order;

  const int capacity = resolved_max_conditioning(config, p);
  std::map<Eigen::Index, std::vector<Eigen::Index>> rankings;
  for (const UnitPair& pair : pairs) {
    require(pair.source != pair.target && pair.source >= 0 && pair.source < p && pair.target >= 0 && pair.target < p,
            ErrorCode::DimensionMismatch, "invalid unit pair " + to_string(pair));
    if (capacity == 0) {
      choice.conditioning[pair] = {};
      continue;
    }
    auto it = rankings.find(pair.target);
    if (it == rankings.end())
      it = rankings.emplace(pair.target, detail::screening_ranking(design, pair.target, choice.order,
                                                                   config.screening_rule)).first;
    choice.conditioning[pair] = detail::pick_conditioning(it->second, pair.source, capacity);
  }
  return choice;
}

/// Conditional Granger F statistic for source -> target given `conditioning`,
/// from reduced and full single-equation fits of order `order` on `block`.
inline FStatistic conditional_granger_f(const TimeSeriesPanel& panel, TimeRange block, Eigen::Index source,
                                        Eigen::Index target, const std::vector<Eigen::Index>& conditioning,
                                        int order) {
  require(source != target, ErrorCode::ConfigInvalid, "source and target must differ");
  for (Eigen::Index k : conditioning)
    require(k != source && k != target, ErrorCode::ConfigInvalid, "conditioning set contains the pair");
  std::vector<Eigen::Index> units = detail::reduced_units(target, conditioning);
  units.push_back(source);
  if (nominal_df2(block.length(), order, static_cast<int>(conditioning.size())) < 1)
    fail(ErrorCode::InsufficientSamples, "block too short for the requested order and conditioning set");
  const LaggedDesign design(panel, block, order, units);
  const auto reduced_regressors = design.lag_columns(detail::reduced_units(target, conditioning));
  const auto full_regressors = design.lag_columns(units);
  const Eigen::Index response = design.current_column(target);
  return detail::granger_from_fits(design.fit(response, reduced_regressors), design.fit(response, full_regressors),
                                   design.effective_samples(), order, static_cast<int>(conditioning.size()));
}

/// Runs split, selection and per-pair F statistics for one subject. With
/// use_splitting = false, selection also runs on the second block.
inline ConnectivityOutcome derive_connectivity(const TimeSeriesPanel& panel, const SplitConfig& config,
                                               const std::string& subject_id, bool use_splitting,
                                               std::vector<UnitPair> pairs = {}) {
  const Eigen::Index p = panel.units();
  require(p >= 2, ErrorCode::ShapeMismatch, "connectivity needs at least two units");
  if (pairs.empty()) pairs = all_ordered_pairs(p);
  const auto [first, second] = split_panel(panel, config);
  const int capacity = resolved_max_conditioning(config, p);
  if (nominal_df2(second.length(), config.max_order, capacity) < 1)
    fail(ErrorCode::InsufficientSamples, "second block too short for max_order and max_conditioning");

  ConnectivityOutcome out;
  out.subject_id = subject_id;
  out.model = select_model(panel, use_splitting ? first : second, config, pairs);
  const int order = out.model.order;
  const LaggedDesign design(panel, second, order);
  const Eigen::Index n_eff = design.effective_samples();

  std::map<detail::ReducedKey, SubsetFit> reduced_cache;
  for (const UnitPair& pair : pairs) {
    const auto& conditioning = out.model.conditioning.at(pair);
    try {
      detail::ReducedKey key{pair.target, conditioning};
      auto it = reduced_cache.find(key);
      const Eigen::Index response = design.current_column(pair.target);
      if (it == reduced_cache.end()) {
        const auto cols = design.lag_columns(detail::reduced_units(pair.target, conditioning));
        it = reduced_cache.emplace(std::move(key), design.fit(response, cols)).first;
      }
      auto full_units = detail::reduced_units(pair.target, conditioning);
      full_units.push_back(pair.source);
      const SubsetFit full = design.fit(response, design.lag_columns(full_units));
      FStatistic f = detail::granger_from_fits(it->second, full, n_eff, order, static_cast<int>(conditioning.size()));
      if (f.rank_adjusted) out.report.push_back({subject_id, pair.source, pair.target, "RankAdjusted", false});
      out.entries.emplace(pair, f);
    } catch (const Error& e) {
      out.report.push_back({subject_id, pair.source, pair.target, std::string(to_string(e.code())), true});
    }
  }
  return out;
}

/// |F(D2) - F(D2')| where D2' drops the first `deleted` observations of the
/// second block; both use the model selected on the first block.
inline double deletion_stability_gap(const TimeSeriesPanel& panel, const SplitConfig& config, Eigen::Index source,
                                     Eigen::Index target, Eigen::Index deleted) {
  require(deleted >= 0, ErrorCode::ConfigInvalid, "deletion length must be nonnegative");
  const auto [first, second] = split_panel(panel, config);
  const UnitPair pair{source, target};
  const ModelChoice model = select_model(panel, first, config, {pair});
  const auto& conditioning = model.conditioning.at(pair);
  if (deleted >= second.length()) fail(ErrorCode::InsufficientSamples, "deletion removes the whole second block");
  const FStatistic full_block = conditional_granger_f(panel, second, source, target, conditioning, model.order);
  if (deleted == 0) return 0.0;
  const FStatistic trimmed =
      conditional_granger_f(panel, {second.begin + deleted, second.end}, source, target, conditioning, model.order);
  const double gap = std::abs(full_block.value - trimmed.value);
  if (!std::isfinite(gap)) fail(ErrorCode::Internal, "non-finite deletion gap");
  return gap;
}

}  // namespace causalconn
