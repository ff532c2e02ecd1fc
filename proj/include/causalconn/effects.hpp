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

// Inverse probability weighted intervention effects on connectivity, with
// influence functions corrected for the estimated propensity.

#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalconn/connectivity.hpp"
#include "causalconn/error.hpp"
#include "causalconn/propensity.hpp"

namespace causalconn {

inline constexpr double kDefaultVarianceFloor = 1e-8;

/// Subjects in rows, one column per ordered pair.
struct OutcomePanel {
  Eigen::MatrixXd values;
  std::vector<UnitPair> pairs;
  std::vector<std::string> subject_ids;

  Eigen::Index subjects() const { return values.rows(); }
  Eigen::Index components() const { return values.cols(); }
};

struct DroppedPair {
  UnitPair pair;
  std::string subject_id;  // first subject missing the pair
};

/// Stacks per-subject connectivity into an outcome panel. Pairs missing for
/// any subject are dropped for everyone and listed in `dropped`.
inline OutcomePanel assemble_outcomes(const std::vector<ConnectivityOutcome>& subjects,
                                      std::vector<DroppedPair>* dropped = nullptr) {
  require(!subjects.empty(), ErrorCode::ShapeMismatch, "no subjects");
  std::set<UnitPair> all;
  for (const auto& s : subjects)
    for (const auto& issue : s.report)
      if (issue.missing) all.insert({issue.source, issue.target});
  for (const auto& s : subjects)
    for (const auto& [pair, f] : s.entries) all.insert(pair);

  OutcomePanel out;
  for (const UnitPair& pair : all) {
    const ConnectivityOutcome* missing_in = nullptr;
    for (const auto& s : subjects)
      if (!s.entries.contains(pair)) {
        missing_in = &s;
        break;
      }
    if (missing_in != nullptr) {
      if (dropped != nullptr) dropped->push_back({pair, missing_in->subject_id});
      continue;
    }
    out.pairs.push_back(pair);
  }
  out.values.resize(static_cast<Eigen::Index>(subjects.size()), static_cast<Eigen::Index>(out.pairs.size()));
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    out.subject_ids.push_back(subjects[i].subject_id);
    for (std::size_t k = 0; k < out.pairs.size(); ++k)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = subjects[i].entries.at(out.pairs[k]).value;
  }
  return out;
}

namespace detail {

inline void check_alignment(const OutcomePanel& outcomes, const CovariateTable& table, const PropensityFit& fit) {
  require(outcomes.subjects() == table.subjects(), ErrorCode::AlignmentMismatch,
          "outcome panel has " + std::to_string(outcomes.subjects()) + " subjects, covariate table " +
              std::to_string(table.subjects()));
  require(fit.fitted.size() == table.subjects(), ErrorCode::AlignmentMismatch, "propensity fit has the wrong length");
  if (!outcomes.subject_ids.empty() && !table.subject_ids.empty())
    require(outcomes.subject_ids == table.subject_ids, ErrorCode::AlignmentMismatch,
            "subject order differs between outcomes and covariates");
}

/// Per-subject IPW contributions Z Y / e - (1 - Z) Y / (1 - e).
inline Eigen::MatrixXd ipw_contributions(const Eigen::MatrixXd& y, const Eigen::VectorXi& z, const Eigen::VectorXd& e) {
  Eigen::MatrixXd c(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    c.row(i) = z(i) == 1 ? (y.row(i) / e(i)).eval() : (-y.row(i) / (1.0 - e(i))).eval();
  return c;
}

}  // namespace detail

inline Eigen::VectorXd ipw_estimate(const OutcomePanel& outcomes, const CovariateTable& table, const PropensityFit& fit) {
  detail::check_alignment(outcomes, table, fit);
  const Eigen::MatrixXd c = detail::ipw_contributions(outcomes.values, table.treatment, fit.fitted);
  return c.colwise().mean().transpose();
}

enum class VarianceMode {
  Corrected,       // beta estimated: subtract the projection on the score
  KnownPropensity  // propensities treated as known
};

inline Eigen::MatrixXd influence_functions(const OutcomePanel& outcomes, const CovariateTable& table,
                                           const PropensityFit& fit, const Eigen::VectorXd& tau_star,
                                           VarianceMode mode = VarianceMode::Corrected) {
  detail::check_alignment(outcomes, table, fit);
  require(tau_star.size() == outcomes.components(), ErrorCode::DimensionMismatch, "tau length differs from outcomes");
  const Eigen::Index n = outcomes.subjects();
  Eigen::MatrixXd h = detail::ipw_contributions(outcomes.values, table.treatment, fit.fitted);
  h.rowwise() -= tau_star.transpose();
  if (mode == VarianceMode::KnownPropensity) return h;

  require(fit.beta.size() == table.covariates() && fit.eta.size() == n, ErrorCode::DimensionMismatch,
          "propensity fit does not match the covariate table");
  const LinkValues v = link_values(fit.link, fit.eta);
  const Eigen::VectorXd& s = fit.fitted;
  const Eigen::MatrixXd& w = table.values;

  Eigen::VectorXd grad_weight(n);
  Eigen::VectorXd score_weight(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sp = v.sigma_prime(i);
    if (table.treatment(i) == 1) {
      grad_weight(i) = sp / (s(i) * s(i));
      score_weight(i) = (1.0 - s(i)) * v.omega(i);
    } else {
      grad_weight(i) = sp / ((1.0 - s(i)) * (1.0 - s(i)));
      score_weight(i) = -s(i) * v.omega(i);
    }
  }
  // G is q x K
  const Eigen::MatrixXd g = w.transpose() * grad_weight.asDiagonal() * outcomes.values / static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> llt(fit.fisher_info);
  if (llt.info() != Eigen::Success) fail(ErrorCode::SingularInformation, "Fisher information is not invertible");
  const Eigen::MatrixXd info_inv_g = llt.solve(g);
  const Eigen::MatrixXd scores = score_weight.asDiagonal() * w;  // n x q
  h.noalias() -= scores * info_inv_g;
  return h;
}

struct VarianceResult {
  Eigen::VectorXd variance;
  std::vector<bool> active;
};

inline VarianceResult variance_estimates(const Eigen::MatrixXd& influence, double floor = kDefaultVarianceFloor) {
  require(influence.rows() >= 2, ErrorCode::InsufficientSamples, "variance needs at least two subjects");
  VarianceResult out;
  out.variance = influence.array().square().colwise().mean().transpose();
  out.active.resize(static_cast<std::size_t>(influence.cols()));
  for (Eigen::Index k = 0; k < influence.cols(); ++k) out.active[static_cast<std::size_t>(k)] = out.variance(k) > floor;
  return out;
}

struct EffectEstimates {
  std::vector<UnitPair> pairs;
  Eigen::VectorXd tau_star;
  Eigen::MatrixXd influence;
  Eigen::VectorXd variance;
  std::vector<bool> active;
  double variance_floor = kDefaultVarianceFloor;

  std::vector<Eigen::Index> active_indices() const {
    std::vector<Eigen::Index> idx;
    for (std::size_t k = 0; k < active.size(); ++k)
      if (active[k]) idx.push_back(static_cast<Eigen::Index>(k));
    return idx;
  }
};

inline EffectEstimates estimate_effects(const OutcomePanel& outcomes, const CovariateTable& table,
                                        const PropensityFit& fit, double floor = kDefaultVarianceFloor,
                                        VarianceMode mode = VarianceMode::Corrected) {
  EffectEstimates out;
  out.pairs = outcomes.pairs;
  out.tau_star = ipw_estimate(outcomes, table, fit);
  out.influence = influence_functions(outcomes, table, fit, out.tau_star, mode);
  VarianceResult v = variance_estimates(out.influence, floor);
  out.variance = std::move(v.variance);
  out.active = std::move(v.active);
  out.variance_floor = floor;
  return out;
}

}  // namespace causalconn
