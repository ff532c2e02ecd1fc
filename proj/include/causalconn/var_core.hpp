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

// Vector autoregression substrate: panels, single-equation OLS, simulation
// and the companion-matrix stationarity check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalconn/error.hpp"
#include "causalconn/rng.hpp"

namespace causalconn {

/// Relative rank tolerance for every least-squares solve in the library.
inline constexpr double kRankTolerance = 1e-10;

/// Half-open range of time indices [begin, end).
struct TimeRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;

  Eigen::Index length() const { return end - begin; }
  bool operator==(const TimeRange&) const = default;
};

/// One subject's multivariate series: rows are units, columns are time points.
class TimeSeriesPanel {
 public:
  TimeSeriesPanel() = default;

  explicit TimeSeriesPanel(Eigen::MatrixXd values, std::vector<std::string> unit_labels = {})
      : values_(std::move(values)), labels_(std::move(unit_labels)) {
    require(values_.rows() >= 1 && values_.cols() >= 2, ErrorCode::ShapeMismatch,
            "panel needs at least one unit and two time points");
    if (labels_.empty()) {
      labels_.reserve(static_cast<std::size_t>(values_.rows()));
      for (Eigen::Index u = 0; u < values_.rows(); ++u) labels_.push_back("u" + std::to_string(u));
    }
    require(static_cast<Eigen::Index>(labels_.size()) == values_.rows(), ErrorCode::ShapeMismatch,
            "unit label count does not match panel rows");
    for (Eigen::Index t = 0; t < values_.cols(); ++t)
      for (Eigen::Index u = 0; u < values_.rows(); ++u)
        if (!std::isfinite(values_(u, t)))
          fail(ErrorCode::NonFiniteValue,
               "panel entry (unit " + std::to_string(u) + ", t " + std::to_string(t) + ")");
  }

  Eigen::Index units() const { return values_.rows(); }
  Eigen::Index length() const { return values_.cols(); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<std::string>& unit_labels() const { return labels_; }
  double operator()(Eigen::Index unit, Eigen::Index t) const { return values_(unit, t); }

  bool operator==(const TimeSeriesPanel& other) const {
    return labels_ == other.labels_ && values_.rows() == other.values_.rows() &&
           values_.cols() == other.values_.cols() && values_ == other.values_;
  }

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> labels_;
};

/// One target equation of a VAR(r).
struct VarSpec {
  Eigen::Index target = 0;
  std::vector<Eigen::Index> lagged_regressors;
  int order = 1;
  bool include_intercept = true;
  /// Time-invariant covariates; each becomes a constant column.
  Eigen::VectorXd exogenous;
};

struct VarFit {
  /// Intercept first (when present), then one block per lag holding every
  /// lagged regressor in lagged_regressors order, then exogenous columns.
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  int df_model = 0;
  int df_resid = 0;
};

struct VarProcess {
  std::vector<Eigen::MatrixXd> transition;
  Eigen::VectorXd intercept;
  Eigen::MatrixXd noise_cov;

  Eigen::Index units() const { return noise_cov.rows(); }
  int order() const { return static_cast<int>(transition.size()); }
};

enum class RankPolicy {
  Throw,       ///< collinear columns raise RankDeficient
  DropColumns  ///< collinear columns get coefficient 0
};

struct LeastSquaresSolution {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  Eigen::Index rank = 0;
};

/// Least squares through column-pivoted Householder QR. Columns whose pivot
/// falls below kRankTolerance times the largest pivot are treated as dependent.
inline LeastSquaresSolution solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                RankPolicy policy) {
  require(x.rows() == y.size(), ErrorCode::DimensionMismatch, "design rows and response length differ");
  LeastSquaresSolution out;
  if (x.cols() == 0) {
    out.coefficients = Eigen::VectorXd(0);
    out.residuals = y;
    out.rss = y.squaredNorm();
    return out;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.rows(), x.cols());
  qr.setThreshold(kRankTolerance);
  qr.compute(x);
  out.rank = qr.rank();
  if (out.rank < x.cols() && policy == RankPolicy::Throw)
    fail(ErrorCode::RankDeficient, "design has rank " + std::to_string(out.rank) + " < " +
                                       std::to_string(x.cols()) + " columns");
  if (out.rank == 0) {
    out.coefficients = Eigen::VectorXd::Zero(x.cols());
  } else {
    out.coefficients = qr.solve(y);
  }
  out.residuals = y - x * out.coefficients;
  out.rss = out.residuals.squaredNorm();
  return out;
}

/// OLS fit of one target equation on the given window. Lags never
/// reach before window.begin, so the effective sample is length - order.
inline VarFit fit_var_ols(const TimeSeriesPanel& panel, TimeRange window, const VarSpec& spec) {
  const Eigen::Index p = panel.units();
  require(spec.order >= 1, ErrorCode::ConfigInvalid, "VAR order must be at least 1");
  require(window.begin >= 0 && window.end <= panel.length() && window.begin < window.end,
          ErrorCode::DimensionMismatch, "window outside the panel");
  require(spec.target >= 0 && spec.target < p, ErrorCode::DimensionMismatch, "target unit out of range");
  for (std::size_t a = 0; a < spec.lagged_regressors.size(); ++a) {
    const Eigen::Index u = spec.lagged_regressors[a];
    require(u >= 0 && u < p, ErrorCode::DimensionMismatch, "regressor unit out of range");
    for (std::size_t b = a + 1; b < spec.lagged_regressors.size(); ++b)
      require(spec.lagged_regressors[b] != u, ErrorCode::ConfigInvalid, "duplicate regressor unit");
  }

  const Eigen::Index r = spec.order;
  const Eigen::Index n_eff = window.length() - r;
  const Eigen::Index n_reg = static_cast<Eigen::Index>(spec.lagged_regressors.size());
  const Eigen::Index k = (spec.include_intercept ? 1 : 0) + n_reg * r + spec.exogenous.size();
  if (n_eff <= k)
    fail(ErrorCode::InsufficientSamples, "effective sample " + std::to_string(n_eff) +
                                             " does not exceed " + std::to_string(k) + " coefficients");

  Eigen::MatrixXd x(n_eff, k);
  Eigen::VectorXd y(n_eff);
  for (Eigen::Index row = 0; row < n_eff; ++row) {
    const Eigen::Index t = window.begin + r + row;
    y(row) = panel(spec.target, t);
    Eigen::Index col = 0;
    if (spec.include_intercept) x(row, col++) = 1.0;
    for (Eigen::Index lag = 1; lag <= r; ++lag)
      for (Eigen::Index u : spec.lagged_regressors) x(row, col++) = panel(u, t - lag);
    for (Eigen::Index e = 0; e < spec.exogenous.size(); ++e) x(row, col++) = spec.exogenous(e);
  }

  LeastSquaresSolution ls = solve_least_squares(x, y, RankPolicy::Throw);
  VarFit fit;
  fit.coefficients = std::move(ls.coefficients);
  fit.residuals = std::move(ls.residuals);
  fit.rss = ls.rss;
  fit.df_model = static_cast<int>(k);
  fit.df_resid = static_cast<int>(n_eff - k);
  return fit;
}

/// (r*p) x (r*p) companion matrix of a VAR(r) transition list.
inline Eigen::MatrixXd companion_matrix(std::span<const Eigen::MatrixXd> transition) {
  require(!transition.empty(), ErrorCode::DimensionMismatch, "empty transition list");
  const Eigen::Index p = transition.front().rows();
  const Eigen::Index r = static_cast<Eigen::Index>(transition.size());
  for (const auto& a : transition)
    require(a.rows() == p && a.cols() == p, ErrorCode::DimensionMismatch,
            "transition matrices must be square with a common dimension");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(r * p, r * p);
  for (Eigen::Index k = 0; k < r; ++k) c.block(0, k * p, p, p) = transition[static_cast<std::size_t>(k)];
  if (r > 1) c.block(p, 0, (r - 1) * p, (r - 1) * p).setIdentity();
  return c;
}

/// Largest eigenvalue modulus of the companion matrix.
inline double spectral_radius(std::span<const Eigen::MatrixXd> transition) {
  const Eigen::MatrixXd c = companion_matrix(transition);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(c, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) fail(ErrorCode::Internal, "eigenvalue iteration failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_radius(const Eigen::MatrixXd& transition) {
  return spectral_radius(std::span<const Eigen::MatrixXd>(&transition, 1));
}

/// Checks shapes, symmetry and positive definiteness of the noise covariance,
/// and weak stationarity.
inline void validate_process(const VarProcess& process) {
  const Eigen::Index p = process.noise_cov.rows();
  require(p >= 1 && process.noise_cov.cols() == p, ErrorCode::DimensionMismatch, "noise covariance not square");
  require(process.intercept.size() == p, ErrorCode::DimensionMismatch, "intercept length differs from units");
  require(!process.transition.empty(), ErrorCode::DimensionMismatch, "process has no transition matrices");
  for (const auto& a : process.transition)
    require(a.rows() == p && a.cols() == p, ErrorCode::DimensionMismatch, "transition matrix shape");
  require((process.noise_cov - process.noise_cov.transpose()).cwiseAbs().maxCoeff() <= 1e-10,
          ErrorCode::ConfigInvalid, "noise covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(process.noise_cov, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() > 0.0, ErrorCode::ConfigInvalid,
          "noise covariance is not positive definite");
  const double rho = spectral_radius(process.transition);
  if (!(rho < 1.0))
    fail(ErrorCode::NonStationaryProcess, "companion spectral radius " + std::to_string(rho) + " >= 1");
}

/// Stationary mean (I - sum A_k)^{-1} c.
inline Eigen::VectorXd stationary_mean(const VarProcess& process) {
  const Eigen::Index p = process.units();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p);
  for (const auto& a : process.transition) m -= a;
  return m.partialPivLu().solve(process.intercept);
}

inline constexpr int kDefaultBurnIn = 500;

/// Iterates the VAR recursion from its stationary mean, discards burn_in steps
/// and returns the next length time points. Noise is L z with L the Cholesky
/// factor of the noise covariance and z drawn unit by unit, step by step.
inline TimeSeriesPanel simulate_var(const VarProcess& process, Eigen::Index length, int burn_in,
                                    std::uint64_t seed, std::vector<std::string> unit_labels = {}) {
  require(length >= 1, ErrorCode::ConfigInvalid, "simulation length must be positive");
  require(burn_in >= 0, ErrorCode::ConfigInvalid, "burn-in must be nonnegative");
  validate_process(process);

  const Eigen::Index p = process.units();
  const Eigen::Index r = process.order();
  const bool identity_noise = process.noise_cov.isIdentity(0.0);
  const Eigen::MatrixXd chol = identity_noise ? Eigen::MatrixXd() : Eigen::MatrixXd(process.noise_cov.llt().matrixL());

  // history(:, k) holds x_{t-1-k}
  const Eigen::VectorXd mu = stationary_mean(process);
  Eigen::MatrixXd history = mu.replicate(1, r);
  Eigen::MatrixXd out(p, length);
  Eigen::VectorXd z(p), next(p);
  Rng rng(seed);

  const Eigen::Index total = burn_in + length;
  for (Eigen::Index step = 0; step < total; ++step) {
    for (Eigen::Index u = 0; u < p; ++u) z(u) = rng.normal();
    next = process.intercept;
    for (Eigen::Index k = 0; k < r; ++k) next.noalias() += process.transition[static_cast<std::size_t>(k)] * history.col(k);
    if (identity_noise) {
      next += z;
    } else {
      next.noalias() += chol * z;
    }
    for (Eigen::Index k = r - 1; k > 0; --k) history.col(k) = history.col(k - 1);
    history.col(0) = next;
    if (step >= burn_in) out.col(step - burn_in) = next;
  }
  if (unit_labels.empty()) return TimeSeriesPanel(std::move(out));
  return TimeSeriesPanel(std::move(out), std::move(unit_labels));
}

/// Result of regressing one column of a LaggedDesign on a subset of its columns.
struct SubsetFit {
  double rss = 0.0;
  Eigen::Index rank = 0;
  Eigen::Index columns = 0;
  /// Squared norm of the response; scale reference for degeneracy checks.
  double response_ss = 0.0;

  Eigen::Index dropped() const { return columns - rank; }
};

/// Lagged regression design shared by many single-equation fits on one window.
///
/// The full design M = [1 | lag-1 block | ... | lag-r block | current values]
/// over the units in `units` is reduced once by Householder QR to its
/// triangular factor R. Because M = QR with Q orthogonal, the residual of any
/// column of M regressed on any subset of its other columns has the same norm
/// computed from the corresponding columns of R, so each subsequent fit costs
/// a small QR on R instead of a pass over the time axis.
class LaggedDesign {
 public:
  LaggedDesign(const TimeSeriesPanel& panel, TimeRange window, int order,
               std::vector<Eigen::Index> units = {})
      : order_(order), units_(std::move(units)) {
    require(order >= 1, ErrorCode::ConfigInvalid, "VAR order must be at least 1");
    require(window.begin >= 0 && window.end <= panel.length() && window.begin < window.end,
            ErrorCode::DimensionMismatch, "window outside the panel");
    if (units_.empty()) {
      units_.resize(static_cast<std::size_t>(panel.units()));
      for (Eigen::Index u = 0; u < panel.units(); ++u) units_[static_cast<std::size_t>(u)] = u;
    }
    position_.assign(static_cast<std::size_t>(panel.units()), -1);
    for (std::size_t i = 0; i < units_.size(); ++i) {
      const Eigen::Index u = units_[i];
      require(u >= 0 && u < panel.units(), ErrorCode::DimensionMismatch, "design unit out of range");
      require(position_[static_cast<std::size_t>(u)] < 0, ErrorCode::ConfigInvalid, "duplicate design unit");
      position_[static_cast<std::size_t>(u)] = static_cast<Eigen::Index>(i);
    }

    n_eff_ = window.length() - order;
    if (n_eff_ < 1) fail(ErrorCode::InsufficientSamples, "window shorter than the lag order");
    const Eigen::Index m = static_cast<Eigen::Index>(units_.size());
    const Eigen::Index cols = 1 + m * order + m;
    Eigen::MatrixXd design(n_eff_, cols);
    design.col(0).setOnes();
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index u = units_[static_cast<std::size_t>(i)];
      const auto series = panel.values().row(u);
      for (Eigen::Index lag = 1; lag <= order; ++lag)
        design.col(1 + (lag - 1) * m + i) = series.segment(window.begin + order - lag, n_eff_).transpose();
      design.col(1 + order * m + i) = series.segment(window.begin + order, n_eff_).transpose();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
    const Eigen::Index rows = std::min(n_eff_, cols);
    r_ = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  }

  int order() const { return order_; }
  Eigen::Index effective_samples() const { return n_eff_; }
  const std::vector<Eigen::Index>& units() const { return units_; }
  bool contains(Eigen::Index unit) const {
    return unit >= 0 && unit < static_cast<Eigen::Index>(position_.size()) &&
           position_[static_cast<std::size_t>(unit)] >= 0;
  }

  static constexpr Eigen::Index intercept_column() { return 0; }
  Eigen::Index lag_column(Eigen::Index unit, int lag) const {
    return 1 + (lag - 1) * static_cast<Eigen::Index>(units_.size()) + position_of(unit);
  }
  Eigen::Index current_column(Eigen::Index unit) const {
    return 1 + order_ * static_cast<Eigen::Index>(units_.size()) + position_of(unit);
  }

  /// Column indices for an intercept plus lags 1..order of each listed unit.
  std::vector<Eigen::Index> lag_columns(std::span<const Eigen::Index> lagged_units, bool intercept = true) const {
    std::vector<Eigen::Index> cols;
    cols.reserve(lagged_units.size() * static_cast<std::size_t>(order_) + 1);
    if (intercept) cols.push_back(intercept_column());
    for (int lag = 1; lag <= order_; ++lag)
      for (Eigen::Index u : lagged_units) cols.push_back(lag_column(u, lag));
    return cols;
  }

  /// Regresses design column `response` on `regressors`; dependent regressors
  /// are dropped (coefficient 0) and reported through the rank.
  SubsetFit fit(Eigen::Index response, std::span<const Eigen::Index> regressors) const {
    const Eigen::VectorXd y = r_.col(response);
    SubsetFit out;
    out.columns = static_cast<Eigen::Index>(regressors.size());
    out.response_ss = y.squaredNorm();
    if (regressors.empty()) {
      out.rss = out.response_ss;
      return out;
    }
    Eigen::MatrixXd xs(r_.rows(), out.columns);
    for (Eigen::Index j = 0; j < out.columns; ++j) xs.col(j) = r_.col(regressors[static_cast<std::size_t>(j)]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs.rows(), xs.cols());
    qr.setThreshold(kRankTolerance);
    qr.compute(xs);
    out.rank = qr.rank();
    Eigen::VectorXd resid = y;
    if (out.rank > 0) resid -= xs * qr.solve(y);
    out.rss = resid.squaredNorm();
    return out;
  }

  /// Residual vectors (in the rotated coordinates of R) of several response
  /// columns on a common regressor set. Inner products between these columns
  /// equal inner products between the time-domain residuals.
  Eigen::MatrixXd residuals(std::span<const Eigen::Index> responses, std::span<const Eigen::Index> regressors) const {
    Eigen::MatrixXd ys(r_.rows(), static_cast<Eigen::Index>(responses.size()));
    for (std::size_t j = 0; j < responses.size(); ++j) ys.col(static_cast<Eigen::Index>(j)) = r_.col(responses[j]);
    if (regressors.empty()) return ys;
    Eigen::MatrixXd xs(r_.rows(), static_cast<Eigen::Index>(regressors.size()));
    for (std::size_t j = 0; j < regressors.size(); ++j) xs.col(static_cast<Eigen::Index>(j)) = r_.col(regressors[j]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs.rows(), xs.cols());
    qr.setThreshold(kRankTolerance);
    qr.compute(xs);
    if (qr.rank() == 0) return ys;
    return ys - xs * qr.solve(ys);
  }

 private:
  Eigen::Index position_of(Eigen::Index unit) const {
    require(contains(unit), ErrorCode::DimensionMismatch, "unit " + std::to_string(unit) + " not in design");
    return position_[static_cast<std::size_t>(unit)];
  }

  int order_;
  std::vector<Eigen::Index> units_;
  std::vector<Eigen::Index> position_;
  Eigen::Index n_eff_ = 0;
  Eigen::MatrixXd r_;
};

}  // namespace causalconn
