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

// Treatment assignment model Pr(Z = 1 | W) = sigma(W'beta), fitted by
// maximum likelihood.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalconn/error.hpp"
#include "causalconn/stats.hpp"

namespace causalconn {

inline constexpr double kPropensityClamp = 1e-12;

enum class LinkKind { Logistic, Probit };

inline std::string to_string(LinkKind kind) { return kind == LinkKind::Logistic ? "logistic" : "probit"; }

inline LinkKind parse_link(const std::string& name) {
  if (name == "logistic") return LinkKind::Logistic;
  if (name == "probit") return LinkKind::Probit;
  fail(ErrorCode::ConfigInvalid, "unknown link '" + name + "'");
}

/// Subjects in rows. `treatment` holds 0/1.
struct CovariateTable {
  Eigen::MatrixXd values;
  Eigen::VectorXi treatment;
  std::vector<std::string> subject_ids;
  std::vector<std::string> covariate_names;

  Eigen::Index subjects() const { return values.rows(); }
  Eigen::Index covariates() const { return values.cols(); }
  Eigen::Index treated() const { return treatment.sum(); }

  void validate() const {
    require(treatment.size() == values.rows(), ErrorCode::ShapeMismatch, "treatment length differs from covariate rows");
    require(subject_ids.empty() || static_cast<Eigen::Index>(subject_ids.size()) == values.rows(),
            ErrorCode::ShapeMismatch, "subject id count differs from covariate rows");
    require(covariate_names.empty() || static_cast<Eigen::Index>(covariate_names.size()) == values.cols(),
            ErrorCode::ShapeMismatch, "covariate name count differs from covariate columns");
    require(values.allFinite(), ErrorCode::NonFiniteValue, "covariate table has non-finite entries");
    for (Eigen::Index i = 0; i < treatment.size(); ++i)
      require(treatment(i) == 0 || treatment(i) == 1, ErrorCode::ShapeMismatch, "treatment must be 0 or 1");
    const Eigen::Index n1 = treated();
    require(n1 > 0 && n1 < values.rows(), ErrorCode::ShapeMismatch, "both treatment arms must be nonempty");
  }

  /// Same subjects, keeping only the listed covariate columns.
  CovariateTable select(const std::vector<Eigen::Index>& columns) const {
    CovariateTable out;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      require(columns[c] >= 0 && columns[c] < values.cols(), ErrorCode::DimensionMismatch, "covariate column out of range");
      out.values.col(static_cast<Eigen::Index>(c)) = values.col(columns[c]);
      if (!covariate_names.empty()) out.covariate_names.push_back(covariate_names[static_cast<std::size_t>(columns[c])]);
    }
    out.treatment = treatment;
    out.subject_ids = subject_ids;
    return out;
  }
};

struct LinkValues {
  Eigen::VectorXd sigma;
  Eigen::VectorXd sigma_prime;
  Eigen::VectorXd omega;
};

inline double link_sigma(LinkKind kind, double eta) {
  const double s = kind == LinkKind::Logistic ? 1.0 / (1.0 + std::exp(-eta)) : normal_cdf(eta);
  return std::clamp(s, kPropensityClamp, 1.0 - kPropensityClamp);
}

/// sigma, sigma' and omega = sigma' / (sigma (1 - sigma)), elementwise.
inline LinkValues link_values(LinkKind kind, const Eigen::VectorXd& eta) {
  LinkValues v;
  const Eigen::Index n = eta.size();
  v.sigma.resize(n);
  v.sigma_prime.resize(n);
  v.omega.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = link_sigma(kind, eta(i));
    v.sigma(i) = s;
    if (kind == LinkKind::Logistic) {
      v.sigma_prime(i) = s * (1.0 - s);
      v.omega(i) = 1.0;
    } else {
      v.sigma_prime(i) = normal_pdf(eta(i));
      v.omega(i) = v.sigma_prime(i) / (s * (1.0 - s));
    }
  }
  return v;
}

struct PropensityConfig {
  double tolerance = 1e-8;  // score max-norm bound is tolerance * n
  int max_iterations = 100;
  double separation_guard = 30.0;
  double trim = 0.0;  // 0 disables trimming
};

struct PropensityFit {
  LinkKind link = LinkKind::Logistic;
  Eigen::VectorXd beta;
  Eigen::VectorXd eta;
  Eigen::VectorXd fitted;
  Eigen::MatrixXd fisher_info;
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_path;  // one entry per accepted iterate, starting at beta = 0
  bool converged = false;
  int iterations = 0;

  /// Asymptotic standard errors sqrt(diag(I^-1) / n).
  Eigen::VectorXd standard_errors() const {
    const double n = static_cast<double>(fitted.size());
    const Eigen::MatrixXd inv = fisher_info.llt().solve(Eigen::MatrixXd::Identity(beta.size(), beta.size()));
    return (inv.diagonal().array() / n).sqrt().matrix();
  }
};

inline double propensity_log_likelihood(LinkKind kind, const Eigen::VectorXd& eta, const Eigen::VectorXi& z) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double s = link_sigma(kind, eta(i));
    ll += z(i) == 1 ? std::log(s) : std::log1p(-s);
  }
  return ll;
}

/// Score sum_i (Z_i - sigma_i) omega_i W_i.
inline Eigen::VectorXd propensity_score(const Eigen::MatrixXd& w, const Eigen::VectorXi& z, const LinkValues& v) {
  const Eigen::VectorXd r = (z.cast<double>() - v.sigma).cwiseProduct(v.omega);
  return w.transpose() * r;
}

/// (1/n) sum_i sigma'^2 / (sigma (1 - sigma)) W_i W_i'.
inline Eigen::MatrixXd fisher_information(const Eigen::MatrixXd& w, const LinkValues& v) {
  const Eigen::Index n = w.rows();
  Eigen::VectorXd weight(n);
  for (Eigen::Index i = 0; i < n; ++i)
    weight(i) = v.sigma_prime(i) * v.sigma_prime(i) / (v.sigma(i) * (1.0 - v.sigma(i)));
  Eigen::MatrixXd info = w.transpose() * weight.asDiagonal() * w / static_cast<double>(n);
  return 0.5 * (info + info.transpose());
}

/// Fisher scoring (Newton for the logistic link) from beta = 0 with step
/// halving.
inline PropensityFit fit_propensity(const CovariateTable& table, LinkKind link, const PropensityConfig& config = {}) {
  table.validate();
  const Eigen::MatrixXd& w = table.values;
  const Eigen::Index n = w.rows();
  const Eigen::Index q = w.cols();
  require(q >= 1, ErrorCode::RankDeficientDesign, "no covariates");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(w);
    qr.setThreshold(1e-10);
    require(qr.rank() == q, ErrorCode::RankDeficientDesign,
            "covariate design has rank " + std::to_string(qr.rank()) + " < " + std::to_string(q));
  }

  PropensityFit fit;
  fit.link = link;
  fit.beta = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double ll = propensity_log_likelihood(link, eta, table.treatment);
  fit.log_likelihood_path.push_back(ll);
  const double tol = config.tolerance * static_cast<double>(n);

  for (int iter = 0;; ++iter) {
    const LinkValues v = link_values(link, eta);
    const Eigen::VectorXd score = propensity_score(w, table.treatment, v);
    fit.iterations = iter;
    if (score.lpNorm<Eigen::Infinity>() <= tol) {
      fit.converged = true;
      break;
    }
    if (iter >= config.max_iterations)
      fail(ErrorCode::NoConvergence, "propensity fit did not converge in " + std::to_string(config.max_iterations) +
                                         " iterations");
    const Eigen::MatrixXd info = fisher_information(w, v) * static_cast<double>(n);
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) fail(ErrorCode::Separation, "information matrix collapsed during fitting");
    const Eigen::VectorXd step = llt.solve(score);

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      const Eigen::VectorXd beta_try = fit.beta + t * step;
      const Eigen::VectorXd eta_try = w * beta_try;
      const double ll_try = propensity_log_likelihood(link, eta_try, table.treatment);
      if (std::isfinite(ll_try) && ll_try >= ll - 1e-12 * std::abs(ll)) {
        fit.beta = beta_try;
        eta = eta_try;
        ll = ll_try;
        fit.log_likelihood_path.push_back(ll);
        accepted = true;
        break;
      }
    }
    if (!accepted) fail(ErrorCode::NoConvergence, "line search failed to increase the likelihood");
    if (eta.lpNorm<Eigen::Infinity>() > config.separation_guard)
      fail(ErrorCode::Separation, "linear predictor exceeded the separation guard; the likelihood is unbounded");
  }

  // The score can fall under tolerance while the fit runs off to infinity.
  bool all_certain = true;
  for (Eigen::Index i = 0; i < n && all_certain; ++i) {
    const double s = link_sigma(link, eta(i));
    all_certain = (table.treatment(i) == 1 ? s : 1.0 - s) > 1.0 - 1e-8;
  }
  if (all_certain) fail(ErrorCode::Separation, "treatment is perfectly predicted by the covariates");

  fit.eta = eta;
  fit.log_likelihood = ll;
  const LinkValues v = link_values(link, eta);
  fit.fisher_info = fisher_information(w, v);
  Eigen::LLT<Eigen::MatrixXd> check(fit.fisher_info);
  require(check.info() == Eigen::Success, ErrorCode::SingularInformation, "Fisher information is not positive definite");
  fit.fitted = v.sigma;
  if (config.trim > 0.0) fit.fitted = fit.fitted.cwiseMax(config.trim).cwiseMin(1.0 - config.trim);
  return fit;
}

inline double evaluate_propensity(const PropensityFit& fit, const Eigen::VectorXd& w) {
  require(w.size() == fit.beta.size(), ErrorCode::DimensionMismatch, "covariate vector length differs from beta");
  return link_sigma(fit.link, w.dot(fit.beta));
}

/// A fit whose propensities are given rather than estimated.
inline PropensityFit known_propensity(const Eigen::VectorXd& propensity, LinkKind link = LinkKind::Logistic) {
  PropensityFit fit;
  fit.link = link;
  fit.fitted = propensity.cwiseMax(kPropensityClamp).cwiseMin(1.0 - kPropensityClamp);
  fit.converged = true;
  return fit;
}

}  // namespace causalconn
