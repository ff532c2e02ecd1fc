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

// Simultaneous inference over active components: Gaussian multiplier
// bootstrap of the max statistic, simultaneous intervals, and step-down
// testing with augmentation for FDP exceedance control.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "causalconn/error.hpp"
#include "causalconn/rng.hpp"
#include "causalconn/stats.hpp"

namespace causalconn {

struct BootstrapConfig {
  int replications = 2000;
  double alpha = 0.05;
  double fdp_threshold = 0.1;
  std::uint64_t seed = 0;
  bool reuse_multipliers = false;

  void validate() const {
    require(replications >= 100, ErrorCode::ConfigInvalid, "bootstrap replications must be at least 100");
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::ConfigInvalid, "alpha must lie in (0, 1)");
    require(fdp_threshold > 0.0 && fdp_threshold < 1.0, ErrorCode::ConfigInvalid, "FDP threshold must lie in (0, 1)");
    require(std::ceil(replications * alpha - 1e-9) >= 1.0, ErrorCode::ConfigInvalid, "B * alpha must be at least 1");
  }
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Multipliers xi_{i,b}, subjects in rows and one column per replication.
inline Eigen::MatrixXd draw_multipliers(Eigen::Index n, int replications, std::uint64_t seed) {
  Rng rng(seed);
  return rng.normal_matrix(n, replications);
}

/// Sorted bootstrap maxima M_b over the components in `subset`.
inline std::vector<double> bootstrap_maxima(const Eigen::MatrixXd& influence, const Eigen::VectorXd& variance,
                                            const std::vector<Eigen::Index>& subset, const Eigen::MatrixXd& xi) {
  const Eigen::Index n = influence.rows();
  const auto m = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd scaled(n, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const Eigen::Index k = subset[static_cast<std::size_t>(c)];
    scaled.col(c) = influence.col(k) / std::sqrt(static_cast<double>(n) * variance(k));
  }
  const Eigen::MatrixXd sums = scaled.transpose() * xi;  // m x B
  std::vector<double> maxima(static_cast<std::size_t>(xi.cols()));
  for (Eigen::Index b = 0; b < xi.cols(); ++b) maxima[static_cast<std::size_t>(b)] = sums.col(b).cwiseAbs().maxCoeff();
  std::sort(maxima.begin(), maxima.end());
  return maxima;
}

inline double multiplier_bootstrap_quantile(const Eigen::MatrixXd& influence, const Eigen::VectorXd& variance,
                                            const std::vector<Eigen::Index>& subset, const BootstrapConfig& config,
                                            const Eigen::MatrixXd* multipliers = nullptr) {
  config.validate();
  require(!subset.empty(), ErrorCode::EmptyActiveSet, "bootstrap needs at least one active component");
  require(variance.size() == influence.cols(), ErrorCode::DimensionMismatch, "variance length differs from influence");
  if (multipliers != nullptr)
    return upper_order_statistic(bootstrap_maxima(influence, variance, subset, *multipliers), 1.0 - config.alpha);
  const Eigen::MatrixXd xi = draw_multipliers(influence.rows(), config.replications, config.seed);
  return upper_order_statistic(bootstrap_maxima(influence, variance, subset, xi), 1.0 - config.alpha);
}

inline std::vector<Interval> simultaneous_cis(const Eigen::VectorXd& tau_star, const Eigen::VectorXd& variance,
                                              const std::vector<Eigen::Index>& active, double q, Eigen::Index n) {
  require(q >= 0.0, ErrorCode::ConfigInvalid, "quantile must be nonnegative");
  std::vector<Interval> out;
  out.reserve(active.size());
  for (Eigen::Index k : active) {
    const double half = q * std::sqrt(variance(k) / static_cast<double>(n));
    out.push_back({tau_star(k) - half, tau_star(k) + half});
  }
  return out;
}

/// sqrt(n) |tau_k| / sqrt(V_k) for every component (zero where V_k is zero).
inline Eigen::VectorXd standardized_statistics(const Eigen::VectorXd& tau_star, const Eigen::VectorXd& variance,
                                               Eigen::Index n) {
  Eigen::VectorXd t(tau_star.size());
  for (Eigen::Index k = 0; k < t.size(); ++k)
    t(k) = variance(k) > 0.0 ? std::sqrt(static_cast<double>(n)) * std::abs(tau_star(k)) / std::sqrt(variance(k)) : 0.0;
  return t;
}

inline int augmentation_count(std::size_t rejected, double fdp_threshold) {
  return static_cast<int>(std::floor(fdp_threshold * static_cast<double>(rejected) / (1.0 - fdp_threshold) + 1e-9));
}

struct SimultaneousResult {
  double quantile = 0.0;  // first-step quantile over the whole active set
  std::vector<Eigen::Index> active;
  std::vector<Interval> intervals;  // aligned with `active`
  std::vector<Eigen::Index> rejections;
  std::vector<int> stages;  // step number, or 0 for augmentation
  int stepdown_rejections = 0;
  std::vector<double> step_quantiles;
};

inline std::uint64_t step_seed(std::uint64_t seed, int step) {
  return step == 1 ? seed : derive_seed(seed, "stepdown", {static_cast<std::uint64_t>(step)});
}

inline SimultaneousResult stepdown_augment(const Eigen::VectorXd& tau_star, const Eigen::MatrixXd& influence,
                                           const Eigen::VectorXd& variance, const std::vector<Eigen::Index>& active,
                                           const BootstrapConfig& config) {
  config.validate();
  require(!active.empty(), ErrorCode::EmptyActiveSet, "no active components to test");
  const Eigen::Index n = influence.rows();
  const Eigen::VectorXd t = standardized_statistics(tau_star, variance, n);

  SimultaneousResult out;
  out.active = active;
  std::sort(out.active.begin(), out.active.end());

  Eigen::MatrixXd shared;
  if (config.reuse_multipliers) shared = draw_multipliers(n, config.replications, config.seed);

  std::vector<Eigen::Index> remaining = out.active;
  // argmax over remaining, ties to the smaller index
  const auto best = [&](const std::vector<Eigen::Index>& set) {
    std::size_t pos = 0;
    for (std::size_t i = 1; i < set.size(); ++i)
      if (t(set[i]) > t(set[pos])) pos = i;
    return pos;
  };

  double previous = 0.0;
  for (int step = 1; !remaining.empty(); ++step) {
    double q;
    if (config.reuse_multipliers) {
      q = upper_order_statistic(bootstrap_maxima(influence, variance, remaining, shared), 1.0 - config.alpha);
    } else {
      const Eigen::MatrixXd xi = draw_multipliers(n, config.replications, step_seed(config.seed, step));
      q = upper_order_statistic(bootstrap_maxima(influence, variance, remaining, xi), 1.0 - config.alpha);
    }
    if (step == 1) {
      out.quantile = q;
    } else {
      // keeps each step at least as permissive as the previous one
      q = std::min(q, previous);
    }
    previous = q;
    out.step_quantiles.push_back(q);
    const std::size_t pos = best(remaining);
    if (!(t(remaining[pos]) > q)) break;
    out.rejections.push_back(remaining[pos]);
    out.stages.push_back(step);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  out.stepdown_rejections = static_cast<int>(out.rejections.size());

  int extra = augmentation_count(out.rejections.size(), config.fdp_threshold);
  while (extra-- > 0 && !remaining.empty()) {
    const std::size_t pos = best(remaining);
    out.rejections.push_back(remaining[pos]);
    out.stages.push_back(0);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  out.intervals = simultaneous_cis(tau_star, variance, out.active, out.quantile, n);
  return out;
}

}  // namespace causalconn
