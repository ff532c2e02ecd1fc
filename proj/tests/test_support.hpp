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

// Test-only oracles. Nothing here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causalconn/var_core.hpp"

namespace causalconn::testing {

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Wilcoxon rank-sum z score, positive when `a` tends to be smaller than `b`.
inline double rank_sum_z(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::pair<double, int>> all;
  for (double x : a) all.emplace_back(x, 0);
  for (double x : b) all.emplace_back(x, 1);
  std::sort(all.begin(), all.end());
  double rank_a = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].second == 0) rank_a += static_cast<double>(i + 1);
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double mean = n1 * (n1 + n2 + 1) / 2.0;
  const double sd = std::sqrt(n1 * n2 * (n1 + n2 + 1) / 12.0);
  return (mean - rank_a) / sd;
}

/// Least squares by the textbook normal equations (X'X) b = X'y.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd xtx = x.transpose() * x;
  return xtx.llt().solve(x.transpose() * y);
}

/// Explicit lagged design for one equation, built directly from the panel.
inline void lagged_regression(const TimeSeriesPanel& panel, TimeRange window, Eigen::Index target,
                              const std::vector<Eigen::Index>& regressors, int order, Eigen::MatrixXd& x,
                              Eigen::VectorXd& y) {
  const Eigen::Index n = window.length() - order;
  x.resize(n, 1 + static_cast<Eigen::Index>(regressors.size()) * order);
  y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index t = window.begin + order + i;
    y(i) = panel(target, t);
    Eigen::Index c = 0;
    x(i, c++) = 1.0;
    for (int lag = 1; lag <= order; ++lag)
      for (Eigen::Index u : regressors) x(i, c++) = panel(u, t - lag);
  }
}

/// Bivariate VAR(1) with unit-variance independent noise.
inline VarProcess bivariate_var1(double a00, double a01, double a10, double a11) {
  VarProcess proc;
  Eigen::MatrixXd a(2, 2);
  a << a00, a01, a10, a11;
  proc.transition = {a};
  proc.intercept = Eigen::VectorXd::Zero(2);
  proc.noise_cov = Eigen::MatrixXd::Identity(2, 2);
  return proc;
}

inline VarProcess white_noise_process(Eigen::Index p) {
  VarProcess proc;
  proc.transition = {Eigen::MatrixXd::Zero(p, p)};
  proc.intercept = Eigen::VectorXd::Zero(p);
  proc.noise_cov = Eigen::MatrixXd::Identity(p, p);
  return proc;
}

}  // namespace causalconn::testing
