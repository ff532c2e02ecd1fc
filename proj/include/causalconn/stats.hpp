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

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

namespace causalconn {

/// Pr(F > value) for F ~ F(df1, df2).
inline double f_upper_tail(double value, double df1, double df2) {
  if (value <= 0.0) return 1.0;
  boost::math::fisher_f_distribution<double> dist(df1, df2);
  return boost::math::cdf(boost::math::complement(dist, value));
}

inline double f_cdf(double value, double df1, double df2) {
  if (value <= 0.0) return 0.0;
  boost::math::fisher_f_distribution<double> dist(df1, df2);
  return boost::math::cdf(dist, value);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_pdf(double x) {
  constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double normal_quantile(double prob) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

/// Empirical quantile as the order statistic at ceil(count * level), 1-based.
/// `sorted` must be ascending.
inline double upper_order_statistic(const std::vector<double>& sorted, double level) {
  const double raw = static_cast<double>(sorted.size()) * level;
  // guard against 2000 * 0.95 landing just above an integer
  auto index = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  index = std::clamp<std::size_t>(index, 1, sorted.size());
  return sorted[index - 1];
}

}  // namespace causalconn
