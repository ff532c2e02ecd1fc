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

// Monte Carlo study of the whole pipeline on a block-structured VAR with
// treatment-activated between-block links and covariate-modulated baseline
// connectivity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalconn/connectivity.hpp"
#include "causalconn/effects.hpp"
#include "causalconn/error.hpp"
#include "causalconn/parallel.hpp"
#include "causalconn/propensity.hpp"
#include "causalconn/rng.hpp"
#include "causalconn/simultaneous.hpp"
#include "causalconn/var_core.hpp"

namespace causalconn {

inline Eigen::VectorXd default_beta() {
  Eigen::VectorXd b(5);
  b << 0.7, -0.8, 0.5, 0.3, -0.3;
  return b;
}

struct DgpConfig {
  int n = 100;
  int p = 21;
  int T = 1000;
  Eigen::VectorXd beta_true = default_beta();
  double delta = 0.0;
  double diag_low = 0.72;
  double diag_high = 0.85;
  double offdiag_low = 0.03;
  double offdiag_high = 0.08;
  double offdiag_density = 0.3;  // share of within-block off-diagonal entries that are nonzero
  double covariate_effect_scale = 0.5;
  int activated_per_block = 3;
  double target_spectral_radius = 0.95;
  int burn_in = kDefaultBurnIn;
  std::uint64_t master_seed = 0;

  int q() const { return static_cast<int>(beta_true.size()); }

  void validate() const {
    require(n >= 4, ErrorCode::ConfigInvalid, "n must be at least 4");
    require(p >= 3 && p % 3 == 0, ErrorCode::ConfigInvalid, "p must be a positive multiple of 3");
    require(T >= 8, ErrorCode::ConfigInvalid, "T must be at least 8");
    require(beta_true.size() >= 1, ErrorCode::ConfigInvalid, "beta must be nonempty");
    require(delta >= 0.0, ErrorCode::ConfigInvalid, "delta must be nonnegative");
    require(0.0 <= diag_low && diag_low <= diag_high && diag_high < 1.0, ErrorCode::ConfigInvalid, "bad diagonal range");
    require(0.0 <= offdiag_low && offdiag_low <= offdiag_high, ErrorCode::ConfigInvalid, "bad off-diagonal range");
    require(offdiag_density >= 0.0 && offdiag_density <= 1.0, ErrorCode::ConfigInvalid, "density must lie in [0, 1]");
    require(covariate_effect_scale >= 0.0 && covariate_effect_scale < 1.0, ErrorCode::ConfigInvalid,
            "covariate effect scale must lie in [0, 1)");
    const int block = p / 3;
    require(activated_per_block >= 0 && activated_per_block <= block * block, ErrorCode::ConfigInvalid,
            "too many activated entries per block");
    require(target_spectral_radius > 0.0 && target_spectral_radius < 1.0, ErrorCode::ConfigInvalid,
            "target spectral radius must lie in (0, 1)");
    require(burn_in >= 0, ErrorCode::ConfigInvalid, "burn-in must be nonnegative");
  }
};

/// Draws that are shared by all subjects of one replication.
struct Dgp {
  DgpConfig config;
  Eigen::MatrixXd diagonal;   // p x p, diagonal part
  Eigen::MatrixXd within;     // p x p, within-block off-diagonal part
  Eigen::MatrixXd activated;  // p x p, 1 at the delta positions
  Eigen::VectorXd gamma;      // direction of covariate modulation
  std::vector<UnitPair> truth;

  int block_of(Eigen::Index unit) const { return static_cast<int>(unit / (config.p / 3)); }

  /// Transition matrix for a subject with covariates w and treatment z,
  /// before stationarity rescaling.
  Eigen::MatrixXd raw_transition(const Eigen::VectorXd& w, int z) const {
    const double mod = 1.0 + config.covariate_effect_scale * std::tanh(w.dot(gamma));
    Eigen::MatrixXd a = diagonal + mod * within;
    if (z == 1) a += config.delta * activated;
    return a;
  }

  VarProcess process(const Eigen::VectorXd& w, int z) const {
    Eigen::MatrixXd a = raw_transition(w, z);
    const double rho = spectral_radius(a);
    if (rho > config.target_spectral_radius) a *= config.target_spectral_radius / rho;
    return VarProcess{{a}, Eigen::VectorXd::Zero(config.p), Eigen::MatrixXd::Identity(config.p, config.p)};
  }
};

inline Dgp build_dgp(const DgpConfig& config, std::uint64_t replication) {
  config.validate();
  Rng rng(derive_seed(config.master_seed, "structure", {replication}));
  const int p = config.p;
  const int block = p / 3;
  Dgp dgp;
  dgp.config = config;
  dgp.diagonal = Eigen::MatrixXd::Zero(p, p);
  dgp.within = Eigen::MatrixXd::Zero(p, p);
  dgp.activated = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) dgp.diagonal(i, i) = rng.uniform(config.diag_low, config.diag_high);
  for (int b = 0; b < 3; ++b)
    for (int i = b * block; i < (b + 1) * block; ++i)
      for (int j = b * block; j < (b + 1) * block; ++j) {
        if (i == j) continue;
        const double keep = rng.uniform();
        const double magnitude = rng.uniform(config.offdiag_low, config.offdiag_high);
        const double sign = rng.sign();
        if (keep < config.offdiag_density) dgp.within(i, j) = sign * magnitude;
      }
  // delta positions: row = target, column = source, in a between-block cell
  for (int target_block = 0; target_block < 3; ++target_block)
    for (int source_block = 0; source_block < 3; ++source_block) {
      if (target_block == source_block) continue;
      std::vector<int> cells(static_cast<std::size_t>(block * block));
      for (int c = 0; c < block * block; ++c) cells[static_cast<std::size_t>(c)] = c;
      // partial Fisher-Yates
      for (int c = 0; c < config.activated_per_block; ++c) {
        const auto remaining = static_cast<double>(block * block - c);
        const int pick = c + std::min(static_cast<int>(rng.uniform() * remaining), block * block - c - 1);
        std::swap(cells[static_cast<std::size_t>(c)], cells[static_cast<std::size_t>(pick)]);
        const int target = target_block * block + cells[static_cast<std::size_t>(c)] / block;
        const int source = source_block * block + cells[static_cast<std::size_t>(c)] % block;
        dgp.activated(target, source) = 1.0;
      }
    }
  if (config.delta > 0.0)
    for (int target = 0; target < p; ++target)
      for (int source = 0; source < p; ++source)
        if (dgp.activated(target, source) != 0.0) dgp.truth.push_back({source, target});
  std::sort(dgp.truth.begin(), dgp.truth.end());
  // modulation points along beta so that treatment and connectivity share a driver
  dgp.gamma = config.beta_true / config.beta_true.norm();
  return dgp;
}

struct SubjectDraw {
  Eigen::VectorXd w;
  int z = 0;
};

inline SubjectDraw draw_subject(const DgpConfig& config, std::uint64_t replication, std::uint64_t subject) {
  Rng rng(derive_seed(config.master_seed, "covariates", {replication, subject}));
  SubjectDraw s;
  s.w.resize(config.q());
  for (int k = 0; k < config.q(); ++k) s.w(k) = rng.normal();
  const double e = 1.0 / (1.0 + std::exp(-s.w.dot(config.beta_true)));
  s.z = rng.bernoulli(e) ? 1 : 0;
  return s;
}

inline TimeSeriesPanel simulate_subject(const Dgp& dgp, const SubjectDraw& draw, std::uint64_t replication,
                                        std::uint64_t subject) {
  const std::uint64_t seed = derive_seed(dgp.config.master_seed, "panel", {replication, subject});
  return simulate_var(dgp.process(draw.w, draw.z), dgp.config.T, dgp.config.burn_in, seed);
}

enum class PropensitySpec { Correct, Misspecified };

struct MethodSpec {
  bool use_splitting = true;
  PropensitySpec propensity = PropensitySpec::Correct;

  std::string name() const {
    if (use_splitting) return propensity == PropensitySpec::Correct ? "i" : "ii";
    return propensity == PropensitySpec::Correct ? "iii" : "iv";
  }
  std::string description() const {
    return std::string(use_splitting ? "split" : "nosplit") +
           (propensity == PropensitySpec::Correct ? "+correct" : "+misspecified");
  }
  bool operator==(const MethodSpec&) const = default;
};

inline std::vector<MethodSpec> all_methods() {
  return {{true, PropensitySpec::Correct},
          {true, PropensitySpec::Misspecified},
          {false, PropensitySpec::Correct},
          {false, PropensitySpec::Misspecified}};
}

inline MethodSpec parse_method(const std::string& name) {
  for (const MethodSpec& m : all_methods())
    if (m.name() == name || m.description() == name) return m;
  fail(ErrorCode::ConfigInvalid, "unknown method '" + name + "'");
}

/// Covariates kept by the misspecified model: all but the two with the
/// largest |beta|.
inline std::vector<Eigen::Index> misspecified_columns(const Eigen::VectorXd& beta) {
  require(beta.size() >= 3, ErrorCode::ConfigInvalid, "misspecified model needs at least three covariates");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(beta.size()));
  for (Eigen::Index k = 0; k < beta.size(); ++k) order[static_cast<std::size_t>(k)] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(beta(a)) > std::abs(beta(b)); });
  std::vector<Eigen::Index> kept(order.begin() + 2, order.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

struct PipelineConfig {
  SplitConfig split;
  BootstrapConfig bootstrap;
  LinkKind link = LinkKind::Logistic;
  double variance_floor = kDefaultVarianceFloor;
  PropensityConfig propensity;
};

struct ReplicationDetail {
  std::uint64_t replication = 0;
  MethodSpec method;
  bool failed = false;
  std::string error;
  std::vector<UnitPair> pairs;
  Eigen::VectorXd tau_star;
  Eigen::VectorXd statistics;  // standardized, aligned with pairs
  std::vector<UnitPair> rejections;
  int stepdown_rejections = 0;
  double quantile = 0.0;
  std::vector<UnitPair> truth;
};

inline std::vector<ReplicationDetail> run_replication(const DgpConfig& config, const std::vector<MethodSpec>& methods,
                                                      const PipelineConfig& pipeline, std::uint64_t replication) {
  const Dgp dgp = build_dgp(config, replication);
  const auto n = static_cast<std::size_t>(config.n);

  CovariateTable table;
  table.values.resize(config.n, config.q());
  table.treatment.resize(config.n);
  std::vector<TimeSeriesPanel> panels;
  panels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SubjectDraw s = draw_subject(config, replication, i);
    table.values.row(static_cast<Eigen::Index>(i)) = s.w.transpose();
    table.treatment(static_cast<Eigen::Index>(i)) = s.z;
    table.subject_ids.push_back("s" + std::to_string(i));
    panels.push_back(simulate_subject(dgp, s, replication, i));
  }

  std::optional<OutcomePanel> outcomes[2];  // [nosplit, split]
  std::string derive_error[2];
  const auto outcomes_for = [&](bool split) -> const OutcomePanel* {
    auto& slot = outcomes[split ? 1 : 0];
    if (slot || !derive_error[split ? 1 : 0].empty()) return slot ? &*slot : nullptr;
    try {
      std::vector<ConnectivityOutcome> per_subject;
      per_subject.reserve(n);
      for (std::size_t i = 0; i < n; ++i)
        per_subject.push_back(derive_connectivity(panels[i], pipeline.split, table.subject_ids[i], split));
      slot = assemble_outcomes(per_subject);
      require(slot->components() > 0, ErrorCode::EmptyActiveSet, "every pair was dropped");
    } catch (const Error& e) {
      slot.reset();
      derive_error[split ? 1 : 0] = std::string(to_string(e.code())) + ": " + e.what();
    }
    return slot ? &*slot : nullptr;
  };

  std::vector<ReplicationDetail> details;
  for (const MethodSpec& method : methods) {
    ReplicationDetail d;
    d.replication = replication;
    d.method = method;
    d.truth = dgp.truth;
    const OutcomePanel* y = outcomes_for(method.use_splitting);
    if (y == nullptr) {
      d.failed = true;
      d.error = derive_error[method.use_splitting ? 1 : 0];
      details.push_back(std::move(d));
      continue;
    }
    try {
      const CovariateTable used = method.propensity == PropensitySpec::Correct
                                      ? table
                                      : table.select(misspecified_columns(config.beta_true));
      const PropensityFit fit = fit_propensity(used, pipeline.link, pipeline.propensity);
      const EffectEstimates est = estimate_effects(*y, used, fit, pipeline.variance_floor);
      d.pairs = y->pairs;
      d.tau_star = est.tau_star;
      d.statistics = standardized_statistics(est.tau_star, est.variance, y->subjects());
      BootstrapConfig boot = pipeline.bootstrap;
      boot.seed = derive_seed(config.master_seed, "bootstrap", {replication});
      const SimultaneousResult res = stepdown_augment(est.tau_star, est.influence, est.variance, est.active_indices(), boot);
      for (Eigen::Index k : res.rejections) d.rejections.push_back(y->pairs[static_cast<std::size_t>(k)]);
      d.stepdown_rejections = res.stepdown_rejections;
      d.quantile = res.quantile;
    } catch (const Error& e) {
      d.failed = true;
      d.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    details.push_back(std::move(d));
  }
  return details;
}

struct MetricsReport {
  std::string cell;
  double delta = 0.0;
  int n = 0;
  int p = 0;
  MethodSpec method;
  double fwer = 0.0;
  double fwer_se = 0.0;
  std::optional<double> power;
  double fdp_mean = 0.0;
  double fdpex = 0.0;
  double fdpex_se = 0.0;
  double bias_mean = 0.0;
  double rmse = 0.0;
  int replications = 0;
  int failed = 0;
};

struct ReplicationOutcome {
  bool any_false = false;
  std::optional<double> power;
  double fdp = 0.0;
};

inline ReplicationOutcome score_replication(const ReplicationDetail& d) {
  const std::set<UnitPair> truth(d.truth.begin(), d.truth.end());
  int false_count = 0;
  int true_count = 0;
  for (const UnitPair& r : d.rejections) (truth.contains(r) ? true_count : false_count) += 1;
  ReplicationOutcome out;
  out.any_false = false_count > 0;
  if (!truth.empty()) out.power = static_cast<double>(true_count) / static_cast<double>(truth.size());
  out.fdp = static_cast<double>(false_count) / static_cast<double>(std::max<std::size_t>(d.rejections.size(), 1));
  return out;
}

/// Aggregates the details of one method. Failed replications are counted
/// but excluded from every rate.
inline MetricsReport aggregate_metrics(const std::vector<ReplicationDetail>& details, double fdp_threshold) {
  require(!details.empty(), ErrorCode::ConfigInvalid, "no replications to aggregate");
  MetricsReport m;
  m.method = details.front().method;
  double fwer = 0.0, power = 0.0, fdp = 0.0, fdpex = 0.0, dev = 0.0, dev2 = 0.0;
  std::size_t power_count = 0, dev_count = 0;
  for (const ReplicationDetail& d : details) {
    if (d.failed) {
      ++m.failed;
      continue;
    }
    ++m.replications;
    const ReplicationOutcome o = score_replication(d);
    fwer += o.any_false ? 1.0 : 0.0;
    if (o.power) {
      power += *o.power;
      ++power_count;
    }
    fdp += o.fdp;
    fdpex += o.fdp > fdp_threshold ? 1.0 : 0.0;
    const std::set<UnitPair> truth(d.truth.begin(), d.truth.end());
    for (std::size_t k = 0; k < d.pairs.size(); ++k) {
      if (truth.contains(d.pairs[k])) continue;
      const double x = d.tau_star(static_cast<Eigen::Index>(k));
      dev += x;
      dev2 += x * x;
      ++dev_count;
    }
  }
  const auto r = static_cast<double>(m.replications);
  if (m.replications > 0) {
    m.fwer = fwer / r;
    m.fdp_mean = fdp / r;
    m.fdpex = fdpex / r;
    m.fwer_se = std::sqrt(m.fwer * (1.0 - m.fwer) / r);
    m.fdpex_se = std::sqrt(m.fdpex * (1.0 - m.fdpex) / r);
  }
  if (power_count > 0) m.power = power / static_cast<double>(power_count);
  if (dev_count > 0) {
    m.bias_mean = dev / static_cast<double>(dev_count);
    m.rmse = std::sqrt(dev2 / static_cast<double>(dev_count));
  }
  return m;
}

struct Cell {
  double delta = 0.0;
  int n = 100;
  int p = 21;

  std::string label() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "delta=%g_n=%d_p=%d", delta, n, p);
    return buf;
  }
};

struct ExperimentConfig {
  DgpConfig dgp;
  std::vector<Cell> grid;
  std::vector<MethodSpec> methods = all_methods();
  PipelineConfig pipeline;
  int replications = 300;
  int threads = 1;

  void validate() const {
    require(!grid.empty(), ErrorCode::ConfigInvalid, "empty grid");
    require(!methods.empty(), ErrorCode::ConfigInvalid, "no methods");
    require(replications >= 1, ErrorCode::ConfigInvalid, "replications must be positive");
    pipeline.bootstrap.validate();
    validate_split_config(pipeline.split);
    for (const Cell& c : grid) cell_dgp(c).validate();
  }

  DgpConfig cell_dgp(const Cell& cell) const {
    DgpConfig d = dgp;
    d.delta = cell.delta;
    d.n = cell.n;
    d.p = cell.p;
    return d;
  }
};

/// p = 21, n = 100, delta in {0, 0.06, 0.10}, 300 replications.
inline ExperimentConfig desk_preset() {
  ExperimentConfig c;
  c.grid = {{0.0, 100, 21}, {0.06, 100, 21}, {0.10, 100, 21}};
  c.replications = 300;
  return c;
}

/// Full grid: delta in {0, 0.02, ..., 0.10}, n in {100, 200}, p in {21, 51},
/// 1000 replications.
inline ExperimentConfig paper_preset() {
  ExperimentConfig c;
  for (int p : {21, 51})
    for (int n : {100, 200})
      for (double delta : {0.0, 0.02, 0.04, 0.06, 0.08, 0.10}) c.grid.push_back({delta, n, p});
  c.replications = 1000;
  return c;
}

struct CellResult {
  Cell cell;
  std::vector<MetricsReport> reports;          // one per method
  std::vector<std::vector<ReplicationDetail>> details;  // [replication][method]
};

inline CellResult run_cell(const ExperimentConfig& config, const Cell& cell) {
  const DgpConfig dgp = config.cell_dgp(cell);
  dgp.validate();
  CellResult out;
  out.cell = cell;
  out.details.resize(static_cast<std::size_t>(config.replications));
  parallel_for(out.details.size(), config.threads, [&](std::size_t r) {
    out.details[r] = run_replication(dgp, config.methods, config.pipeline, r);
  });
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    std::vector<ReplicationDetail> per_method;
    per_method.reserve(out.details.size());
    for (const auto& rep : out.details) per_method.push_back(rep[m]);
    MetricsReport report = aggregate_metrics(per_method, config.pipeline.bootstrap.fdp_threshold);
    report.cell = cell.label();
    report.delta = cell.delta;
    report.n = cell.n;
    report.p = cell.p;
    out.reports.push_back(std::move(report));
  }
  return out;
}

}  // namespace causalconn
