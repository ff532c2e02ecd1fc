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

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "causalconn/experiment.hpp"
#include "test_support.hpp"

namespace causalconn {
namespace {

template <class F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

DgpConfig small_config(double delta) {
  DgpConfig c;
  c.n = 40;
  c.p = 6;
  c.T = 300;
  c.delta = delta;
  c.master_seed = 11;
  return c;
}

Eigen::VectorXd covariate(double a) { return Eigen::VectorXd::Constant(5, a); }

TEST(BuildDgp, NullDeltaHasNoTruthAndIdenticalArms) {
  const Dgp dgp = build_dgp(small_config(0.0), 0);
  EXPECT_TRUE(dgp.truth.empty());
  for (double a : {-1.0, 0.0, 0.8})
    EXPECT_EQ(dgp.process(covariate(a), 0).transition[0], dgp.process(covariate(a), 1).transition[0]);
}

TEST(BuildDgp, TruthPairsCrossBlocks) {
  DgpConfig c;
  c.delta = 0.1;
  c.master_seed = 3;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    const Dgp dgp = build_dgp(c, rep);
    EXPECT_EQ(dgp.truth.size(), 18u);
    for (const UnitPair& pair : dgp.truth) EXPECT_NE(dgp.block_of(pair.source), dgp.block_of(pair.target));
  }
}

TEST(BuildDgp, TruthMatchesTreatedMinusControl) {
  DgpConfig c;
  c.delta = 0.06;
  c.master_seed = 5;
  const Dgp dgp = build_dgp(c, 2);
  const std::set<UnitPair> truth(dgp.truth.begin(), dgp.truth.end());
  const Eigen::VectorXd w = covariate(0.3);
  const Eigen::MatrixXd diff = dgp.raw_transition(w, 1) - dgp.raw_transition(w, 0);
  const Eigen::MatrixXd control = dgp.raw_transition(w, 0);
  for (Eigen::Index target = 0; target < c.p; ++target)
    for (Eigen::Index source = 0; source < c.p; ++source) {
      const bool in_truth = truth.contains({source, target});
      EXPECT_EQ(diff(target, source), in_truth ? 0.06 : 0.0);
      if (dgp.block_of(source) != dgp.block_of(target)) EXPECT_EQ(control(target, source), 0.0);
    }
}

TEST(BuildDgp, WithinBlockRangesAndStationarity) {
  DgpConfig c;
  c.delta = 0.1;
  c.offdiag_density = 1.0;
  c.master_seed = 8;
  const Dgp dgp = build_dgp(c, 0);
  for (Eigen::Index i = 0; i < c.p; ++i) {
    EXPECT_GE(dgp.diagonal(i, i), 0.72);
    EXPECT_LE(dgp.diagonal(i, i), 0.85);
    for (Eigen::Index j = 0; j < c.p; ++j) {
      if (i == j) continue;
      const double v = std::abs(dgp.within(i, j));
      if (dgp.block_of(i) == dgp.block_of(j)) {
        EXPECT_GE(v, 0.03);
        EXPECT_LE(v, 0.08);
      } else {
        EXPECT_EQ(v, 0.0);
      }
    }
  }
  Rng rng(1);
  for (int s = 0; s < 50; ++s) {
    Eigen::VectorXd w(5);
    for (Eigen::Index k = 0; k < 5; ++k) w(k) = 3.0 * rng.normal();
    for (int z : {0, 1}) {
      const VarProcess proc = dgp.process(w, z);
      const double rho = spectral_radius(proc.transition[0]);
      EXPECT_LT(rho, 1.0);
      EXPECT_LE(rho, c.target_spectral_radius + 1e-12);
      if (spectral_radius(dgp.raw_transition(w, z)) > c.target_spectral_radius)
        EXPECT_NEAR(rho, c.target_spectral_radius, 1e-10);
    }
  }
}

TEST(BuildDgp, DensityThinsWithinBlockEntries) {
  DgpConfig sparse;
  sparse.offdiag_density = 0.0;
  EXPECT_EQ(build_dgp(sparse, 0).within.cwiseAbs().sum(), 0.0);
}

TEST(BuildDgp, StructureIsSharedAcrossEffectSizes) {
  DgpConfig a = small_config(0.0);
  DgpConfig b = small_config(0.08);
  const Dgp da = build_dgp(a, 4), db = build_dgp(b, 4);
  EXPECT_EQ(da.diagonal, db.diagonal);
  EXPECT_EQ(da.within, db.within);
  EXPECT_EQ(da.activated, db.activated);
  const SubjectDraw sa = draw_subject(a, 4, 7), sb = draw_subject(b, 4, 7);
  EXPECT_EQ(sa.w, sb.w);
  EXPECT_EQ(sa.z, sb.z);
  EXPECT_NE(build_dgp(a, 5).diagonal, da.diagonal);
}

TEST(BuildDgp, RejectsBadConfig) {
  DgpConfig c;
  c.p = 20;
  EXPECT_EQ(error_of([&] { build_dgp(c, 0); }), ErrorCode::ConfigInvalid);
  c = DgpConfig{};
  c.delta = -0.1;
  EXPECT_EQ(error_of([&] { build_dgp(c, 0); }), ErrorCode::ConfigInvalid);
  c = DgpConfig{};
  c.covariate_effect_scale = 1.0;
  EXPECT_EQ(error_of([&] { build_dgp(c, 0); }), ErrorCode::ConfigInvalid);
}

TEST(DrawSubject, TreatmentRateMatchesLogisticModel) {
  // marginal Pr(Z = 1) by Gauss-Hermite-free numerical integration along W'beta ~ N(0, |beta|^2)
  const DgpConfig c;
  const double s = c.beta_true.norm();
  double marginal = 0.0;
  const int grid = 20000;
  for (int g = 0; g < grid; ++g) {
    const double x = -8.0 + 16.0 * (g + 0.5) / grid;
    marginal += std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI) / (1.0 + std::exp(-s * x)) * (16.0 / grid);
  }
  int treated = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) treated += draw_subject(c, 0, static_cast<std::uint64_t>(i)).z;
  EXPECT_NEAR(static_cast<double>(treated) / n, marginal, 3.0 * std::sqrt(marginal * (1.0 - marginal) / n));
}

TEST(MisspecifiedColumns, DropsTheTwoLargestCoefficients) {
  EXPECT_EQ(misspecified_columns(default_beta()), (std::vector<Eigen::Index>{2, 3, 4}));
  Eigen::VectorXd b(4);
  b << 0.1, -2.0, 0.3, 1.0;
  EXPECT_EQ(misspecified_columns(b), (std::vector<Eigen::Index>{0, 2}));
}

TEST(MethodSpec, NamesAndParsing) {
  const auto methods = all_methods();
  ASSERT_EQ(methods.size(), 4u);
  EXPECT_EQ(methods[0].name(), "i");
  EXPECT_EQ(methods[3].name(), "iv");
  EXPECT_EQ(methods[1].description(), "split+misspecified");
  EXPECT_EQ(parse_method("iii"), methods[2]);
  EXPECT_EQ(parse_method("split+correct"), methods[0]);
  EXPECT_EQ(error_of([] { parse_method("v"); }), ErrorCode::ConfigInvalid);
}

ReplicationDetail detail(std::vector<UnitPair> truth, std::vector<UnitPair> rejections) {
  ReplicationDetail d;
  d.truth = std::move(truth);
  d.rejections = std::move(rejections);
  d.pairs = {{0, 1}, {1, 0}};
  d.tau_star = Eigen::VectorXd::Zero(2);
  return d;
}

TEST(AggregateMetrics, SingleReplicationExamples) {
  const MetricsReport empty = aggregate_metrics({detail({}, {})}, 0.1);
  EXPECT_EQ(empty.fwer, 0.0);
  EXPECT_EQ(empty.fdp_mean, 0.0);
  EXPECT_FALSE(empty.power.has_value());

  const MetricsReport mixed = aggregate_metrics({detail({{0, 1}, {0, 2}, {1, 2}, {2, 1}}, {{0, 1}, {1, 0}})}, 0.1);
  EXPECT_EQ(*mixed.power, 0.25);
  EXPECT_EQ(mixed.fdp_mean, 0.5);
  EXPECT_EQ(mixed.fwer, 1.0);
  EXPECT_EQ(mixed.fdpex, 1.0);
}

TEST(AggregateMetrics, AveragesAndSkipsFailures) {
  std::vector<ReplicationDetail> reps;
  reps.push_back(detail({{0, 1}}, {{0, 1}}));             // fdp 0, power 1
  reps.push_back(detail({{0, 1}}, {}));                   // fdp 0, power 0
  reps.push_back(detail({{0, 1}}, {{0, 1}, {1, 0}}));     // fdp 0.5, power 1
  reps.push_back(detail({{0, 1}}, {{1, 0}, {2, 1}}));     // fdp 1, power 0
  ReplicationDetail failed = detail({{0, 1}}, {{1, 0}});
  failed.failed = true;
  reps.push_back(failed);
  reps[0].tau_star << 9.0, 0.5;  // only the null pair (1, 0) counts toward bias
  reps[1].tau_star << 9.0, -0.5;
  reps[2].tau_star << 9.0, 1.0;
  reps[3].tau_star << 9.0, 0.0;
  const MetricsReport m = aggregate_metrics(reps, 0.1);
  EXPECT_EQ(m.replications, 4);
  EXPECT_EQ(m.failed, 1);
  EXPECT_EQ(m.fwer, 0.5);
  EXPECT_EQ(*m.power, 0.5);
  EXPECT_EQ(m.fdp_mean, 0.375);
  EXPECT_EQ(m.fdpex, 0.5);
  EXPECT_EQ(m.fwer_se, std::sqrt(0.25 / 4.0));
  EXPECT_DOUBLE_EQ(m.bias_mean, 0.25);
  EXPECT_DOUBLE_EQ(m.rmse, std::sqrt((0.25 + 0.25 + 1.0) / 4.0));
}

TEST(Cell, LabelFormat) {
  EXPECT_EQ((Cell{0.06, 100, 21}.label()), "delta=0.06_n=100_p=21");
  EXPECT_EQ((Cell{0.0, 200, 51}.label()), "delta=0_n=200_p=51");
}

TEST(Presets, DeskHasThreeCellsAndFullGridTwentyFour) {
  EXPECT_EQ(desk_preset().grid.size(), 3u);
  EXPECT_EQ(paper_preset().grid.size(), 24u);
  EXPECT_EQ(paper_preset().replications, 1000);
  desk_preset().validate();
  paper_preset().validate();
}

TEST(RunReplication, MethodsShareSubjectDataAndAreDeterministic) {
  const DgpConfig c = small_config(0.1);
  PipelineConfig pipeline;
  pipeline.bootstrap.replications = 500;
  const auto a = run_replication(c, all_methods(), pipeline, 3);
  const auto b = run_replication(c, all_methods(), pipeline, 3);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t m = 0; m < 4; ++m) {
    ASSERT_FALSE(a[m].failed) << a[m].error;
    EXPECT_EQ(a[m].method, all_methods()[m]);
    EXPECT_EQ(a[m].tau_star, b[m].tau_star);
    EXPECT_EQ(a[m].rejections, b[m].rejections);
    EXPECT_EQ(a[m].pairs.size(), 30u);
    EXPECT_EQ(a[m].truth, a[0].truth);
  }
  // same outcomes, different propensity model
  EXPECT_NE(a[0].tau_star, a[1].tau_star);
}

TEST(RunCell, ThreadCountDoesNotChangeResults) {
  ExperimentConfig config;
  config.dgp = small_config(0.0);
  config.grid = {{0.05, 40, 6}};
  config.replications = 4;
  config.pipeline.bootstrap.replications = 200;
  config.threads = 1;
  const CellResult serial = run_cell(config, config.grid[0]);
  config.threads = 3;
  const CellResult parallel = run_cell(config, config.grid[0]);
  ASSERT_EQ(serial.reports.size(), 4u);
  for (std::size_t m = 0; m < 4; ++m) {
    EXPECT_EQ(serial.reports[m].fwer, parallel.reports[m].fwer);
    EXPECT_EQ(serial.reports[m].bias_mean, parallel.reports[m].bias_mean);
    EXPECT_EQ(serial.reports[m].rmse, parallel.reports[m].rmse);
    EXPECT_EQ(serial.reports[m].cell, "delta=0.05_n=40_p=6");
  }
}

// Dropping the two strongest confounders biases tau upward on the pairs whose
// baseline strength moves with the covariates, so the signed standardized
// statistics shift up.
TEST(RunReplication, MisspecifiedStatisticsAreStochasticallyLarger) {
  DgpConfig c;
  c.T = 500;
  c.master_seed = 21;
  PipelineConfig pipeline;
  pipeline.bootstrap.replications = 100;
  const std::vector<MethodSpec> methods = {all_methods()[0], all_methods()[1]};
  // averaged over the pairs with a nonzero within-block entry
  const auto signed_mean = [](const ReplicationDetail& d, const Dgp& dgp) {
    double s = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < d.pairs.size(); ++k) {
      if (dgp.within(d.pairs[k].target, d.pairs[k].source) == 0.0) continue;
      const auto i = static_cast<Eigen::Index>(k);
      s += std::copysign(d.statistics(i), d.tau_star(i));
      ++count;
    }
    return s / std::max(count, 1);
  };
  std::vector<double> correct, misspecified;
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    const auto d = run_replication(c, methods, pipeline, rep);
    ASSERT_FALSE(d[0].failed || d[1].failed);
    const Dgp dgp = build_dgp(c, rep);
    correct.push_back(signed_mean(d[0], dgp));
    misspecified.push_back(signed_mean(d[1], dgp));
  }
  EXPECT_GT(testing::rank_sum_z(correct, misspecified), 1.645);
}

}  // namespace
}  // namespace causalconn
