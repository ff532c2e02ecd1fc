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

// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; the exit status is nonzero if any check fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <Eigen/Dense>

#include "causalconn/connectivity.hpp"
#include "causalconn/effects.hpp"
#include "causalconn/experiment.hpp"
#include "causalconn/io.hpp"
#include "causalconn/parallel.hpp"
#include "causalconn/propensity.hpp"
#include "causalconn/rng.hpp"
#include "causalconn/simultaneous.hpp"
#include "causalconn/var_core.hpp"
#include "test_support.hpp"

namespace cc = causalconn;
namespace ct = causalconn::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

int threads() { return cc::default_threads(); }

// 1. F statistics of a null pair against F(1, 496)
Verdict f_calibration() {
  const cc::VarProcess proc = ct::bivariate_var1(0.6, 0.0, 0.0, 0.4);
  const boost::math::fisher_f_distribution<double> ref(1.0, 496.0);
  std::vector<double> f(2000), pv(2000);
  bool df_ok = true;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const cc::TimeSeriesPanel panel = cc::simulate_var(proc, 500, 200, 100000 + seed);
    const cc::FStatistic s = cc::conditional_granger_f(panel, {0, 500}, 0, 1, {}, 1);
    df_ok = df_ok && s.df1 == 1 && s.df2 == 496;
    f[seed] = s.value;
    pv[seed] = s.p_value;
  }
  const double ks_f = ct::ks_distance(f, [&](double x) { return boost::math::cdf(ref, x); });
  const double ks_p = ct::ks_distance(pv, [](double x) { return x; });
  return {df_ok && ks_f < 0.05 && ks_p < 0.05, fmt("KS(F)=%.4f KS(p)=%.4f, df ok=%g", ks_f, ks_p, df_ok)};
}

// 2. deletion stability with L = floor(sqrt(T - T0))
Verdict deletion_stability() {
  const cc::VarProcess proc = ct::bivariate_var1(0.5, 0.0, 0.0, 0.5);
  std::vector<double> medians;
  for (int block : {250, 1000, 4000}) {
    const auto deleted = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(block))));
    std::vector<double> gaps(200);
    cc::parallel_for(gaps.size(), threads(), [&](std::size_t s) {
      const cc::TimeSeriesPanel panel = cc::simulate_var(proc, 2 * block, 100, 200000 + 1000 * block + s);
      gaps[s] = cc::deletion_stability_gap(panel, cc::SplitConfig{}, 0, 1, deleted);
    });
    medians.push_back(ct::median(gaps));
  }
  return {medians[0] > medians[1] && medians[1] > medians[2],
          fmt("medians %.4f > %.4f > %.4f", medians[0], medians[1], medians[2])};
}

// 3. Wald coverage of the propensity MLE
Verdict propensity_coverage() {
  const Eigen::VectorXd beta = cc::default_beta();
  const int n = 4000, reps = 300;
  std::vector<int> covered(5, 0);
  for (int r = 0; r < reps; ++r) {
    cc::Rng rng(300000 + r);
    cc::CovariateTable t;
    t.values = rng.normal_matrix(n, 5);
    t.treatment.resize(n);
    for (int i = 0; i < n; ++i) {
      const double eta = t.values.row(i).dot(beta);
      t.treatment(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
      t.subject_ids.push_back(std::to_string(i));
    }
    t.covariate_names = {"a", "b", "c", "d", "e"};
    const cc::PropensityFit fit = cc::fit_propensity(t, cc::LinkKind::Logistic);
    const Eigen::MatrixXd cov = fit.fisher_info.inverse() / n;
    for (int k = 0; k < 5; ++k) {
      const double se = std::sqrt(cov(k, k));
      if (std::abs(fit.beta(k) - beta(k)) <= 1.959963984540054 * se) ++covered[k];
    }
  }
  bool ok = true;
  std::string detail = "coverage";
  for (int k = 0; k < 5; ++k) {
    const double c = covered[k] / static_cast<double>(reps);
    ok = ok && c >= 0.92 && c <= 0.98;
    detail += fmt(" %.3f", c);
  }
  return {ok, detail};
}

// 4. analytic variance against Monte Carlo variance of tau*, method (i)
Verdict variance_ratio() {
  cc::DgpConfig config;
  config.n = 200;
  config.master_seed = 4;
  const int reps = 500;
  const std::size_t k_pairs = static_cast<std::size_t>(config.p * (config.p - 1));
  std::vector<Eigen::VectorXd> tau(reps), var(reps);
  std::vector<char> usable(reps, 0);
  cc::parallel_for(static_cast<std::size_t>(reps), threads(), [&](std::size_t r) {
    const cc::Dgp dgp = cc::build_dgp(config, r);
    cc::CovariateTable table;
    table.values.resize(config.n, config.q());
    table.treatment.resize(config.n);
    std::vector<cc::ConnectivityOutcome> out;
    for (int i = 0; i < config.n; ++i) {
      const cc::SubjectDraw s = cc::draw_subject(config, r, i);
      table.values.row(i) = s.w.transpose();
      table.treatment(i) = s.z;
      table.subject_ids.push_back("s" + std::to_string(i));
      out.push_back(cc::derive_connectivity(cc::simulate_subject(dgp, s, r, i), cc::SplitConfig{},
                                            table.subject_ids.back(), true));
    }
    const cc::OutcomePanel y = cc::assemble_outcomes(out);
    if (static_cast<std::size_t>(y.components()) != k_pairs) return;
    const cc::PropensityFit fit = cc::fit_propensity(table, cc::LinkKind::Logistic);
    const cc::EffectEstimates est = cc::estimate_effects(y, table, fit);
    tau[r] = est.tau_star;
    var[r] = est.variance / static_cast<double>(config.n);
    usable[r] = 1;
  });
  int used = 0;
  for (char u : usable) used += u;
  std::vector<double> ratios;
  for (std::size_t k = 0; k < k_pairs; ++k) {
    std::vector<double> t, v;
    for (int r = 0; r < reps; ++r) {
      if (!usable[r]) continue;
      t.push_back(tau[r](static_cast<Eigen::Index>(k)));
      v.push_back(var[r](static_cast<Eigen::Index>(k)));
    }
    ratios.push_back(ct::mean(v) / ct::sample_variance(t));
  }
  const double med = ct::median(ratios);
  return {med >= 0.85 && med <= 1.15, fmt("median ratio %.4f over %g components, %g usable replications", med,
                                          static_cast<double>(ratios.size()), used)};
}

// 5. bootstrap quantiles on Gaussian influence columns
Verdict bootstrap_sanity() {
  const Eigen::Index n = 2000;
  cc::Rng rng(500);
  const Eigen::MatrixXd influence = rng.normal_matrix(n, 2);
  const Eigen::VectorXd variance = cc::variance_estimates(influence).variance;
  cc::BootstrapConfig config;
  config.replications = 10000;
  config.seed = 501;
  const double one = cc::multiplier_bootstrap_quantile(influence, variance, {0}, config);
  const double two = cc::multiplier_bootstrap_quantile(influence, variance, {0, 1}, config);
  // closed form for two independent components: (2 Phi(q) - 1)^2 = 0.95
  const double oracle = std::sqrt(2.0) * boost::math::erf_inv(std::sqrt(0.95));
  return {one >= 1.85 && one <= 2.07 && two >= 2.13 && two <= 2.34,
          fmt("q1=%.4f q2=%.4f (closed form %.4f)", one, two, oracle)};
}

// 6 and 7 share one global-null run of all four methods
const cc::CellResult& null_run() {
  static const cc::CellResult result = [] {
    cc::ExperimentConfig c;
    c.dgp.master_seed = 6;
    c.replications = 500;
    c.threads = threads();
    return cc::run_cell(c, {0.0, 100, 21});
  }();
  return result;
}

const cc::MetricsReport& report_for(const cc::CellResult& r, const std::string& method) {
  for (const auto& m : r.reports)
    if (m.method.name() == method) return m;
  cc::fail(cc::ErrorCode::Internal, "no report for method " + method);
}

Verdict global_null_fwer() {
  const cc::MetricsReport& m = report_for(null_run(), "i");
  return {m.fwer >= 0.02 && m.fwer <= 0.10,
          fmt("FWER %.4f (SE %.4f), %g replications, %g failed", m.fwer, m.fwer_se, m.replications, m.failed)};
}

Verdict misspecification_inflation() {
  const cc::MetricsReport& base = report_for(null_run(), "i");
  // binomial SE at the nominal level, sqrt(alpha (1 - alpha) / R)
  const double se = std::sqrt(0.05 * 0.95 / base.replications);
  bool ok = true;
  std::string detail = fmt("(i) %.4f, 3 SE %.4f", base.fwer, 3.0 * se);
  for (const char* name : {"ii", "iv"}) {
    const cc::MetricsReport& m = report_for(null_run(), name);
    const double diff_se = std::sqrt(base.fwer_se * base.fwer_se + m.fwer_se * m.fwer_se);
    ok = ok && m.fwer - base.fwer > 3.0 * se;
    detail += std::string("; (") + name + ")" +
              fmt(" %.4f, excess %.4f (3 SE of the difference: %.4f)", m.fwer, m.fwer - base.fwer, 3.0 * diff_se);
  }
  return {ok, detail};
}

// 8, 9 and 11 use the desk preset through the command line tool
int run_cli(const std::string& args) {
  const std::string cmd = std::string(CAUSALCONN_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path desk_dir(int which) { return fs::temp_directory_path() / ("causalconn_acceptance_desk" + std::to_string(which)); }

bool desk_run(int which) {
  static std::map<int, bool> done;
  if (done.count(which)) return done[which];
  fs::remove_all(desk_dir(which));
  const int rc = run_cli("experiment --preset desk --seed 7 --out " + desk_dir(which).string());
  return done[which] = rc == 0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> desk_row(double delta, const std::string& method) {
  const cc::CsvTable t = cc::read_csv(desk_dir(1) / "metrics.csv");
  for (const auto& row : t.rows) {
    std::map<std::string, std::string> m;
    for (std::size_t c = 0; c < t.header.size(); ++c) m[t.header[c]] = row[c];
    if (m["method"] == method && std::stod(m["delta"]) == delta) return m;
  }
  cc::fail(cc::ErrorCode::Internal, "desk metrics lack the requested row");
}

Verdict power_and_fdpex() {
  if (!desk_run(1)) return {false, "desk experiment failed"};
  bool ok = true;
  std::string detail;
  double previous = 0.0;  // power at delta = 0 is undefined (no true pairs)
  for (double delta : {0.0, 0.06, 0.10}) {
    auto row = desk_row(delta, "i");
    const double fdpex = std::stod(row["fdpex"]);
    const double se = std::stod(row["fdpex_se"]);
    ok = ok && fdpex <= 0.05 + 2.0 * se;
    detail += fmt("delta=%.2f FDPex %.4f (SE %.4f)", delta, fdpex, se);
    if (row["power"] != "NA") {
      const double power = std::stod(row["power"]);
      ok = ok && power >= previous;
      previous = power;
      detail += fmt(" power %.4f", power);
    }
    detail += "; ";
  }
  return {ok, detail};
}

Verdict bias_rmse() {
  if (!desk_run(1)) return {false, "desk experiment failed"};
  auto i = desk_row(0.0, "i");
  auto ii = desk_row(0.0, "ii");
  const double bias = std::stod(i["bias_mean"]), rmse = std::stod(i["rmse"]), bias2 = std::stod(ii["bias_mean"]);
  return {std::abs(bias) <= 0.05 && rmse >= 0.45 && rmse <= 0.95 && bias2 >= 0.15,
          fmt("(i) bias %.4f RMSE %.4f; (ii) bias %.4f", bias, rmse, bias2)};
}

// 10. oracle equivalences
Verdict oracle_equivalences() {
  std::string detail;
  double worst = 0.0;
  cc::Rng rng(1000);
  for (int inst = 0; inst < 50; ++inst) {
    const Eigen::Index p = 2 + inst % 4;
    const int order = 1 + inst % 3;
    const cc::TimeSeriesPanel panel(rng.normal_matrix(p, 80 + 7 * inst));
    cc::VarSpec spec;
    spec.target = inst % p;
    spec.order = order;
    for (Eigen::Index u = 0; u < p; ++u)
      if (u == spec.target || rng.uniform() < 0.6) spec.lagged_regressors.push_back(u);
    const cc::TimeRange window{inst % 5, panel.length() - inst % 3};
    const cc::VarFit fit = cc::fit_var_ols(panel, window, spec);
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    ct::lagged_regression(panel, window, spec.target, spec.lagged_regressors, order, x, y);
    const Eigen::VectorXd b = ct::normal_equations(x, y);
    worst = std::max(worst, (fit.coefficients - b).norm() / b.norm());
  }
  const bool ols_ok = worst <= 1e-8;
  detail += fmt("OLS worst relative gap %.3g", worst);

  // integer outcomes and n a power of two keep the weighted difference exact
  const Eigen::Index n = 64;
  cc::CovariateTable t;
  t.values = rng.normal_matrix(n, 1);
  t.treatment.resize(n);
  cc::OutcomePanel y;
  y.values.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    t.treatment(i) = rng.uniform() < 0.5 ? 1 : 0;
    t.subject_ids.push_back(std::to_string(i));
    y.subject_ids.push_back(std::to_string(i));
    for (Eigen::Index c = 0; c < 3; ++c) y.values(i, c) = std::floor(30.0 * rng.uniform()) - 10.0;
  }
  t.treatment(0) = 1;
  t.treatment(1) = 0;
  t.covariate_names = {"w"};
  y.pairs = {{0, 1}, {1, 0}, {0, 2}};
  const Eigen::VectorXd tau = cc::ipw_estimate(y, t, cc::known_propensity(Eigen::VectorXd::Constant(n, 0.5)));
  bool ipw_ok = true;
  for (Eigen::Index c = 0; c < 3; ++c) {
    double diff = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) diff += (t.treatment(i) == 1 ? 2.0 : -2.0) * y.values(i, c);
    ipw_ok = ipw_ok && tau(c) == diff / static_cast<double>(n);
  }
  detail += ipw_ok ? "; IPW exact" : "; IPW mismatch";

  // d = 1/m gives floor(d R / (1 - d)) = floor(R / (m - 1)) in integers
  bool aug_ok = true;
  for (int m : {10, 5, 2})
    for (int r = 0; r <= 20; ++r) aug_ok = aug_ok && cc::augmentation_count(r, 1.0 / m) == r / (m - 1);
  detail += aug_ok ? "; augmentation counts match" : "; augmentation mismatch";
  return {ols_ok && ipw_ok && aug_ok, detail};
}

Verdict determinism() {
  if (!desk_run(1) || !desk_run(2)) return {false, "desk experiment failed"};
  const std::string a = slurp(desk_dir(1) / "metrics.csv"), b = slurp(desk_dir(2) / "metrics.csv");
  return {!a.empty() && a == b, fmt("metrics files of %g and %g bytes", static_cast<double>(a.size()),
                                    static_cast<double>(b.size()))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, f_calibration},       {2, deletion_stability}, {3, propensity_coverage}, {4, variance_ratio},
      {5, bootstrap_sanity},    {6, global_null_fwer},   {7, misspecification_inflation},
      {8, power_and_fdpex},     {9, bias_rmse},          {10, oracle_equivalences}, {11, determinism}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s [%.0f s]\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
