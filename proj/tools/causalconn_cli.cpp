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

// causalconn: derive connectivity, estimate intervention effects, simulate
// datasets and run the Monte Carlo study from the command line.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalconn/config.hpp"
#include "causalconn/io.hpp"
#include "causalconn/parallel.hpp"

namespace cc = causalconn;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string preset;
  std::string out = ".";
  std::optional<int> replications;
  bool detail = false;
  std::string manifest;
  std::string outcomes;
  std::string covariates;
  std::string treatment_column;
  bool no_split = false;
  bool allow_unequal_length = false;
  std::optional<double> alpha;
};

cc::RunConfig resolve(const Flags& f) {
  cc::RunConfig c;
  c.threads = cc::default_threads();
  if (!f.config.empty()) c = cc::load_config(f.config, c);
  if (!f.preset.empty()) {
    const cc::ExperimentConfig p = cc::preset_config(f.preset);
    c.preset = f.preset;
    c.experiment.grid = p.grid;
    c.experiment.replications = p.replications;
  }
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.replications) c.experiment.replications = *f.replications;
  if (f.detail) c.detail = true;
  if (!f.manifest.empty()) c.data.manifest = f.manifest;
  if (!f.outcomes.empty()) c.data.outcomes = f.outcomes;
  if (!f.covariates.empty()) c.data.covariates = f.covariates;
  if (!f.treatment_column.empty()) c.data.treatment_column = f.treatment_column;
  if (f.no_split) c.use_splitting = false;
  if (f.allow_unequal_length) c.data.allow_unequal_length = true;
  if (f.alpha) c.pipeline().bootstrap.alpha = *f.alpha;
  c.dgp().master_seed = c.seed;
  c.experiment.threads = c.threads;
  cc::validate(c);
  return c;
}

void echo_config(const fs::path& out, const cc::RunConfig& c) {
  cc::write_file_atomic(out / "config.json", cc::to_json(c).dump(2) + "\n");
}

// Thread count never changes results, so it stays out of file metadata.
cc::Metadata meta_for(const cc::RunConfig& c) {
  cc::Json params = cc::to_json(c);
  params.erase("threads");
  return cc::standard_metadata(c.seed, params);
}

int cmd_derive(const cc::RunConfig& c, const fs::path& out) {
  cc::require(!c.data.manifest.empty(), cc::ErrorCode::ConfigInvalid, "derive needs a manifest (--manifest)");
  cc::ManifestOptions opts;
  opts.allow_unequal_length = c.data.allow_unequal_length;
  opts.min_length = c.data.min_length;
  const cc::StudyDataset ds = cc::load_dataset(c.data.manifest, opts);
  for (const auto& note : ds.notes) std::cerr << "dataset: " << note << "\n";
  cc::require(ds.panels.front().units() >= 2, cc::ErrorCode::ShapeMismatch, "connectivity needs at least two units");

  std::vector<cc::ConnectivityOutcome> results(ds.panels.size());
  cc::parallel_for(ds.panels.size(), c.threads, [&](std::size_t i) {
    results[i] = cc::derive_connectivity(ds.panels[i], c.pipeline().split, ds.table.subject_ids[i], c.use_splitting);
  });
  std::vector<cc::DroppedPair> dropped;
  const cc::OutcomePanel y = cc::assemble_outcomes(results, &dropped);
  std::vector<cc::DerivationIssue> issues;
  for (const auto& r : results) issues.insert(issues.end(), r.report.begin(), r.report.end());
  for (const auto& d : dropped)
    std::cerr << "dropped pair " << cc::to_string(d.pair) << " (missing for subject " << d.subject_id << ")\n";

  const cc::Metadata meta = meta_for(c);
  for (const auto& r : results) cc::write_file_atomic(out / "connectivity" / (r.subject_id + ".csv"), cc::connectivity_csv(r, meta));
  cc::write_file_atomic(out / "outcomes.csv", cc::outcomes_csv(y, ds.panels.front().unit_labels(), meta));
  cc::write_file_atomic(out / "covariates.csv", cc::covariates_csv(ds.table, c.data.treatment_column, meta));
  cc::write_file_atomic(out / "derivation_report.csv", cc::derivation_report_csv(issues, dropped, meta));
  echo_config(out, c);
  std::cerr << "derived " << y.components() << " pairs for " << y.subjects() << " subjects\n";
  return 0;
}

int cmd_estimate(const cc::RunConfig& c, const fs::path& out) {
  cc::require(!c.data.outcomes.empty() && !c.data.covariates.empty(), cc::ErrorCode::ConfigInvalid,
              "estimate needs --outcomes and --covariates");
  cc::OutcomePanel y = cc::read_outcomes(c.data.outcomes);
  const cc::CovariateTable table = cc::read_covariates(c.data.covariates, c.data.treatment_column);
  cc::require(y.subject_ids == table.subject_ids, cc::ErrorCode::AlignmentMismatch,
              "subject order differs between outcomes and covariates");

  // everything is computed before the first file is written
  const cc::PipelineConfig& p = c.pipeline();
  const cc::PropensityFit fit = cc::fit_propensity(table, p.link, p.propensity);
  const cc::EffectEstimates est = cc::estimate_effects(y, table, fit, p.variance_floor, c.variance_mode);
  cc::BootstrapConfig boot = p.bootstrap;
  boot.seed = c.seed;
  const cc::SimultaneousResult res = cc::stepdown_augment(est.tau_star, est.influence, est.variance, est.active_indices(), boot);

  const cc::Metadata meta = meta_for(c);
  cc::Json summary = cc::propensity_summary(fit, table);
  summary["causalconn"] = CAUSALCONN_VERSION;
  summary["seed"] = c.seed;
  const std::string effects = cc::effects_csv(est, meta);
  const std::string inference = cc::inference_csv(est, res, y.subjects(), meta);
  cc::write_file_atomic(out / "propensity.json", summary.dump(2) + "\n");
  cc::write_file_atomic(out / "effects.csv", effects);
  cc::write_file_atomic(out / "inference.csv", inference);
  echo_config(out, c);
  std::cerr << res.rejections.size() << " rejections (" << res.stepdown_rejections << " step-down) among "
            << res.active.size() << " active pairs\n";
  return 0;
}

int cmd_simulate(const cc::RunConfig& c, const fs::path& out) {
  const cc::DgpConfig& d = c.dgp();
  const cc::Dgp dgp = cc::build_dgp(d, 0);
  cc::StudyDataset ds;
  ds.table.values.resize(d.n, d.q());
  ds.table.treatment.resize(d.n);
  for (int k = 0; k < d.q(); ++k) ds.table.covariate_names.push_back("w" + std::to_string(k));
  ds.panels.resize(static_cast<std::size_t>(d.n));
  std::vector<cc::SubjectDraw> draws;
  for (int i = 0; i < d.n; ++i) {
    draws.push_back(cc::draw_subject(d, 0, static_cast<std::uint64_t>(i)));
    ds.table.values.row(i) = draws.back().w.transpose();
    ds.table.treatment(i) = draws.back().z;
    ds.table.subject_ids.push_back("s" + std::to_string(i));
  }
  cc::parallel_for(ds.panels.size(), c.threads, [&](std::size_t i) {
    ds.panels[i] = cc::simulate_subject(dgp, draws[i], 0, i);
  });
  const cc::Metadata meta = meta_for(c);
  cc::write_dataset(out, ds, c.data.treatment_column, meta);
  cc::CsvWriter truth(meta);
  truth.row({"source", "target"});
  for (const auto& t : dgp.truth) truth.row({std::to_string(t.source), std::to_string(t.target)});
  cc::write_file_atomic(out / "truth.csv", truth.str());
  echo_config(out, c);
  std::cerr << "wrote " << d.n << " subjects (" << ds.table.treated() << " treated)\n";
  return 0;
}

int cmd_experiment(const cc::RunConfig& c, const fs::path& out) {
  const cc::Metadata meta = meta_for(c);
  echo_config(out, c);
  std::string combined;
  {
    cc::CsvWriter w(meta);
    w.row(cc::metrics_header());
    combined = w.str();
  }
  for (const cc::Cell& cell : c.experiment.grid) {
    const fs::path cell_file = out / "cells" / (cell.label() + ".csv");
    if (!fs::exists(cell_file)) {
      std::cerr << "cell " << cell.label() << ": " << c.experiment.replications << " replications\n";
      const cc::CellResult r = cc::run_cell(c.experiment, cell);
      if (c.detail) cc::write_file_atomic(out / "details" / (cell.label() + ".csv"), cc::detail_csv(r.details, meta));
      cc::write_file_atomic(cell_file, cc::metrics_csv(r.reports, meta));
    } else {
      std::cerr << "cell " << cell.label() << ": already present, skipped\n";
    }
    const cc::CsvTable t = cc::read_csv(cell_file);
    cc::require(t.header == cc::metrics_header(), cc::ErrorCode::ParseError, cell_file.string() + ": unexpected header");
    cc::require(t.metadata.get("params") == meta.get("params"), cc::ErrorCode::ConfigInvalid,
                cell_file.string() + ": written with a different configuration; use a fresh --out");
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) combined += (i ? "," : "") + row[i];
      combined += "\n";
    }
  }
  cc::write_file_atomic(out / "metrics.csv", combined);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal effects of interventions on effective connectivity"};
  app.set_version_flag("--version", std::string(CAUSALCONN_VERSION));
  app.require_subcommand(1);
  Flags f;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Master seed");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--threads", f.threads, "Worker threads (default: $CAUSALCONN_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--preset", f.preset, "Experiment grid preset")->check(CLI::IsMember({"desk", "paper"}));
  };
  CLI::App* derive = app.add_subcommand("derive", "Derive per-subject connectivity from a dataset manifest");
  common(derive);
  derive->add_option("--manifest", f.manifest, "Dataset manifest (JSON)");
  derive->add_flag("--no-split", f.no_split, "Select and estimate on the same block");
  derive->add_flag("--allow-unequal-length", f.allow_unequal_length, "Accept subjects with different T");

  CLI::App* estimate = app.add_subcommand("estimate", "Estimate intervention effects with simultaneous inference");
  common(estimate);
  estimate->add_option("--outcomes", f.outcomes, "Outcome panel CSV from derive");
  estimate->add_option("--covariates", f.covariates, "Covariate table CSV");
  estimate->add_option("--treatment-column", f.treatment_column, "Treatment column name");
  estimate->add_option("--alpha", f.alpha, "Simultaneous level");

  CLI::App* simulate = app.add_subcommand("simulate", "Write a synthetic dataset");
  common(simulate);

  CLI::App* experiment = app.add_subcommand("experiment", "Run the Monte Carlo study");
  common(experiment);
  experiment->add_option("--replications", f.replications, "Replications per cell")->check(CLI::PositiveNumber);
  experiment->add_flag("--detail", f.detail, "Also write per-replication details");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const cc::RunConfig config = resolve(f);
    const fs::path out(f.out);
    if (derive->parsed()) return cmd_derive(config, out);
    if (estimate->parsed()) return cmd_estimate(config, out);
    if (simulate->parsed()) return cmd_simulate(config, out);
    return cmd_experiment(config, out);
  } catch (const cc::Error& e) {
    std::cerr << "error [" << cc::to_string(e.code()) << "]: " << e.what() << "\n";
    return cc::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 5;
  }
}
