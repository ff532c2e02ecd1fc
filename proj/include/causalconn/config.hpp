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

// Run configuration as JSON. Every key is optional; unknown keys are an
// error. to_json always writes the fully resolved tree, which is what gets
// echoed next to outputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalconn/connectivity.hpp"
#include "causalconn/effects.hpp"
#include "causalconn/error.hpp"
#include "causalconn/experiment.hpp"
#include "causalconn/propensity.hpp"
#include "causalconn/simultaneous.hpp"

namespace causalconn {

using Json = nlohmann::json;

struct DataConfig {
  std::string manifest;
  std::string outcomes;
  std::string covariates;
  std::string treatment_column = "treatment";
  bool allow_unequal_length = false;
  long min_length = 0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string preset;  // "", "desk" or "paper"
  bool use_splitting = true;
  bool detail = false;
  VarianceMode variance_mode = VarianceMode::Corrected;
  ExperimentConfig experiment = desk_preset();
  DataConfig data;

  PipelineConfig& pipeline() { return experiment.pipeline; }
  const PipelineConfig& pipeline() const { return experiment.pipeline; }
  DgpConfig& dgp() { return experiment.dgp; }
  const DgpConfig& dgp() const { return experiment.dgp; }
};

namespace detail {

inline void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  require(j.is_object(), ErrorCode::ConfigInvalid, where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    require(ok.contains(key), ErrorCode::ConfigInvalid, "unknown key '" + key + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::ConfigInvalid, where + "." + key + " has the wrong type");
  }
}

inline std::string criterion_name(SelectionCriterion c) { return c == SelectionCriterion::BIC ? "bic" : "aic"; }
inline std::string screening_name(ScreeningRule r) {
  return r == ScreeningRule::CrossCorrelation ? "cross_correlation" : "partial_correlation";
}

}  // namespace detail

inline ExperimentConfig preset_config(const std::string& name) {
  if (name.empty() || name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  fail(ErrorCode::ConfigInvalid, "unknown preset '" + name + "'");
}

inline Json to_json(const RunConfig& c) {
  const PipelineConfig& p = c.pipeline();
  const DgpConfig& d = c.dgp();
  Json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["preset"] = c.preset;
  j["use_splitting"] = c.use_splitting;
  j["detail"] = c.detail;
  Json split;
  split["split_fraction"] = p.split.split_fraction;
  split["max_order"] = p.split.max_order;
  split["max_conditioning"] = p.split.max_conditioning ? Json(*p.split.max_conditioning) : Json(nullptr);
  split["criterion"] = detail::criterion_name(p.split.selection_criterion);
  split["screening"] = detail::screening_name(p.split.screening_rule);
  j["split"] = split;
  j["bootstrap"] = {{"replications", p.bootstrap.replications},
                    {"alpha", p.bootstrap.alpha},
                    {"fdp_threshold", p.bootstrap.fdp_threshold},
                    {"reuse_multipliers", p.bootstrap.reuse_multipliers}};
  j["propensity"] = {{"link", to_string(p.link)},
                     {"tolerance", p.propensity.tolerance},
                     {"max_iterations", p.propensity.max_iterations},
                     {"separation_guard", p.propensity.separation_guard},
                     {"trim", p.propensity.trim}};
  j["effects"] = {{"variance_floor", p.variance_floor},
                  {"variance_mode", c.variance_mode == VarianceMode::Corrected ? "corrected" : "known_propensity"}};
  std::vector<double> beta(d.beta_true.data(), d.beta_true.data() + d.beta_true.size());
  j["dgp"] = {{"n", d.n},
              {"p", d.p},
              {"T", d.T},
              {"beta", beta},
              {"delta", d.delta},
              {"diag_range", {d.diag_low, d.diag_high}},
              {"offdiag_range", {d.offdiag_low, d.offdiag_high}},
              {"offdiag_density", d.offdiag_density},
              {"covariate_effect_scale", d.covariate_effect_scale},
              {"activated_per_block", d.activated_per_block},
              {"target_spectral_radius", d.target_spectral_radius},
              {"burn_in", d.burn_in}};
  Json grid = Json::array();
  for (const Cell& cell : c.experiment.grid) grid.push_back({{"delta", cell.delta}, {"n", cell.n}, {"p", cell.p}});
  Json methods = Json::array();
  for (const MethodSpec& m : c.experiment.methods) methods.push_back(m.name());
  j["experiment"] = {{"replications", c.experiment.replications}, {"grid", grid}, {"methods", methods}};
  j["data"] = {{"manifest", c.data.manifest},
               {"outcomes", c.data.outcomes},
               {"covariates", c.data.covariates},
               {"treatment_column", c.data.treatment_column},
               {"allow_unequal_length", c.data.allow_unequal_length},
               {"min_length", c.data.min_length}};
  return j;
}

/// Applies the keys present in `j` on top of `c`.
inline void apply_json(const Json& j, RunConfig& c) {
  using detail::read;
  detail::check_keys(j, "config",
                     {"seed", "threads", "preset", "use_splitting", "detail", "split", "bootstrap", "propensity",
                      "effects", "dgp", "experiment", "data"});
  if (j.contains("preset")) {
    read(j, "preset", c.preset, "config");
    const ExperimentConfig preset = preset_config(c.preset);
    c.experiment.grid = preset.grid;
    c.experiment.replications = preset.replications;
  }
  read(j, "seed", c.seed, "config");
  read(j, "threads", c.threads, "config");
  read(j, "use_splitting", c.use_splitting, "config");
  read(j, "detail", c.detail, "config");
  PipelineConfig& p = c.pipeline();
  if (j.contains("split")) {
    const Json& s = j["split"];
    detail::check_keys(s, "split", {"split_fraction", "max_order", "max_conditioning", "criterion", "screening"});
    read(s, "split_fraction", p.split.split_fraction, "split");
    read(s, "max_order", p.split.max_order, "split");
    if (s.contains("max_conditioning")) {
      if (s["max_conditioning"].is_null()) {
        p.split.max_conditioning.reset();
      } else {
        int v = 0;
        read(s, "max_conditioning", v, "split");
        p.split.max_conditioning = v;
      }
    }
    if (s.contains("criterion")) {
      std::string v;
      read(s, "criterion", v, "split");
      require(v == "bic" || v == "aic", ErrorCode::ConfigInvalid, "split.criterion must be bic or aic");
      p.split.selection_criterion = v == "bic" ? SelectionCriterion::BIC : SelectionCriterion::AIC;
    }
    if (s.contains("screening")) {
      std::string v;
      read(s, "screening", v, "split");
      require(v == "cross_correlation" || v == "partial_correlation", ErrorCode::ConfigInvalid,
              "split.screening must be cross_correlation or partial_correlation");
      p.split.screening_rule = v == "cross_correlation" ? ScreeningRule::CrossCorrelation : ScreeningRule::PartialCorrelation;
    }
  }
  if (j.contains("bootstrap")) {
    const Json& b = j["bootstrap"];
    detail::check_keys(b, "bootstrap", {"replications", "alpha", "fdp_threshold", "reuse_multipliers"});
    read(b, "replications", p.bootstrap.replications, "bootstrap");
    read(b, "alpha", p.bootstrap.alpha, "bootstrap");
    read(b, "fdp_threshold", p.bootstrap.fdp_threshold, "bootstrap");
    read(b, "reuse_multipliers", p.bootstrap.reuse_multipliers, "bootstrap");
  }
  if (j.contains("propensity")) {
    const Json& q = j["propensity"];
    detail::check_keys(q, "propensity", {"link", "tolerance", "max_iterations", "separation_guard", "trim"});
    if (q.contains("link")) {
      std::string v;
      read(q, "link", v, "propensity");
      p.link = parse_link(v);
    }
    read(q, "tolerance", p.propensity.tolerance, "propensity");
    read(q, "max_iterations", p.propensity.max_iterations, "propensity");
    read(q, "separation_guard", p.propensity.separation_guard, "propensity");
    read(q, "trim", p.propensity.trim, "propensity");
  }
  if (j.contains("effects")) {
    const Json& e = j["effects"];
    detail::check_keys(e, "effects", {"variance_floor", "variance_mode"});
    read(e, "variance_floor", p.variance_floor, "effects");
    if (e.contains("variance_mode")) {
      std::string v;
      read(e, "variance_mode", v, "effects");
      require(v == "corrected" || v == "known_propensity", ErrorCode::ConfigInvalid,
              "effects.variance_mode must be corrected or known_propensity");
      c.variance_mode = v == "corrected" ? VarianceMode::Corrected : VarianceMode::KnownPropensity;
    }
  }
  if (j.contains("dgp")) {
    const Json& g = j["dgp"];
    DgpConfig& d = c.dgp();
    detail::check_keys(g, "dgp",
                       {"n", "p", "T", "beta", "delta", "diag_range", "offdiag_range", "offdiag_density",
                        "covariate_effect_scale", "activated_per_block", "target_spectral_radius", "burn_in"});
    read(g, "n", d.n, "dgp");
    read(g, "p", d.p, "dgp");
    read(g, "T", d.T, "dgp");
    if (g.contains("beta")) {
      std::vector<double> beta;
      read(g, "beta", beta, "dgp");
      d.beta_true = Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    }
    read(g, "delta", d.delta, "dgp");
    const auto range = [&](const char* key, double& lo, double& hi) {
      if (!g.contains(key)) return;
      std::vector<double> v;
      read(g, key, v, "dgp");
      require(v.size() == 2, ErrorCode::ConfigInvalid, std::string("dgp.") + key + " needs two values");
      lo = v[0];
      hi = v[1];
    };
    range("diag_range", d.diag_low, d.diag_high);
    range("offdiag_range", d.offdiag_low, d.offdiag_high);
    read(g, "offdiag_density", d.offdiag_density, "dgp");
    read(g, "covariate_effect_scale", d.covariate_effect_scale, "dgp");
    read(g, "activated_per_block", d.activated_per_block, "dgp");
    read(g, "target_spectral_radius", d.target_spectral_radius, "dgp");
    read(g, "burn_in", d.burn_in, "dgp");
  }
  if (j.contains("experiment")) {
    const Json& e = j["experiment"];
    detail::check_keys(e, "experiment", {"replications", "grid", "methods"});
    read(e, "replications", c.experiment.replications, "experiment");
    if (e.contains("grid")) {
      require(e["grid"].is_array(), ErrorCode::ConfigInvalid, "experiment.grid must be an array");
      c.experiment.grid.clear();
      for (const Json& cell : e["grid"]) {
        detail::check_keys(cell, "experiment.grid[]", {"delta", "n", "p"});
        Cell x;
        read(cell, "delta", x.delta, "experiment.grid[]");
        read(cell, "n", x.n, "experiment.grid[]");
        read(cell, "p", x.p, "experiment.grid[]");
        c.experiment.grid.push_back(x);
      }
    }
    if (e.contains("methods")) {
      std::vector<std::string> names;
      read(e, "methods", names, "experiment");
      c.experiment.methods.clear();
      for (const auto& name : names) c.experiment.methods.push_back(parse_method(name));
    }
  }
  if (j.contains("data")) {
    const Json& d = j["data"];
    detail::check_keys(d, "data",
                       {"manifest", "outcomes", "covariates", "treatment_column", "allow_unequal_length", "min_length"});
    read(d, "manifest", c.data.manifest, "data");
    read(d, "outcomes", c.data.outcomes, "data");
    read(d, "covariates", c.data.covariates, "data");
    read(d, "treatment_column", c.data.treatment_column, "data");
    read(d, "allow_unequal_length", c.data.allow_unequal_length, "data");
    read(d, "min_length", c.data.min_length, "data");
  }
}

/// Reads a config file on top of `base`.
inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::ConfigInvalid, path.string() + ": cannot open config");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  apply_json(j, base);
  return base;
}

/// Checks everything a command could consume.
inline void validate(const RunConfig& c) {
  require(c.threads >= 1, ErrorCode::ConfigInvalid, "threads must be at least 1");
  validate_split_config(c.pipeline().split);
  c.pipeline().bootstrap.validate();
  require(c.pipeline().variance_floor >= 0.0, ErrorCode::ConfigInvalid, "variance floor must be nonnegative");
  require(c.pipeline().propensity.trim >= 0.0 && c.pipeline().propensity.trim < 0.5, ErrorCode::ConfigInvalid,
          "trim must lie in [0, 0.5)");
  require(c.pipeline().propensity.max_iterations >= 1, ErrorCode::ConfigInvalid, "max_iterations must be positive");
  c.dgp().validate();
  c.experiment.validate();
}

}  // namespace causalconn
