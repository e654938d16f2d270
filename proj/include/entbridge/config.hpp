#pragma once

// Experiment configuration: JSON in, assembled spaces/marginals out.
// Field names here are the configuration contract of the CLI.

#include "entbridge/diagnostics.hpp"
#include "entbridge/marginals.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>

namespace entbridge {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  Grid1D grid;
  bool tail_override = false;
  Potential potential;
  MarginalSpec marginal0, marginal1;
  std::vector<double> epsilons;  // one or more, decreasing for sweeps
  std::vector<double> times;     // uniform grid unless given explicitly
  double ipfp_tol = 1e-10;
  int ipfp_max_iter = 100000;
  double report_tol = 1e-3;
  std::string out_dir = "out";
  bool csv = true;
  bool json_out = true;
  std::optional<double> kappa_override;
  int jobs = 1;
};

namespace detail {

template <typename T>
T require(const json& j, const std::string& where, const std::string& key) {
  if (!j.contains(key))
    throw ConfigError("config: missing field " + where + "." + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field " + where + "." + key + " has the wrong type");
  }
}

inline MarginalSpec parse_marginal(const json& j, const std::string& where) {
  const std::string type = require<std::string>(j, where, "type");
  if (type == "gaussian")
    return MarginalSpec::gaussian(require<double>(j, where, "mean"),
                                  require<double>(j, where, "std"));
  if (type == "bump")
    return MarginalSpec::bump(require<double>(j, where, "center"),
                              require<double>(j, where, "width"));
  if (type == "uniform") {
    const auto support = require<std::vector<double>>(j, where, "support");
    if (support.size() != 2)
      throw ConfigError("config: " + where + ".support must be [lo, hi]");
    return MarginalSpec::uniform(support[0], support[1]);
  }
  if (type == "mixture") {
    if (!j.contains("components") || !j.at("components").is_array())
      throw ConfigError("config: missing field " + where + ".components");
    std::vector<MarginalSpec> comps;
    int k = 0;
    for (const auto& c : j.at("components"))
      comps.push_back(parse_marginal(c, where + ".components[" + std::to_string(k++) + "]"));
    const auto weights = require<std::vector<double>>(j, where, "weights");
    return MarginalSpec::mixture(std::move(comps), weights);
  }
  throw ConfigError("config: unknown marginal type '" + type + "' at " + where);
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;

  if (!j.contains("grid")) throw ConfigError("config: missing field grid");
  const json& g = j.at("grid");
  const double a = detail::require<double>(g, "grid", "a");
  const double b = detail::require<double>(g, "grid", "b");
  const int n = detail::require<int>(g, "grid", "n");
  std::string boundary = g.value("boundary", std::string("reflecting"));
  if (n < 3) throw ConfigError("config: grid.n must be at least 3");
  if (boundary == "reflecting")
    cfg.grid = Grid1D::reflecting(a, b, n);
  else if (boundary == "periodic")
    cfg.grid = Grid1D::periodic(a, b, n);
  else
    throw ConfigError("config: grid.boundary must be 'reflecting' or 'periodic'");
  cfg.tail_override = g.value("tail_override", false);

  if (!j.contains("potential")) throw ConfigError("config: missing field potential");
  const json& p = j.at("potential");
  const std::string kind = detail::require<std::string>(p, "potential", "kind");
  if (kind == "quadratic")
    cfg.potential = Potential::quadratic(detail::require<double>(p, "potential", "kappa0"));
  else if (kind == "double_well")
    cfg.potential = Potential::double_well(detail::require<double>(p, "potential", "alpha"),
                                           detail::require<double>(p, "potential", "beta"));
  else if (kind == "polynomial")
    cfg.potential =
        Potential::polynomial(detail::require<std::vector<double>>(p, "potential", "coeffs"));
  else if (kind == "tabulated")
    cfg.potential =
        Potential::tabulated(detail::require<std::vector<double>>(p, "potential", "values"));
  else
    throw ConfigError("config: unknown potential.kind '" + kind + "'");

  if (!j.contains("marginals") || !j.at("marginals").is_array() || j.at("marginals").size() != 2)
    throw ConfigError("config: marginals must be an array of exactly two specs");
  cfg.marginal0 = detail::parse_marginal(j.at("marginals")[0], "marginals[0]");
  cfg.marginal1 = detail::parse_marginal(j.at("marginals")[1], "marginals[1]");

  if (!j.contains("epsilon")) throw ConfigError("config: missing field epsilon");
  if (j.at("epsilon").is_number())
    cfg.epsilons = {j.at("epsilon").get<double>()};
  else if (j.at("epsilon").is_array())
    cfg.epsilons = j.at("epsilon").get<std::vector<double>>();
  else
    throw ConfigError("config: epsilon must be a number or an array");
  if (cfg.epsilons.empty()) throw ConfigError("config: epsilon list is empty");
  for (double e : cfg.epsilons)
    if (!(e > 0)) throw ConfigError("config: epsilon values must be positive");

  if (j.contains("times")) {
    if (j.at("times").is_number_integer()) {
      const int count = j.at("times").get<int>();
      if (count < 3) throw ConfigError("config: times count must be at least 3");
      cfg.times.resize(count);
      for (int k = 0; k < count; ++k) cfg.times[k] = double(k) / (count - 1);
    } else if (j.at("times").is_array()) {
      cfg.times = j.at("times").get<std::vector<double>>();
      if (cfg.times.size() < 3) throw ConfigError("config: need at least 3 time nodes");
    } else {
      throw ConfigError("config: times must be an integer count or an array");
    }
  } else {
    cfg.times.resize(65);
    for (int k = 0; k < 65; ++k) cfg.times[k] = k / 64.0;
  }

  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    cfg.ipfp_tol = t.value("ipfp_tol", cfg.ipfp_tol);
    cfg.ipfp_max_iter = t.value("ipfp_max_iter", cfg.ipfp_max_iter);
    cfg.report_tol = t.value("report_tol", cfg.report_tol);
  }
  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    cfg.out_dir = o.value("dir", cfg.out_dir);
    if (o.contains("formats")) {
      cfg.csv = false;
      cfg.json_out = false;
      for (const auto& f : o.at("formats")) {
        const std::string name = f.get<std::string>();
        if (name == "csv") cfg.csv = true;
        else if (name == "json") cfg.json_out = true;
        else throw ConfigError("config: outputs.formats entries must be 'csv' or 'json'");
      }
    }
  }
  if (j.contains("kappa_override")) {
    if (!j.at("kappa_override").is_null())
      cfg.kappa_override = j.at("kappa_override").get<double>();
  }
  cfg.jobs = j.value("jobs", 1);
  if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return parse_config(j);
}

struct Experiment {
  ExperimentConfig cfg;
  Space space;
  DensityField rho0, rho1;
  double kappa = 0.0;  // measure kappa unless overridden
};

inline Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment ex{cfg, {}, {}, {}, 0.0};
  MeasureOptions opt;
  opt.tail_override = cfg.tail_override;
  try {
    ex.space = make_space(cfg.grid, cfg.potential, opt);
    ex.rho0 = build_density(cfg.marginal0, ex.space.grid, ex.space.measure);
    ex.rho1 = build_density(cfg.marginal1, ex.space.grid, ex.space.measure);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ex.kappa = cfg.kappa_override.value_or(ex.space.measure.kappa);
  return ex;
}

}  // namespace entbridge
