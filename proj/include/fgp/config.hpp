#ifndef FGP_CONFIG_HPP_
#define FGP_CONFIG_HPP_

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgp/bench.hpp"
#include "fgp/em.hpp"
#include "fgp/error.hpp"
#include "fgp/timing.hpp"

namespace fgp {

using Json = nlohmann::json;

/// Everything a CLI run can be configured with. Every section is optional
/// and defaults to the 1-D exponential scenario.
struct RunConfig {
  std::uint64_t seed = 1;
  std::optional<int> workers;
  ScenarioConfig scenario;
  TimingConfig timing;
  Index predict_batch = 256;
  Json raw = Json::object();
};

namespace config_detail {

inline std::string join(const std::string &path, const std::string &key) {
  return path.empty() ? key : path + "." + key;
}

inline void allow_only(const Json &obj, const std::string &path,
                       std::initializer_list<const char *> keys) {
  if (!obj.is_object()) {
    throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) +
                      "' must be an object");
  }
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto &item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown key '" + join(path, item.key()) + "'");
    }
  }
}

template <typename T>
void read(const Json &obj, const std::string &path, const char *key, T &out) {
  if (!obj.contains(key)) {
    return;
  }
  try {
    out = obj.at(key).get<T>();
  } catch (const Json::exception &) {
    throw ConfigError("key '" + join(path, key) + "' has the wrong type");
  }
}

inline void read_domain(const Json &obj, const std::string &path, double &lo, double &hi) {
  if (!obj.contains("domain")) {
    return;
  }
  std::vector<double> d;
  read(obj, path, "domain", d);
  if (d.size() != 2 || !(d[1] > d[0])) {
    throw ConfigError("'" + join(path, "domain") + "' must be [lo, hi] with hi > lo");
  }
  lo = d[0];
  hi = d[1];
}

inline void read_grid(const Json &obj, const std::string &path, std::array<Index, 2> &grid) {
  if (!obj.contains("grid")) {
    return;
  }
  std::vector<Index> g;
  read(obj, path, "grid", g);
  if (g.size() != 2 || g[0] < 1 || g[1] < 1) {
    throw ConfigError("'" + join(path, "grid") + "' must be [nx, ny] with positive entries");
  }
  grid = {g[0], g[1]};
}

inline void parse_structure(const Json &obj, StructureConfig &s) {
  const std::string path = "structure";
  allow_only(obj, path,
             {"basis_levels", "basis_levels_2d", "use_basis", "use_lattice", "proximity",
              "threshold", "trend", "blocks", "grid"});
  read(obj, path, "basis_levels", s.basis_levels);
  if (obj.contains("basis_levels_2d")) {
    std::vector<std::vector<int>> levels;
    read(obj, path, "basis_levels_2d", levels);
    s.basis_levels_2d.clear();
    for (const auto &l : levels) {
      if (l.size() != 2) {
        throw ConfigError("'structure.basis_levels_2d' entries must be [nx, ny]");
      }
      s.basis_levels_2d.push_back({l[0], l[1]});
    }
  }
  read(obj, path, "use_basis", s.use_basis);
  read(obj, path, "use_lattice", s.use_lattice);
  std::string proximity = s.proximity == ProximityRule::Threshold ? "threshold" : "first_order";
  read(obj, path, "proximity", proximity);
  if (proximity == "threshold") {
    s.proximity = ProximityRule::Threshold;
  } else if (proximity == "first_order") {
    s.proximity = ProximityRule::FirstOrder;
  } else {
    throw ConfigError("'structure.proximity' must be \"threshold\" or \"first_order\"");
  }
  read(obj, path, "threshold", s.threshold);
  std::string trend = "constant";
  read(obj, path, "trend", trend);
  if (trend == "none") {
    s.trend = Trend::None;
  } else if (trend == "constant") {
    s.trend = Trend::Constant;
  } else if (trend == "linear") {
    s.trend = Trend::Linear;
  } else {
    throw ConfigError("'structure.trend' must be \"none\", \"constant\" or \"linear\"");
  }
  read(obj, path, "blocks", s.blocks);
  read_grid(obj, path, s.grid);
  for (const int c : s.basis_levels) {
    if (c < 1) {
      throw ConfigError("'structure.basis_levels' entries must be positive");
    }
  }
  if (s.proximity == ProximityRule::Threshold && !(s.threshold > 0.0)) {
    throw ConfigError("'structure.threshold' must be positive");
  }
  if (s.blocks < 1) {
    throw ConfigError("'structure.blocks' must be positive");
  }
}

inline void parse_scenario(const Json &obj, ScenarioConfig &sc) {
  const std::string path = "scenario";
  allow_only(obj, path,
             {"dimension", "domain", "M", "grid", "holdout_fraction", "noise_var", "covariance",
              "replicates", "methods", "mspe_target"});
  read(obj, path, "dimension", sc.dimension);
  read_domain(obj, path, sc.lo, sc.hi);
  read(obj, path, "M", sc.M);
  read_grid(obj, path, sc.grid);
  read(obj, path, "holdout_fraction", sc.holdout_fraction);
  read(obj, path, "noise_var", sc.noise_var);
  read(obj, path, "replicates", sc.replicates);
  read(obj, path, "methods", sc.methods);
  if (obj.contains("mspe_target")) {
    std::string target;
    read(obj, path, "mspe_target", target);
    if (target != "observation" && target != "latent") {
      throw ConfigError("'scenario.mspe_target' must be \"observation\" or \"latent\"");
    }
    sc.score_observations = target == "observation";
  }
  if (obj.contains("covariance")) {
    const Json &c = obj.at("covariance");
    allow_only(c, "scenario.covariance", {"family", "sigma2", "phi"});
    std::string family = to_string(sc.covariance.family);
    read(c, "scenario.covariance", "family", family);
    if (family == "exponential") {
      sc.covariance.family = CovFamily::Exponential;
    } else if (family == "sinusoidal") {
      sc.covariance.family = CovFamily::Sinusoidal;
    } else {
      throw ConfigError("'scenario.covariance.family' must be \"exponential\" or \"sinusoidal\"");
    }
    read(c, "scenario.covariance", "sigma2", sc.covariance.sigma2);
    read(c, "scenario.covariance", "phi", sc.covariance.phi);
  }
}

inline void parse_em(const Json &obj, EmConfig &em) {
  allow_only(obj, "em", {"max_iters", "zeta", "inner_evals"});
  read(obj, "em", "max_iters", em.max_iters);
  read(obj, "em", "zeta", em.zeta);
  read(obj, "em", "inner_evals", em.inner_evals);
}

inline void parse_timing(const Json &obj, TimingConfig &t) {
  const std::string path = "timing";
  allow_only(obj, path,
             {"sizes", "blocks", "domain", "basis_levels", "tau2", "gamma_fraction", "noise_var",
              "repeats"});
  read(obj, path, "sizes", t.sizes);
  read(obj, path, "blocks", t.blocks);
  read_domain(obj, path, t.lo, t.hi);
  read(obj, path, "basis_levels", t.basis_levels);
  read(obj, path, "tau2", t.tau2);
  read(obj, path, "gamma_fraction", t.gamma_fraction);
  read(obj, path, "noise_var", t.noise_var);
  read(obj, path, "repeats", t.repeats);
}

} // namespace config_detail

/// Parses and validates a JSON configuration. Unknown keys and type errors
/// raise ConfigError naming the key; syntax errors report line and column.
inline RunConfig parse_config(const std::string &text, const std::string &origin = "config") {
  using namespace config_detail;
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error &e) {
    throw ConfigError(origin + ": " + e.what());
  }
  allow_only(root, "", {"seed", "workers", "scenario", "structure", "em", "predict", "timing"});
  RunConfig cfg;
  cfg.raw = root;
  read(root, "", "seed", cfg.seed);
  if (root.contains("workers")) {
    int w = 0;
    read(root, "", "workers", w);
    if (w < 1) {
      throw ConfigError("'workers' must be positive");
    }
    cfg.workers = w;
  }
  if (root.contains("scenario")) {
    parse_scenario(root.at("scenario"), cfg.scenario);
  }
  if (root.contains("structure")) {
    parse_structure(root.at("structure"), cfg.scenario.structure);
  }
  if (root.contains("em")) {
    parse_em(root.at("em"), cfg.scenario.em);
  }
  if (root.contains("predict")) {
    allow_only(root.at("predict"), "predict", {"batch_size"});
    read(root.at("predict"), "predict", "batch_size", cfg.predict_batch);
    if (cfg.predict_batch < 1) {
      throw ConfigError("'predict.batch_size' must be positive");
    }
  }
  if (root.contains("timing")) {
    parse_timing(root.at("timing"), cfg.timing);
  }
  cfg.scenario.seed = cfg.seed;
  cfg.timing.seed = cfg.seed;
  if (cfg.scenario.structure.grid[0] == 0 && cfg.scenario.dimension == 2) {
    cfg.scenario.structure.grid = cfg.scenario.grid;
  }
  cfg.scenario.validate();
  cfg.timing.validate();
  return cfg;
}

inline RunConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

/// Fit report as JSON. K is omitted when the model has no low-rank term.
inline Json fit_report_json(const FitReport &fit, const Json &config) {
  Json j;
  j["beta"] = std::vector<double>(fit.params.beta.data(),
                                  fit.params.beta.data() + fit.params.beta.size());
  if (fit.params.K.rows() > 0) {
    Json k = Json::array();
    for (Index i = 0; i < fit.params.K.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(fit.params.K.cols()));
      for (Index c = 0; c < fit.params.K.cols(); ++c) {
        row[static_cast<std::size_t>(c)] = fit.params.K(i, c);
      }
      k.push_back(row);
    }
    j["K"] = k;
  }
  j["tau2"] = fit.params.tau2;
  j["gamma"] = fit.params.gamma;
  j["trace"] = fit.trace;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["seconds"] = fit.seconds;
  j["config"] = config;
  return j;
}

/// Parameters from a fit report; r is the expected low-rank dimension.
inline FgpParams params_from_report(const Json &j, Index r) {
  FgpParams p;
  try {
    const auto beta = j.at("beta").get<std::vector<double>>();
    p.beta = Eigen::Map<const Vector>(beta.data(), static_cast<Index>(beta.size()));
    p.tau2 = j.at("tau2").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.K = Matrix(r, r);
    if (r > 0) {
      const auto k = j.at("K").get<std::vector<std::vector<double>>>();
      if (static_cast<Index>(k.size()) != r) {
        throw DimensionMismatch("fit report K has the wrong size");
      }
      for (Index i = 0; i < r; ++i) {
        if (static_cast<Index>(k[i].size()) != r) {
          throw DimensionMismatch("fit report K has the wrong size");
        }
        for (Index c = 0; c < r; ++c) {
          p.K(i, c) = k[i][c];
        }
      }
    }
  } catch (const Json::exception &e) {
    throw DataError(std::string("malformed fit report: ") + e.what());
  }
  return p;
}

} // namespace fgp

#endif // FGP_CONFIG_HPP_
