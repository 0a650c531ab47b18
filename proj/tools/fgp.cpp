// fgp: simulate, fit, predict, benchmark and timing for fused Gaussian
// process models.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fgp/config.hpp"
#include "fgp/fgp.hpp"

namespace {

using namespace fgp;

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Options {
  std::string config, out, data, fit, locations;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool want_std = false;
  bool quick = false;
};

RunConfig config_for(const Options &o) {
  RunConfig cfg = o.config.empty() ? parse_config("{}") : load_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.scenario.seed = *o.seed;
    cfg.timing.seed = *o.seed;
  }
  if (o.workers) {
    cfg.workers = *o.workers;
  }
  return cfg;
}

int workers_of(const RunConfig &cfg) { return cfg.workers.value_or(default_workers()); }

void write_json(const std::string &path, const Json &j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + path + "'");
  }
  out << j.dump(2) << '\n';
}

SpatialModel model_for(const RunConfig &cfg, const DataTable &data) {
  const ScenarioConfig &sc = cfg.scenario;
  return build_model(sc.structure, data.locations, {sc.lo, sc.lo}, {sc.hi, sc.hi},
                     sc.noise_var);
}

int cmd_simulate(const Options &o) {
  const RunConfig cfg = config_for(o);
  const ScenarioData d = simulate_scenario(cfg.scenario, 0);
  DataTable t;
  const Index n = d.locations.rows();
  t.locations = d.locations;
  t.y_true = d.y;
  t.z = d.z;
  t.observed = d.observed;
  for (Index i = 0; i < n; ++i) {
    t.id.push_back(i);
  }
  write_data_csv(o.out, t,
                 {std::string("generator: ") + kRngName + " (libstdc++)",
                  "seed: " + std::to_string(cfg.seed),
                  "covariance: " + to_string(cfg.scenario.covariance.family) + " sigma2=" +
                      format_double(cfg.scenario.covariance.sigma2) +
                      " phi=" + format_double(cfg.scenario.covariance.phi),
                  "noise_var: " + format_double(cfg.scenario.noise_var)});
  std::cout << "wrote " << n << " locations (" << d.observed_idx.size() << " observed) to "
            << o.out << '\n';
  return kOk;
}

int cmd_fit(const Options &o) {
  const RunConfig cfg = config_for(o);
  const DataTable data = read_data_csv(o.data);
  const auto rows = data.observed_rows();
  const SpatialModel model = model_for(cfg, data);
  const Locations obs = select_rows(data.locations, rows);
  const Vector z = select_entries(data.z, rows);
  const FgpStructure st = model.structure(obs);
  if (static_cast<Index>(rows.size()) < st.p() + 1) {
    throw DataError("need at least " + std::to_string(st.p() + 1) + " observed rows");
  }
  const FitReport fit = fit_em(st, z, cfg.scenario.em);
  write_json(o.out, fit_report_json(fit, cfg.raw));
  std::cout << "iterations " << fit.iterations << (fit.converged ? " (converged)" : " (not converged)")
            << ", neg-log-likelihood " << format_double(fit.trace.back()) << '\n';
  return kOk;
}

int cmd_predict(const Options &o) {
  std::ifstream in(o.fit);
  if (!in) {
    throw IoError("cannot open fit report '" + o.fit + "'");
  }
  Json report;
  try {
    in >> report;
  } catch (const Json::exception &e) {
    throw DataError(o.fit + ": " + e.what());
  }
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = config_for(o);
  } else {
    cfg = parse_config(report.value("config", Json::object()).dump(), o.fit);
    if (o.workers) {
      cfg.workers = *o.workers;
    }
  }
  const DataTable data = read_data_csv(o.data);
  const auto rows = data.observed_rows();
  const SpatialModel model = model_for(cfg, data);
  const FgpStructure st = model.structure(select_rows(data.locations, rows));
  const FgpParams params = params_from_report(report, st.r());
  check_params(st, params);
  const FgpWorkspace ws(st, params);

  const auto [ids, locs] = read_locations_csv(o.locations);
  PredictionDesign design;
  try {
    design = model.design(locs);
  } catch (const LocationOutsideLattice &e) {
    throw DataError(o.locations + ": data row " + std::to_string(e.index() + 1) +
                    " (id " + std::to_string(ids[e.index()]) + ") is outside the lattice");
  }
  PredictionRequest req;
  req.want_std = o.want_std;
  req.batch_size = cfg.predict_batch;
  req.workers = workers_of(cfg);
  const PredictionResult res = predict(ws, params.beta, select_entries(data.z, rows), design, req);
  write_predictions_csv(o.out, ids, locs, res.mean, res.std);
  std::cout << "wrote " << locs.rows() << " predictions to " << o.out << '\n';
  return kOk;
}

int cmd_benchmark(const Options &o) {
  RunConfig cfg = config_for(o);
  if (o.quick) {
    cfg.scenario.replicates = 2;
  }
  const BenchResult res = run_scenario(cfg.scenario, workers_of(cfg));
  std::ofstream out(o.out, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + o.out + "'");
  }
  out << "method,ave_mspe,std_mspe,rel_efficiency\n";
  for (const auto &m : res.methods) {
    out << m.name << ',' << format_double(m.ave) << ',' << format_double(m.std) << ','
        << format_double(m.rel_efficiency) << '\n';
  }
  std::ofstream log(o.out + ".log", std::ios::binary);
  log << "seed " << cfg.seed << '\n'
      << "replicates " << res.replicates << '\n'
      << "failed " << res.failures.size() << '\n';
  for (const auto &f : res.failures) {
    log << f << '\n';
  }
  for (const auto &m : res.methods) {
    std::cout << m.name << "  ave " << format_double(m.ave) << "  std " << format_double(m.std)
              << "  rel " << format_double(m.rel_efficiency) << '\n';
  }
  if (!res.failures.empty()) {
    std::cerr << res.failures.size() << " replicate(s) failed; see " << o.out << ".log\n";
  }
  return kOk;
}

int cmd_timing(const Options &o) {
  RunConfig cfg = config_for(o);
  if (o.quick) {
    cfg.timing.sizes = {5000, 20000};
  }
  const auto rows = timing_benchmark(cfg.timing, workers_of(cfg));
  std::ofstream out(o.out, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + o.out + "'");
  }
  out << "M,J,seconds\n";
  for (const auto &r : rows) {
    out << r.M << ',' << r.J << ',' << (r.out_of_memory ? std::string("OOM") : format_double(r.seconds))
        << '\n';
    std::cout << "M=" << r.M << " J=" << r.J << "  "
              << (r.out_of_memory ? std::string("OOM") : format_double(r.seconds) + " s") << '\n';
  }
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Fused Gaussian process models for large spatial data"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App *cmd, bool needs_config) {
    auto *c = cmd->add_option("--config", o.config, "JSON configuration file");
    if (needs_config) {
      c->required();
    }
    c->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output file")->required();
    cmd->add_option("--workers", o.workers, "worker threads (default: all cores)")
        ->check(CLI::PositiveNumber);
  };

  auto *sim = app.add_subcommand("simulate", "simulate one scenario dataset");
  common(sim, false);
  sim->add_option("--seed", o.seed, "random seed (overrides the config)");

  auto *fit = app.add_subcommand("fit", "fit an FGP model by EM");
  common(fit, false);
  fit->add_option("--data", o.data, "data CSV")->required();

  auto *pred = app.add_subcommand("predict", "predict at new locations");
  common(pred, false);
  pred->add_option("--data", o.data, "data CSV used for the fit")->required();
  pred->add_option("--fit", o.fit, "fit report")->required();
  pred->add_option("--locations", o.locations, "CSV with id,coord1[,coord2]")->required();
  pred->add_flag("--std", o.want_std, "also write prediction standard errors");

  auto *bench = app.add_subcommand("benchmark", "MSPE comparison over replicates");
  common(bench, false);
  bench->add_option("--seed", o.seed, "random seed (overrides the config)");
  bench->add_flag("--quick", o.quick, "two replicates only");

  auto *timing = app.add_subcommand("timing", "likelihood evaluation time by lattice size");
  common(timing, false);
  timing->add_option("--seed", o.seed, "random seed (overrides the config)");
  timing->add_flag("--quick", o.quick, "small sizes only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) {
      return cmd_simulate(o);
    }
    if (*fit) {
      return cmd_fit(o);
    }
    if (*pred) {
      return cmd_predict(o);
    }
    if (*bench) {
      return cmd_benchmark(o);
    }
    return cmd_timing(o);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError &e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::bad_alloc &) {
    std::cerr << "out of memory\n";
    return kNumerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}
