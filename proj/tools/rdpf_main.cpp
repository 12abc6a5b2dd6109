// Command-line driver: single solves or (s1, s2) sweeps over the
// rate-distortion-perception surface, with optional grid-oracle comparison
// and spectral convergence diagnostics. Emits CSV or JSON curve data.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rdpf/sweep.hpp"

namespace {

struct CliArgs {
  std::optional<std::string> source;
  std::optional<std::string> distortion;
  std::optional<std::string> divergence;
  std::optional<std::string> s1;
  std::optional<std::string> s1_grid;
  std::optional<std::string> s2;
  std::optional<std::string> s2_grid;
  std::optional<double> eps;
  std::optional<std::size_t> max_iters;
  std::optional<double> q_floor;
  std::optional<std::string> mode;
  std::optional<std::string> units;
  std::optional<std::string> perception_units;
  bool oracle = false;
  std::optional<double> oracle_step;
  bool spectral = false;
  std::optional<std::string> q0;
  std::optional<unsigned> threads;
  std::optional<std::string> output;
  std::optional<std::string> format;
  std::optional<std::string> config_path;
};

rdpf::RunConfig merge(const CliArgs& args) {
  rdpf::RunConfig config;
  if (args.config_path) config = rdpf::load_config_file(*args.config_path);
  if (args.source) config.source = rdpf::parse_number_list(*args.source);
  if (args.distortion) config.distortion = *args.distortion;
  if (args.divergence) config.divergence = *args.divergence;
  if (args.s1) config.s1_grid = rdpf::parse_grid(*args.s1);
  if (args.s1_grid) config.s1_grid = rdpf::parse_grid(*args.s1_grid);
  if (args.s2) config.s2_grid = rdpf::parse_grid(*args.s2);
  if (args.s2_grid) config.s2_grid = rdpf::parse_grid(*args.s2_grid);
  if (args.eps) config.epsilon = *args.eps;
  if (args.max_iters) config.max_iters = *args.max_iters;
  if (args.q_floor) config.q_floor = *args.q_floor;
  if (args.mode) {
    if (*args.mode == "approximate") {
      config.mode = rdpf::SolverMode::kApproximate;
    } else if (*args.mode == "exact-implicit") {
      config.mode = rdpf::SolverMode::kExactImplicit;
    } else {
      throw rdpf::ConfigError("unknown mode \"" + *args.mode + "\"");
    }
  }
  if (args.units) {
    if (*args.units == "bits") {
      config.units = rdpf::RateUnits::kBits;
    } else if (*args.units == "nats") {
      config.units = rdpf::RateUnits::kNats;
    } else {
      throw rdpf::ConfigError("unknown units \"" + *args.units + "\"");
    }
  }
  if (args.perception_units) {
    if (*args.perception_units == "native") {
      config.perception_units = rdpf::PerceptionUnits::kNative;
    } else if (*args.perception_units == "bits") {
      config.perception_units = rdpf::PerceptionUnits::kBits;
    } else {
      throw rdpf::ConfigError("unknown perception-units \"" + *args.perception_units + "\"");
    }
  }
  if (args.oracle) config.oracle = true;
  if (args.oracle_step) config.oracle_step = *args.oracle_step;
  if (args.spectral) config.spectral = true;
  if (args.q0) config.seed_q0 = rdpf::parse_number_list(*args.q0);
  if (args.threads) config.threads = *args.threads;
  if (args.output) config.output_path = *args.output;
  if (args.format) {
    if (*args.format == "csv") {
      config.format = rdpf::OutputFormat::kCsv;
    } else if (*args.format == "json") {
      config.format = rdpf::OutputFormat::kJson;
    } else {
      throw rdpf::ConfigError("unknown format \"" + *args.format + "\"");
    }
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "rdpf: computes the rate-distortion-perception function of a discrete "
      "source by Lagrangian-parametric alternating minimization"};
  CliArgs args;

  app.add_option("--source", args.source, "Source distribution, e.g. 0.15,0.85");
  app.add_option("--distortion", args.distortion,
                 "\"hamming\" (default) or a whitespace-separated matrix file");
  app.add_option("--divergence", args.divergence, "Perception divergence: kl | tv | chi2");
  auto* s1 = app.add_option("--s1", args.s1, "Distortion multiplier (single value or list)");
  auto* s1g = app.add_option("--s1-grid", args.s1_grid,
                             "s1 grid: a,b,c | lin:lo:hi:n | log:lo:hi:n");
  auto* s2 = app.add_option("--s2", args.s2, "Perception multiplier (single value or list)");
  auto* s2g = app.add_option("--s2-grid", args.s2_grid,
                             "s2 grid: a,b,c | lin:lo:hi:n | log:lo:hi:n");
  s1->excludes(s1g);
  s2->excludes(s2g);
  app.add_option("--eps", args.eps, "Stopping tolerance on the bound gap, nats (default 1e-9)");
  app.add_option("--max-iters", args.max_iters, "Iteration cap per point (default 100000)");
  app.add_option("--q-floor", args.q_floor, "Support-collapse threshold (default 1e-15)");
  app.add_option("--mode", args.mode, "approximate (default) | exact-implicit");
  app.add_option("--units", args.units, "Rate units in the output: bits (default) | nats");
  app.add_option("--perception-units", args.perception_units,
                 "native (default) | bits (KL only)");
  app.add_flag("--oracle", args.oracle, "Attach grid-oracle rates at each converged point");
  app.add_option("--oracle-step", args.oracle_step, "Oracle lattice step (default 0.01)");
  app.add_flag("--spectral", args.spectral, "Attach spectral convergence reports");
  app.add_option("--q0", args.q0, "Initial reconstruction marginal (default uniform)");
  app.add_option("--threads", args.threads, "Parallel point evaluation (default 1)");
  app.add_option("--output", args.output, "Output path (default stdout)");
  app.add_option("--format", args.format, "csv (default) | json");
  app.add_option("--config", args.config_path,
                 "Key-value config file; explicit flags override its values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const rdpf::RunConfig config = merge(args);
    rdpf::validate(config);
    const std::vector<rdpf::CurvePoint> points = rdpf::run_sweep(config);
    rdpf::emit(points, config);
    for (const rdpf::CurvePoint& pt : points) {
      if (pt.status != rdpf::SolveStatus::kConverged) return 2;
    }
    return 0;
  } catch (const rdpf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
