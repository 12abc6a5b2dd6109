#include "rdpf/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace rdpf {

namespace {

using nlohmann::json;

constexpr double kLn2 = 0.6931471805599453;

std::string fmt12(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double parse_double(const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ConfigError("not a number: \"" + text + "\"");
  }
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos != text.size()) throw ConfigError("not a number: \"" + text + "\"");
  return v;
}

std::string trim(const std::string& text) {
  std::size_t b = text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = text.find_last_not_of(" \t\r\n");
  return text.substr(b, e - b + 1);
}

bool rate_in_bits(const RunConfig& c) { return c.units == RateUnits::kBits; }

bool perception_in_bits(const RunConfig& c) {
  return c.perception_units == PerceptionUnits::kBits && c.divergence == "kl";
}

double rate_out(const RunConfig& c, double nats) { return rate_in_bits(c) ? nats / kLn2 : nats; }

double perception_out(const RunConfig& c, double native) {
  return perception_in_bits(c) ? native / kLn2 : native;
}

json spectral_to_json(const SpectralReport& r) {
  json out;
  out["status"] = r.status;
  auto eigs = [](const std::vector<std::complex<double>>& v) {
    json arr = json::array();
    for (const auto& e : v) arr.push_back({e.real(), e.imag()});
    return arr;
  };
  out["eigenvalues_m"] = eigs(r.eigenvalues_m);
  out["eigenvalues"] = eigs(r.eigenvalues_approx);
  out["eigenvalues_exact"] = eigs(r.eigenvalues_exact);
  if (std::isfinite(r.spectral_radius_approx)) out["spectral_radius"] = r.spectral_radius_approx;
  if (std::isfinite(r.spectral_radius_exact)) {
    out["spectral_radius_exact"] = r.spectral_radius_exact;
  }
  if (r.empirical_rate) {
    out["empirical_rate"] = *r.empirical_rate;
  } else {
    out["empirical_rate"] = nullptr;
  }
  return out;
}

json oracle_to_json(const OracleResult& r) {
  json out;
  out["feasible"] = r.feasible;
  out["R"] = r.rate;
  out["grid_step"] = r.grid_step;
  out["distortion_active"] = r.distortion_active;
  out["perception_active"] = r.perception_active;
  return out;
}

json config_to_json(const RunConfig& c) {
  json out;
  out["source"] = c.source;
  out["distortion"] = c.distortion;
  out["divergence"] = c.divergence;
  out["s1_grid"] = c.s1_grid;
  out["s2_grid"] = c.s2_grid;
  out["eps"] = c.epsilon;
  out["max_iters"] = c.max_iters;
  out["q_floor"] = c.q_floor;
  out["mode"] = c.mode == SolverMode::kApproximate ? "approximate" : "exact-implicit";
  out["output"] = c.output_path;
  out["format"] = c.format == OutputFormat::kCsv ? "csv" : "json";
  out["units"] = rate_in_bits(c) ? "bits" : "nats";
  out["perception_units"] = c.perception_units == PerceptionUnits::kNative ? "native" : "bits";
  out["oracle"] = c.oracle;
  out["oracle_step"] = c.oracle_step;
  out["spectral"] = c.spectral;
  if (c.seed_q0) out["q0"] = *c.seed_q0;
  out["threads"] = c.threads;
  return out;
}

CurvePoint eval_point(const RunConfig& config, const SourceDistribution& p,
                      const FDivergence& spec, const DistortionMatrix& d, double s1, double s2) {
  CurvePoint pt;
  pt.s1 = s1;
  pt.s2 = s2;
  SolverConfig solver_config;
  solver_config.epsilon = config.epsilon;
  solver_config.max_iters = config.max_iters;
  solver_config.q_floor = config.q_floor;
  solver_config.mode = config.mode;
  solver_config.initial_q = config.seed_q0;
  solver_config.record_iterates = config.spectral;

  const LagrangeParams s{s1, s2};
  SolveResult result = solve(p, spec, s, d, solver_config);
  pt.distortion = result.distortion;
  pt.perception = result.perception;
  pt.rate = result.rate;
  pt.lower = result.lower_bound;
  pt.upper = result.upper_bound;
  pt.iterations = result.iterations;
  pt.status = result.status;
  pt.kkt_violation = result.kkt_max_violation;
  if (result.status == SolveStatus::kConverged) {
    pt.kkt_ok = result.kkt_max_violation <= 10.0 * config.epsilon;
    if (!pt.kkt_ok) {
      std::cerr << "warning: converged point (s1=" << s1 << ", s2=" << s2
                << ") fails the optimality residual bound: " << result.kkt_max_violation << "\n";
    }
  }

  if (config.spectral && result.status == SolveStatus::kConverged) {
    auto report = std::make_shared<SpectralReport>(analyze(result, p, spec, s, d));
    if (std::isfinite(report->spectral_radius_approx)) {
      pt.spectral_radius = report->spectral_radius_approx;
      if (report->spectral_radius_approx >= 1.0 - 1e-6) {
        std::cerr << "warning: spectral radius " << report->spectral_radius_approx
                  << " at (s1=" << s1 << ", s2=" << s2 << "); s2 is at or past the stable range\n";
      }
    }
    pt.spectral_report = std::move(report);
  }
  if (config.oracle && result.status == SolveStatus::kConverged) {
    const double perception_budget =
        std::isfinite(result.perception) ? result.perception
                                         : std::numeric_limits<double>::infinity();
    auto oracle = std::make_shared<OracleResult>(
        grid_oracle(p, spec, d, result.distortion, perception_budget, config.oracle_step));
    if (oracle->feasible) pt.oracle_rate = oracle->rate;
    pt.oracle_result = std::move(oracle);
  }
  return pt;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& part : split(text, ',')) {
    const std::string token = trim(part);
    if (token.empty()) throw ConfigError("empty entry in list \"" + text + "\"");
    out.push_back(parse_double(token));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  const std::string body = trim(text);
  if (body.rfind("lin:", 0) == 0 || body.rfind("log:", 0) == 0) {
    const bool logspace = body[1] == 'o';
    const auto parts = split(body.substr(4), ':');
    if (parts.size() != 3) throw ConfigError("grid \"" + body + "\": expected lo:hi:count");
    const double lo = parse_double(parts[0]);
    const double hi = parse_double(parts[1]);
    const long count = std::lround(parse_double(parts[2]));
    if (count < 1) throw ConfigError("grid \"" + body + "\": count must be >= 1");
    if (logspace && (lo <= 0.0 || hi <= 0.0)) {
      throw ConfigError("grid \"" + body + "\": log spacing needs positive endpoints");
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
      out.push_back(lo);
      return out;
    }
    for (long i = 0; i < count; ++i) {
      const double f = static_cast<double>(i) / static_cast<double>(count - 1);
      out.push_back(logspace ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)))
                             : lo + f * (hi - lo));
    }
    return out;
  }
  return parse_number_list(body);
}

void validate(const RunConfig& config) {
  if (config.source.empty()) throw ConfigError("source distribution is required");
  double sum = 0.0;
  for (double x : config.source) {
    if (!(x > 0.0)) throw ConfigError("source entries must be strictly positive");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    throw ConfigError("source must sum to 1 (got " + fmt12(sum) + ")");
  }
  try {
    FDivergence::from_name(config.divergence);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (config.s1_grid.empty() && config.s2_grid.empty()) {
    throw ConfigError("at least one of the s1/s2 grids is required");
  }
  for (double v : config.s1_grid) {
    if (!(v >= 0.0)) throw ConfigError("s1 grid values must be >= 0");
  }
  for (double v : config.s2_grid) {
    if (!(v >= 0.0)) throw ConfigError("s2 grid values must be >= 0");
  }
  if (!(config.epsilon > 0.0)) throw ConfigError("eps must be > 0");
  if (config.max_iters < 1) throw ConfigError("max-iters must be >= 1");
  if (config.q_floor < 0.0) throw ConfigError("q-floor must be >= 0");
  if (!(config.oracle_step >= 1e-4 && config.oracle_step <= 1e-1)) {
    throw ConfigError("oracle-step must lie in [1e-4, 1e-1]");
  }
  if (config.threads < 1) throw ConfigError("threads must be >= 1");
  const DistortionMatrix d = resolve_distortion(config);
  if (d.rows() != config.source.size()) {
    throw ConfigError("distortion matrix rows must match the source alphabet");
  }
  if (config.seed_q0) {
    if (config.seed_q0->size() != d.cols()) throw ConfigError("q0 has the wrong size");
    double q0_sum = 0.0;
    for (double x : *config.seed_q0) {
      if (!(x > 0.0)) throw ConfigError("q0 entries must be strictly positive");
      q0_sum += x;
    }
    if (std::abs(q0_sum - 1.0) > kSimplexTol) throw ConfigError("q0 must sum to 1");
  }
  bool any_positive_s2 = false;
  for (double v : config.s2_grid) any_positive_s2 |= v > 0.0;
  if (any_positive_s2 && d.cols() != config.source.size()) {
    throw ConfigError("perception constraints (s2 > 0) require |X| = |Xhat|");
  }
  if (config.oracle && config.source.size() * (d.cols() - 1) > 6) {
    throw ConfigError("oracle limited to |X| (|Xhat| - 1) <= 6 free parameters");
  }
  if (config.mode == SolverMode::kExactImplicit && d.cols() > 16) {
    throw ConfigError("exact-implicit mode restricted to |Xhat| <= 16");
  }
}

DistortionMatrix resolve_distortion(const RunConfig& config) {
  if (config.distortion == "hamming") {
    return DistortionMatrix::hamming(config.source.size());
  }
  std::ifstream in(config.distortion);
  if (!in) throw ConfigError("cannot open distortion matrix file \"" + config.distortion + "\"");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    std::istringstream ls(body);
    std::vector<double> row;
    double v = 0.0;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw ConfigError("bad distortion row: \"" + body + "\"");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("distortion matrix file is empty");
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  for (const auto& row : rows) {
    if (row.size() != cols) throw ConfigError("ragged distortion matrix");
    data.insert(data.end(), row.begin(), row.end());
  }
  try {
    return DistortionMatrix(rows.size(), cols, std::move(data));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<CurvePoint> run_sweep(const RunConfig& config) {
  validate(config);
  RunConfig cfg = config;
  if (cfg.s1_grid.empty()) cfg.s1_grid = {0.0};
  if (cfg.s2_grid.empty()) cfg.s2_grid = {0.0};

  const SourceDistribution p(cfg.source);
  const FDivergence spec = FDivergence::from_name(cfg.divergence);
  const DistortionMatrix d = resolve_distortion(cfg);

  const std::size_t total = cfg.s1_grid.size() * cfg.s2_grid.size();
  std::vector<CurvePoint> points(total);
  auto eval_index = [&](std::size_t i) {
    const double s1 = cfg.s1_grid[i / cfg.s2_grid.size()];
    const double s2 = cfg.s2_grid[i % cfg.s2_grid.size()];
    try {
      points[i] = eval_point(cfg, p, spec, d, s1, s2);
    } catch (const std::exception& e) {
      std::cerr << "warning: point (s1=" << s1 << ", s2=" << s2 << ") failed: " << e.what()
                << "\n";
      points[i].s1 = s1;
      points[i].s2 = s2;
      points[i].status = SolveStatus::kDiverged;
      points[i].kkt_ok = false;
    }
  };

  const unsigned workers = std::min<unsigned>(cfg.threads, static_cast<unsigned>(total));
  if (workers <= 1) {
    for (std::size_t i = 0; i < total; ++i) eval_index(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= total) return;
          eval_index(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return points;
}

std::string render_csv(const std::vector<CurvePoint>& points, const RunConfig& config) {
  std::string out = "s1,s2,D,P,R,lower,upper,iterations,status";
  if (config.spectral) out += ",spectral_radius";
  if (config.oracle) out += ",oracle_R";
  out += "\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const CurvePoint& pt : points) {
    out += fmt12(pt.s1);
    out += ',';
    out += fmt12(pt.s2);
    out += ',';
    out += fmt12(pt.distortion);
    out += ',';
    out += fmt12(perception_out(config, pt.perception));
    out += ',';
    out += fmt12(rate_out(config, pt.rate));
    out += ',';
    out += fmt12(rate_out(config, pt.lower));
    out += ',';
    out += fmt12(rate_out(config, pt.upper));
    out += ',';
    out += std::to_string(pt.iterations);
    out += ',';
    out += to_string(pt.status);
    if (config.spectral) {
      out += ',';
      out += fmt12(pt.spectral_radius.value_or(nan));
    }
    if (config.oracle) {
      out += ',';
      out += fmt12(rate_out(config, pt.oracle_rate.value_or(nan)));
    }
    out += '\n';
  }
  return out;
}

std::string render_json(const std::vector<CurvePoint>& points, const RunConfig& config) {
  json out;
  out["config"] = config_to_json(config);
  json arr = json::array();
  for (const CurvePoint& pt : points) {
    json p;
    p["s1"] = pt.s1;
    p["s2"] = pt.s2;
    p["D"] = pt.distortion;
    const double perception = perception_out(config, pt.perception);
    if (std::isfinite(perception)) {
      p["P"] = perception;
    } else {
      p["P"] = nullptr;
    }
    p["R"] = rate_out(config, pt.rate);
    p["lower"] = rate_out(config, pt.lower);
    p["upper"] = rate_out(config, pt.upper);
    p["iterations"] = pt.iterations;
    p["status"] = std::string(to_string(pt.status));
    p["kkt_violation"] = pt.kkt_violation;
    p["kkt_ok"] = pt.kkt_ok;
    p["spectral"] = pt.spectral_report ? spectral_to_json(*pt.spectral_report) : json(nullptr);
    p["oracle"] = pt.oracle_result ? oracle_to_json(*pt.oracle_result) : json(nullptr);
    arr.push_back(std::move(p));
  }
  out["points"] = std::move(arr);
  return out.dump(2) + "\n";
}

void emit(const std::vector<CurvePoint>& points, const RunConfig& config) {
  if (points.empty()) throw ConfigError("emit: no points");
  const std::string body = config.format == OutputFormat::kCsv ? render_csv(points, config)
                                                               : render_json(points, config);
  if (config.output_path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(config.output_path);
  if (!out) throw ConfigError("cannot write to \"" + config.output_path + "\"");
  out << body;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
  RunConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = trim(line);
    const std::size_t hash = body.find('#');
    if (hash != std::string::npos) body = trim(body.substr(0, hash));
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    for (char& ch : key) {
      if (ch == '_') ch = '-';
    }
    try {
      if (key == "source") {
        config.source = parse_number_list(value);
      } else if (key == "distortion") {
        config.distortion = value;
      } else if (key == "divergence") {
        config.divergence = value;
      } else if (key == "s1" || key == "s1-grid") {
        config.s1_grid = parse_grid(value);
      } else if (key == "s2" || key == "s2-grid") {
        config.s2_grid = parse_grid(value);
      } else if (key == "eps") {
        config.epsilon = parse_double(value);
      } else if (key == "max-iters") {
        config.max_iters = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "q-floor") {
        config.q_floor = parse_double(value);
      } else if (key == "mode") {
        if (value == "approximate") {
          config.mode = SolverMode::kApproximate;
        } else if (value == "exact-implicit") {
          config.mode = SolverMode::kExactImplicit;
        } else {
          throw ConfigError("unknown mode \"" + value + "\"");
        }
      } else if (key == "units") {
        if (value == "bits") {
          config.units = RateUnits::kBits;
        } else if (value == "nats") {
          config.units = RateUnits::kNats;
        } else {
          throw ConfigError("unknown units \"" + value + "\"");
        }
      } else if (key == "perception-units") {
        if (value == "native") {
          config.perception_units = PerceptionUnits::kNative;
        } else if (value == "bits") {
          config.perception_units = PerceptionUnits::kBits;
        } else {
          throw ConfigError("unknown perception-units \"" + value + "\"");
        }
      } else if (key == "oracle") {
        config.oracle = value == "true" || value == "1";
      } else if (key == "oracle-step") {
        config.oracle_step = parse_double(value);
      } else if (key == "spectral") {
        config.spectral = value == "true" || value == "1";
      } else if (key == "output") {
        config.output_path = value;
      } else if (key == "format") {
        if (value == "csv") {
          config.format = OutputFormat::kCsv;
        } else if (value == "json") {
          config.format = OutputFormat::kJson;
        } else {
          throw ConfigError("unknown format \"" + value + "\"");
        }
      } else if (key == "q0") {
        config.seed_q0 = parse_number_list(value);
      } else if (key == "threads") {
        config.threads = static_cast<unsigned>(std::stoul(value));
      } else {
        throw ConfigError("unknown key \"" + key + "\"");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return config;
}

}  // namespace rdpf
