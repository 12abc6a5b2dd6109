#ifndef RDPF_SWEEP_HPP
#define RDPF_SWEEP_HPP

#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdpf/oracles.hpp"
#include "rdpf/solver.hpp"
#include "rdpf/spectral.hpp"

namespace rdpf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { kCsv, kJson };
enum class RateUnits { kBits, kNats };
enum class PerceptionUnits { kNative, kBits };

struct RunConfig {
  std::vector<double> source;
  std::string distortion = "hamming";  // "hamming" or a matrix file path
  std::string divergence = "kl";
  std::vector<double> s1_grid;  // empty grids default to {0}
  std::vector<double> s2_grid;
  double epsilon = 1e-9;
  std::size_t max_iters = 100000;
  double q_floor = 1e-15;
  SolverMode mode = SolverMode::kApproximate;
  std::string output_path;  // empty: stdout
  OutputFormat format = OutputFormat::kCsv;
  RateUnits units = RateUnits::kBits;
  PerceptionUnits perception_units = PerceptionUnits::kNative;
  bool oracle = false;
  double oracle_step = 1e-2;
  bool spectral = false;
  std::optional<std::vector<double>> seed_q0;
  unsigned threads = 1;
};

struct CurvePoint {
  double s1 = 0.0;
  double s2 = 0.0;
  double distortion = 0.0;
  double perception = 0.0;
  double rate = 0.0;  // nats; converted at emit time only
  double lower = 0.0;
  double upper = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
  double kkt_violation = 0.0;
  bool kkt_ok = true;
  std::optional<double> spectral_radius;
  std::optional<double> oracle_rate;
  std::shared_ptr<SpectralReport> spectral_report;
  std::shared_ptr<OracleResult> oracle_result;
};

/// Throws ConfigError on invalid configuration (unknown divergence,
/// non-simplex source, negative grid values, ...).
void validate(const RunConfig& config);

DistortionMatrix resolve_distortion(const RunConfig& config);

/// Runs solve over the Cartesian product s1_grid x s2_grid. Point order in
/// the output is row-major over (s1, s2) regardless of execution order;
/// individual point failures are recorded in their status and never abort
/// the sweep. The Lemma-3 residual of every converged point is re-checked
/// here (kkt_ok).
std::vector<CurvePoint> run_sweep(const RunConfig& config);

std::string render_csv(const std::vector<CurvePoint>& points, const RunConfig& config);
std::string render_json(const std::vector<CurvePoint>& points, const RunConfig& config);

/// Writes to config.output_path (stdout when empty) in the configured
/// format.
void emit(const std::vector<CurvePoint>& points, const RunConfig& config);

/// Parses a flat key-value config file (keys mirror the CLI flag names,
/// values use the same syntax; '#' starts a comment).
RunConfig load_config_file(const std::string& path);

/// Grid syntax: "a,b,c" | "lin:lo:hi:n" | "log:lo:hi:n" | single value.
std::vector<double> parse_grid(const std::string& text);

std::vector<double> parse_number_list(const std::string& text);

}  // namespace rdpf

#endif  // RDPF_SWEEP_HPP
