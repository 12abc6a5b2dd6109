#ifndef RDPF_SOLVER_HPP
#define RDPF_SOLVER_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rdpf/fdivergence.hpp"
#include "rdpf/simplex.hpp"

namespace rdpf {

/// Lagrange multipliers of the penalized objective: s1 prices distortion,
/// s2 prices perception. Both nonnegative.
struct LagrangeParams {
  double s1 = 0.0;
  double s2 = 0.0;
};

enum class SolverMode { kApproximate, kExactImplicit };

struct SolverConfig {
  double epsilon = 1e-9;          // stopping tolerance on omega (nats)
  std::size_t max_iters = 100000;
  double q_floor = 1e-15;         // support-collapse threshold
  SolverMode mode = SolverMode::kApproximate;
  double inner_tol = 1e-13;       // exact-implicit inner fixed-point tolerance
  std::size_t inner_max_iters = 2000;
  std::optional<std::vector<double>> initial_q;  // default: uniform over the
                                                 // reconstruction alphabet
  bool record_iterates = true;    // keep the q trace (needed for the
                                  // empirical convergence-rate fit)
};

enum class SolveStatus { kConverged, kMaxIters, kDiverged, kSupportCollapsed };

std::string_view to_string(SolveStatus status);

/// One fully prepared iterate: the marginal q^(n), the auxiliary marginal v
/// inside the exponent (v = q in the approximate scheme), ln A at v, the
/// per-source-row log normalizers ln sum_i q(i) A(x,i), and the log update
/// factors ln c(xhat). Zero entries of q mark dead reconstruction symbols;
/// their c is evaluated in the t -> inf limit when that limit is finite and
/// is +inf otherwise (no finite certificate exists for them).
struct SolverState {
  std::vector<double> q;
  std::vector<double> v;
  RowMatrix log_a;
  std::vector<double> log_norm;
  std::vector<double> log_c;
  double omega = 0.0;   // ln c_max - sum_xhat q c ln c; the certified bound gap
  std::size_t iteration = 0;
  bool clamped = false;  // some entry hit the support floor at some point
};

struct IterationRecord {
  std::size_t iteration = 0;
  double omega = 0.0;
  double distortion = 0.0;
  double perception = 0.0;
  double rate = 0.0;  // upper-bound value: the rate of the current kernel
  double lower = 0.0;
  double upper = 0.0;
};

struct BoundPair {
  double lower = 0.0;
  double upper = 0.0;
};

struct SolveResult {
  TransitionKernel kernel;
  OutputDistribution q;
  double distortion = 0.0;
  double perception = 0.0;  // NaN when |X| != |Xhat| (classical-only run)
  double rate = 0.0;        // nats
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::kConverged;
  std::vector<IterationRecord> trace;
  std::vector<std::vector<double>> iterates;  // q^(0..n) when recorded
  std::vector<double> c;                      // final update factors
  double kkt_max_violation = 0.0;
  bool support_clamped = false;
};

struct KktResidual {
  std::vector<double> c;
  double max_violation = 0.0;
};

/// ln A[v](x, xhat) = -s1 d(x, xhat) - s2 g(p, v, xhat). Dead entries of v
/// take the t -> inf limit of g; with s2 = 0 the perception term is skipped
/// entirely. Requires |X| = |Xhat| whenever s2 > 0 (the perception exponent
/// evaluates p at reconstruction symbols).
RowMatrix exponent_kernel(const SourceDistribution& p, const OutputDistribution& q,
                          const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d);

/// Prepares the state at a strictly positive start q0 (approximate scheme:
/// v = q0).
SolverState initial_state(const SourceDistribution& p, const FDivergence& spec, LagrangeParams s,
                          const DistortionMatrix& d, const OutputDistribution& q0);

/// One approximate-scheme step: q^(n+1) = q^(n) c(xhat) with entries below
/// q_floor clamped to exact zero (followed by renormalization), then the
/// state is re-prepared at the new iterate.
SolverState iterate_once(const SolverState& state, const SourceDistribution& p,
                         const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d,
                         double q_floor = 1e-15);

/// Q(xhat|x) = q(xhat) A(x,xhat) / sum_i q(i) A(x,i), rows on the simplex.
TransitionKernel reconstruct_kernel(const OutputDistribution& q, const RowMatrix& log_a);

/// Optimality residual: c(xhat) <= 1 everywhere, with equality on the
/// support of q. Reports max over xhat of |c-1| (support) and max(c-1, 0)
/// (zero-mass symbols).
KktResidual kkt_residual(const OutputDistribution& q, const SourceDistribution& p,
                         const RowMatrix& log_a);

/// Certified bracket on R(D, P) at the state's achieved (D, P):
///   lower = -s1 D - s2 P + W - ln c_max
///   upper = -s1 D - s2 P + W - sum q c ln c
/// where W is the three-term stopping potential evaluated at the state.
/// upper - lower = omega identically.
BoundPair bound_pair(const SolverState& state, const SourceDistribution& p,
                     const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d);

/// Dual lower bound on R(D, P) from any multiplier vector lambda with
/// lambda(x) >= 0 and sum_x p(x) lambda(x) A(x, xhat) <= 1 for every xhat
/// (checked to 1e-10; violations are rejected with the offending xhat).
double lagrangian_lower_bound(std::span<const double> lambda, const SolverState& state,
                              const SourceDistribution& p, const FDivergence& spec,
                              LagrangeParams s, const DistortionMatrix& d);

/// Alternating-minimization solve. Loops iterate_once until omega <= epsilon
/// or a termination condition fires; never throws on numerical trouble once
/// inputs validate (the status reports what happened, with best-so-far
/// state).
SolveResult solve(const SourceDistribution& p, const FDivergence& spec, LagrangeParams s,
                  const DistortionMatrix& d, const SolverConfig& config = {});

/// Diagnostic mode: each outer step resolves the implicit dependence of the
/// update on its own output by a damped inner fixed-point solve
/// (v <- (1-a) v + a F(v), a = 0.5) before applying the step. Restricted to
/// |Xhat| <= 16. Shares fixed points with solve().
SolveResult solve_exact_implicit(const SourceDistribution& p, const FDivergence& spec,
                                 LagrangeParams s, const DistortionMatrix& d,
                                 const SolverConfig& config = {});

}  // namespace rdpf

#endif  // RDPF_SOLVER_HPP
