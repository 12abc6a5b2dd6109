#include "rdpf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rdpf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Consecutive strict omega increases that trip the divergence monitor.
constexpr std::size_t kDivergenceWindow = 50;

// Convergence certifies the Lemma-3 residual too: c must sit within
// kKktFactor * epsilon of 1 on the support. The omega rule alone can fire
// while a decaying support symbol still carries an O(1) residual.
constexpr double kKktFactor = 10.0;

RowMatrix exponent_kernel_impl(const SourceDistribution& p, std::span<const double> v,
                               const FDivergence& spec, LagrangeParams s,
                               const DistortionMatrix& d) {
  const std::size_t nx = d.rows();
  const std::size_t nh = d.cols();
  std::vector<double> g(nh, 0.0);
  if (s.s2 != 0.0) {
    if (p.size() != nh) {
      throw std::invalid_argument(
          "exponent_kernel: perception term requires |X| = |Xhat| (s2 > 0)");
    }
    for (std::size_t j = 0; j < nh; ++j) {
      if (v[j] > 0.0) {
        const double t = p[j] / v[j];
        g[j] = spec.f(t) - t * spec.subgradient(t);
      } else {
        g[j] = spec.g_limit_at_infinity();
      }
    }
  }
  RowMatrix log_a(nx, nh);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t j = 0; j < nh; ++j) {
      double value = -s.s1 * d(x, j);
      if (s.s2 != 0.0) value -= s.s2 * g[j];  // g may be -inf -> +inf entry
      log_a(x, j) = value;
    }
  }
  return log_a;
}

// ln c(xhat) = LSE_x [ ln p(x) + ln A(x,xhat) - ln_norm(x) ]. Dead columns
// are evaluated too (their ln A holds the t -> inf limit); a +inf column
// yields ln c = +inf, marking a symbol with no finite certificate.
std::vector<double> update_log_factors(const SourceDistribution& p, const RowMatrix& log_a,
                                       std::span<const double> log_norm) {
  const std::size_t nx = log_a.rows();
  const std::size_t nh = log_a.cols();
  std::vector<double> log_c(nh);
  std::vector<double> expo(nx);
  for (std::size_t j = 0; j < nh; ++j) {
    double shift = -kInf;
    for (std::size_t x = 0; x < nx; ++x) {
      expo[x] = std::log(p[x]) + log_a(x, j) - log_norm[x];
      shift = std::max(shift, expo[x]);
    }
    if (std::isinf(shift)) {
      log_c[j] = shift;
      continue;
    }
    double sum = 0.0;
    for (std::size_t x = 0; x < nx; ++x) sum += std::exp(expo[x] - shift);
    log_c[j] = shift + std::log(sum);
  }
  return log_c;
}

// Builds a fully consistent state at marginal q and auxiliary marginal v.
SolverState prepare_state(std::vector<double> q, std::vector<double> v,
                          const SourceDistribution& p, const FDivergence& spec, LagrangeParams s,
                          const DistortionMatrix& d, std::size_t iteration, bool clamped) {
  SolverState st;
  st.q = std::move(q);
  st.v = std::move(v);
  st.log_a = exponent_kernel_impl(p, st.v, spec, s, d);
  st.log_norm.resize(d.rows());
  for (std::size_t x = 0; x < d.rows(); ++x) {
    st.log_norm[x] = log_normalizer(std::span<const double>(st.q), st.log_a.row(x));
  }
  st.log_c = update_log_factors(p, st.log_a, st.log_norm);
  double lc_max = -kInf;
  for (double lc : st.log_c) lc_max = std::max(lc_max, lc);
  double weighted = 0.0;
  for (std::size_t j = 0; j < st.q.size(); ++j) {
    if (st.q[j] > 0.0) {
      // q c ln c = exp(ln q + ln c) ln c, never exponentiating ln c alone
      weighted += std::exp(std::log(st.q[j]) + st.log_c[j]) * st.log_c[j];
    }
  }
  st.omega = lc_max - weighted;
  st.iteration = iteration;
  st.clamped = clamped;
  return st;
}

struct BoundsDetail {
  double distortion = 0.0;
  double perception = 0.0;  // NaN on rectangular (classical-only) problems
  double lower = 0.0;
  double upper = 0.0;
};

// Shares every intermediate with the omega computation so that
// upper - lower = omega holds to roundoff at each iterate.
BoundsDetail bounds_detail(const SolverState& st, const SourceDistribution& p,
                           const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d) {
  const std::size_t nx = d.rows();
  const std::size_t nh = d.cols();
  BoundsDetail out;

  // D under the kernel reconstructed from (q, log_a).
  double distortion = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t j = 0; j < nh; ++j) {
      if (st.q[j] <= 0.0) continue;
      const double qxj = std::exp(std::log(st.q[j]) + st.log_a(x, j) - st.log_norm[x]);
      distortion += p[x] * qxj * d(x, j);
    }
  }
  out.distortion = distortion;

  // Next iterate m = q c, the marginal induced by the current kernel.
  std::vector<double> m(nh, 0.0);
  for (std::size_t j = 0; j < nh; ++j) {
    if (st.q[j] > 0.0) m[j] = std::exp(std::log(st.q[j]) + st.log_c[j]);
  }

  double w = 0.0;
  for (std::size_t x = 0; x < nx; ++x) w -= p[x] * st.log_norm[x];

  if (p.size() == nh) {
    double perception = 0.0;
    for (std::size_t j = 0; j < nh; ++j) {
      if (m[j] > 0.0) {
        perception += m[j] * spec.f(p[j] / m[j]);
      } else if (p[j] > 0.0) {
        const double slope = spec.slope_at_infinity();
        perception += std::isinf(slope) ? kInf : p[j] * slope;
      }
    }
    out.perception = perception;
  } else {
    out.perception = kNan;  // rectangular: perception undefined, s2 = 0 enforced
  }

  // In -s2 P + W the achieved-perception terms cancel against the bracketed
  // f-difference of the stopping potential, leaving -s2 sum_xhat m g(t).
  // Computing that canceled form directly keeps the bounds exact on
  // reduced-support states, where the budget P also carries dead-symbol
  // mass that the potential never sees.
  double flow = -s.s1 * distortion + w;
  if (s.s2 != 0.0) {
    for (std::size_t j = 0; j < nh; ++j) {
      if (m[j] <= 0.0) continue;
      const double t = p[j] / st.v[j];
      flow -= s.s2 * m[j] * (spec.f(t) - t * spec.subgradient(t));
    }
  }

  double weighted = 0.0;
  double lc_max = -kInf;
  for (std::size_t j = 0; j < nh; ++j) {
    lc_max = std::max(lc_max, st.log_c[j]);
    if (m[j] > 0.0) weighted += m[j] * st.log_c[j];
  }

  out.upper = flow - weighted;
  out.lower = flow - lc_max;
  return out;
}

std::vector<double> factors(const SolverState& st) {
  std::vector<double> c(st.log_c.size());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] = std::exp(st.log_c[j]);
  return c;
}

double kkt_violation_of(const SolverState& st) {
  double worst = 0.0;
  for (std::size_t j = 0; j < st.q.size(); ++j) {
    const double c = std::exp(st.log_c[j]);
    const double v = st.q[j] > 0.0 ? std::abs(c - 1.0) : std::max(c - 1.0, 0.0);
    worst = std::max(worst, v);
  }
  return worst;
}

// Applies the multiplicative update with support clamping; returns the new
// marginal (renormalized only when something was clamped).
std::vector<double> apply_update(const SolverState& st, double q_floor, bool& clamped_now) {
  const std::size_t nh = st.q.size();
  std::vector<double> next(nh, 0.0);
  clamped_now = false;
  for (std::size_t j = 0; j < nh; ++j) {
    if (st.q[j] > 0.0) next[j] = std::exp(std::log(st.q[j]) + st.log_c[j]);
  }
  for (std::size_t j = 0; j < nh; ++j) {
    if (st.q[j] > 0.0 && next[j] < q_floor) {
      next[j] = 0.0;
      clamped_now = true;
    }
  }
  if (clamped_now) {
    double sum = 0.0;
    for (double x : next) sum += x;
    if (!(sum > 0.0)) throw std::domain_error("solver: entire support collapsed");
    for (double& x : next) x /= sum;
  }
  return next;
}

// Exact-implicit inner loop: v = F(v) with F(v) = q . c[A(v)], damped at
// a = 0.5. With s2 = 0 the map does not depend on v; one evaluation is exact.
//
// A subgradient kink (TV at t = 1) makes F jump, and the generalized fixed
// point then uses an interior subgradient the fixed selection cannot
// express. The damped iterate settles inside the jump window; a stalled
// small residual with a near-kink component is accepted as that generalized
// solution.
bool inner_fixed_point(const std::vector<double>& q, const SourceDistribution& p,
                       const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d,
                       const SolverConfig& config, std::vector<double>& v_out) {
  auto apply_map = [&](const std::vector<double>& v) {
    SolverState st = prepare_state(q, v, p, spec, s, d, 0, false);
    bool ignored = false;
    return apply_update(st, 0.0, ignored);
  };
  if (s.s2 == 0.0) {
    v_out = apply_map(q);
    return true;
  }
  std::vector<double> v = q;
  double stalled_delta = kInf;
  std::size_t stalled_for = 0;
  for (std::size_t k = 0; k < config.inner_max_iters; ++k) {
    const std::vector<double> f = apply_map(v);
    double delta = 0.0;
    std::vector<double> next(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
      next[j] = 0.5 * v[j] + 0.5 * f[j];
      delta = std::max(delta, std::abs(f[j] - v[j]));
    }
    if (delta <= config.inner_tol) {
      v_out = f;
      return true;
    }
    if (delta >= 0.5 * stalled_delta) {
      ++stalled_for;
    } else {
      stalled_delta = delta;
      stalled_for = 0;
    }
    if (stalled_for >= 50 && delta <= 1e-3) {
      bool kink_witness = false;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] > 0.0 && std::abs(p[j] / v[j] - 1.0) <= 1e3 * delta) kink_witness = true;
      }
      if (kink_witness) {
        v_out = v;
        return true;
      }
      return false;
    }
    v = std::move(next);
  }
  return false;
}

void validate_inputs(const SourceDistribution& p, LagrangeParams s, const DistortionMatrix& d,
                     const SolverConfig& config) {
  if (d.rows() != p.size()) throw std::invalid_argument("solve: distortion rows != |X|");
  if (!(s.s1 >= 0.0) || !(s.s2 >= 0.0) || !std::isfinite(s.s1) || !std::isfinite(s.s2)) {
    throw std::invalid_argument("solve: multipliers must be finite and nonnegative");
  }
  if (s.s2 > 0.0 && p.size() != d.cols()) {
    throw std::invalid_argument("solve: perception constraint requires |X| = |Xhat|");
  }
  if (!(config.epsilon > 0.0)) throw std::invalid_argument("solve: epsilon must be positive");
  if (config.max_iters < 1) throw std::invalid_argument("solve: max_iters must be >= 1");
  if (config.q_floor < 0.0) throw std::invalid_argument("solve: q_floor must be >= 0");
  if (config.initial_q) {
    const auto& q0 = *config.initial_q;
    if (q0.size() != d.cols()) throw std::invalid_argument("solve: initial q has wrong size");
    for (double x : q0) {
      if (!(x > 0.0)) {
        throw std::invalid_argument("solve: initial q must have strictly positive components");
      }
    }
  }
}

SolveResult run_solver(const SourceDistribution& p, const FDivergence& spec, LagrangeParams s,
                       const DistortionMatrix& d, const SolverConfig& config) {
  validate_inputs(p, s, d, config);
  if (config.mode == SolverMode::kExactImplicit && d.cols() > 16) {
    throw std::invalid_argument("solve: exact-implicit mode restricted to |Xhat| <= 16");
  }

  std::vector<double> q0 = config.initial_q
                               ? *config.initial_q
                               : std::vector<double>(d.cols(), 1.0 / static_cast<double>(d.cols()));
  {
    double sum = 0.0;
    for (double x : q0) sum += x;
    if (std::abs(sum - 1.0) > kSimplexTol) {
      throw std::invalid_argument("solve: initial q must lie on the simplex");
    }
  }

  const bool exact = config.mode == SolverMode::kExactImplicit;
  bool inner_failed = false;

  auto make_state = [&](std::vector<double> q, std::size_t iter, bool clamped) {
    if (exact) {
      std::vector<double> v;
      if (!inner_fixed_point(q, p, spec, s, d, config, v)) {
        inner_failed = true;
        v = q;  // fall back to the approximate exponent for the final record
      }
      return prepare_state(std::move(q), std::move(v), p, spec, s, d, iter, clamped);
    }
    std::vector<double> v = q;
    return prepare_state(std::move(q), std::move(v), p, spec, s, d, iter, clamped);
  };

  SolverState state = make_state(std::move(q0), 0, false);

  SolveResult result{TransitionKernel::identity(1), OutputDistribution::uniform(1)};
  result.trace.reserve(256);

  std::size_t omega_increases = 0;
  double prev_omega = kInf;
  SolveStatus status = SolveStatus::kMaxIters;

  while (true) {
    const BoundsDetail b = bounds_detail(state, p, spec, s, d);
    result.trace.push_back({state.iteration, state.omega, b.distortion, b.perception,
                            b.upper, b.lower, b.upper});
    if (config.record_iterates) result.iterates.push_back(state.q);

    if (state.omega <= config.epsilon &&
        kkt_violation_of(state) <= kKktFactor * config.epsilon) {
      status = SolveStatus::kConverged;
      break;
    }
    if (inner_failed) {
      status = SolveStatus::kDiverged;
      break;
    }
    if (state.iteration > 0) {
      omega_increases = state.omega > prev_omega ? omega_increases + 1 : 0;
      if (omega_increases >= kDivergenceWindow) {
        status = SolveStatus::kDiverged;
        break;
      }
    }
    prev_omega = state.omega;
    if (state.iteration >= config.max_iters) {
      bool certifiable = true;
      for (double lc : state.log_c) {
        if (std::isinf(lc) && lc > 0.0) certifiable = false;
      }
      status = (state.clamped && !certifiable) ? SolveStatus::kSupportCollapsed
                                               : SolveStatus::kMaxIters;
      break;
    }

    try {
      bool clamped_now = false;
      std::vector<double> next = apply_update(state, config.q_floor, clamped_now);
      state = make_state(std::move(next), state.iteration + 1, state.clamped || clamped_now);
    } catch (const std::domain_error&) {
      // numeric breakdown (fully collapsed support or a degenerate
      // normalizer): keep the best-so-far state instead of failing
      status = SolveStatus::kDiverged;
      break;
    }
  }

  const BoundsDetail b = bounds_detail(state, p, spec, s, d);
  result.kernel = reconstruct_kernel(OutputDistribution(state.q), state.log_a);
  result.q = OutputDistribution(state.q);
  result.distortion = b.distortion;
  result.perception = b.perception;
  result.rate = b.upper;
  result.lower_bound = b.lower;
  result.upper_bound = b.upper;
  result.iterations = state.iteration;
  result.status = status;
  result.c = factors(state);
  result.kkt_max_violation = kkt_violation_of(state);
  result.support_clamped = state.clamped;
  return result;
}

}  // namespace

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIters: return "max-iters";
    case SolveStatus::kDiverged: return "diverged";
    case SolveStatus::kSupportCollapsed: return "support-collapsed";
  }
  return "unknown";
}

RowMatrix exponent_kernel(const SourceDistribution& p, const OutputDistribution& q,
                          const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d) {
  if (q.size() != d.cols() || p.size() != d.rows()) {
    throw std::invalid_argument("exponent_kernel: dimension mismatch");
  }
  return exponent_kernel_impl(p, q.probs(), spec, s, d);
}

SolverState initial_state(const SourceDistribution& p, const FDivergence& spec, LagrangeParams s,
                          const DistortionMatrix& d, const OutputDistribution& q0) {
  if (q0.size() != d.cols() || p.size() != d.rows()) {
    throw std::invalid_argument("initial_state: dimension mismatch");
  }
  return prepare_state(q0.probs(), q0.probs(), p, spec, s, d, 0, false);
}

SolverState iterate_once(const SolverState& state, const SourceDistribution& p,
                         const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d,
                         double q_floor) {
  bool clamped_now = false;
  std::vector<double> next = apply_update(state, q_floor, clamped_now);
  std::vector<double> v = next;
  return prepare_state(std::move(next), std::move(v), p, spec, s, d, state.iteration + 1,
                       state.clamped || clamped_now);
}

TransitionKernel reconstruct_kernel(const OutputDistribution& q, const RowMatrix& log_a) {
  if (q.size() != log_a.cols()) {
    throw std::invalid_argument("reconstruct_kernel: dimension mismatch");
  }
  const std::size_t nx = log_a.rows();
  const std::size_t nh = log_a.cols();
  std::vector<double> data(nx * nh, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    const double z = log_normalizer(std::span<const double>(q.probs()), log_a.row(x));
    for (std::size_t j = 0; j < nh; ++j) {
      if (q[j] > 0.0) data[x * nh + j] = std::exp(std::log(q[j]) + log_a(x, j) - z);
    }
  }
  return TransitionKernel(nx, nh, std::move(data));
}

KktResidual kkt_residual(const OutputDistribution& q, const SourceDistribution& p,
                         const RowMatrix& log_a) {
  if (q.size() != log_a.cols() || p.size() != log_a.rows()) {
    throw std::invalid_argument("kkt_residual: dimension mismatch");
  }
  std::vector<double> log_norm(log_a.rows());
  for (std::size_t x = 0; x < log_a.rows(); ++x) {
    log_norm[x] = log_normalizer(std::span<const double>(q.probs()), log_a.row(x));
  }
  const std::vector<double> log_c = update_log_factors(p, log_a, log_norm);
  KktResidual out;
  out.c.resize(log_c.size());
  for (std::size_t j = 0; j < log_c.size(); ++j) {
    out.c[j] = std::exp(log_c[j]);
    const double v = q[j] > 0.0 ? std::abs(out.c[j] - 1.0) : std::max(out.c[j] - 1.0, 0.0);
    out.max_violation = std::max(out.max_violation, v);
  }
  return out;
}

BoundPair bound_pair(const SolverState& state, const SourceDistribution& p,
                     const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d) {
  const BoundsDetail b = bounds_detail(state, p, spec, s, d);
  return {b.lower, b.upper};
}

double lagrangian_lower_bound(std::span<const double> lambda, const SolverState& state,
                              const SourceDistribution& p, const FDivergence& spec,
                              LagrangeParams s, const DistortionMatrix& d) {
  const std::size_t nx = d.rows();
  const std::size_t nh = d.cols();
  if (lambda.size() != nx) throw std::invalid_argument("lagrangian_lower_bound: bad lambda size");
  for (std::size_t x = 0; x < nx; ++x) {
    if (!(lambda[x] >= 0.0)) {
      throw std::invalid_argument("lagrangian_lower_bound: lambda(" + std::to_string(x) +
                                  ") is negative");
    }
  }
  // Membership: sum_x p(x) lambda(x) A(x, xhat) <= 1 for every xhat.
  for (std::size_t j = 0; j < nh; ++j) {
    double shift = -kInf;
    std::vector<double> expo(nx, -kInf);
    for (std::size_t x = 0; x < nx; ++x) {
      if (lambda[x] == 0.0) continue;
      expo[x] = std::log(p[x] * lambda[x]) + state.log_a(x, j);
      shift = std::max(shift, expo[x]);
    }
    double total = 0.0;
    if (std::isinf(shift) && shift > 0.0) {
      total = kInf;
    } else if (!std::isinf(shift)) {
      double sum = 0.0;
      for (std::size_t x = 0; x < nx; ++x) {
        if (lambda[x] != 0.0) sum += std::exp(expo[x] - shift);
      }
      total = std::exp(shift) * sum;
    }
    if (total > 1.0 + 1e-10) {
      throw std::invalid_argument("lagrangian_lower_bound: membership violated at xhat = " +
                                  std::to_string(j) + " (sum = " + std::to_string(total) + ")");
    }
  }

  const BoundsDetail b = bounds_detail(state, p, spec, s, d);
  double value = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    value += p[x] * std::log(lambda[x]);  // lambda = 0 -> -inf, a valid (vacuous) bound
  }
  value -= s.s1 * b.distortion;
  if (s.s2 != 0.0) {
    double g_sum = 0.0;
    for (std::size_t j = 0; j < nh; ++j) {
      if (!(state.q[j] > 0.0)) continue;
      const double m = std::exp(std::log(state.q[j]) + state.log_c[j]);
      const double t = p[j] / state.v[j];
      g_sum += m * (spec.f(t) - t * spec.subgradient(t));
    }
    value -= s.s2 * g_sum;
  }
  return value;
}

SolveResult solve(const SourceDistribution& p, const FDivergence& spec, LagrangeParams s,
                  const DistortionMatrix& d, const SolverConfig& config) {
  return run_solver(p, spec, s, d, config);
}

SolveResult solve_exact_implicit(const SourceDistribution& p, const FDivergence& spec,
                                 LagrangeParams s, const DistortionMatrix& d,
                                 const SolverConfig& config) {
  SolverConfig cfg = config;
  cfg.mode = SolverMode::kExactImplicit;
  return run_solver(p, spec, s, d, cfg);
}

}  // namespace rdpf
