#include "rdpf/solver.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "rdpf/oracles.hpp"
#include "test_helpers.hpp"

using namespace rdpf;
using rdpf::testing::binary_entropy_nats;
using rdpf::testing::random_simplex;

namespace {

const SourceDistribution kBer15{{0.15, 0.85}};
const DistortionMatrix kHamming2 = DistortionMatrix::hamming(2);

SolverConfig tight_config(double eps = 1e-11) {
  SolverConfig config;
  config.epsilon = eps;
  return config;
}

// Reference classical Blahut-Arimoto step in plain linear arithmetic.
std::vector<double> classical_ba_step(const std::vector<double>& q, const std::vector<double>& p,
                                      const DistortionMatrix& d, double s1) {
  const std::size_t nx = d.rows();
  const std::size_t nh = d.cols();
  std::vector<double> next(nh, 0.0);
  for (std::size_t j = 0; j < nh; ++j) {
    double c = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
      double norm = 0.0;
      for (std::size_t i = 0; i < nh; ++i) norm += q[i] * std::exp(-s1 * d(x, i));
      c += p[x] * std::exp(-s1 * d(x, j)) / norm;
    }
    next[j] = q[j] * c;
  }
  return next;
}

}  // namespace

TEST_CASE("exponent_kernel closed forms") {
  const OutputDistribution q0 = OutputDistribution::uniform(2);

  RowMatrix zero = exponent_kernel(kBer15, q0, FDivergence::kl(), {0.0, 0.0}, kHamming2);
  for (double v : zero.data()) CHECK(v == 0.0);

  RowMatrix dist_only = exponent_kernel(kBer15, q0, FDivergence::kl(), {1.0, 0.0}, kHamming2);
  CHECK(dist_only(0, 0) == 0.0);
  CHECK(dist_only(0, 1) == -1.0);
  CHECK(dist_only(1, 0) == -1.0);
  CHECK(dist_only(1, 1) == 0.0);

  // KL with s = (0, 1): column value +p(xhat)/q(xhat)
  const SourceDistribution p_half({0.5, 0.5});
  RowMatrix kl_col = exponent_kernel(p_half, OutputDistribution({0.25, 0.75}),
                                     FDivergence::kl(), {0.0, 1.0}, kHamming2);
  for (std::size_t x = 0; x < 2; ++x) {
    CHECK(kl_col(x, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(kl_col(x, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("iterate_once: zero multipliers give an immediate fixed point") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const OutputDistribution q0(random_simplex(rng, 2, 1e-2));
    SolverState st = initial_state(kBer15, FDivergence::kl(), {0.0, 0.0}, kHamming2, q0);
    CHECK(std::abs(st.omega) <= 1e-12);
    SolverState next = iterate_once(st, kBer15, FDivergence::kl(), {0.0, 0.0}, kHamming2);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(next.q[j] == doctest::Approx(q0[j]).epsilon(1e-13));
      CHECK(std::exp(st.log_c[j]) == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
}

TEST_CASE("iterate_once: the uniform marginal is a symmetric fixed point") {
  const SourceDistribution p({0.5, 0.5});
  for (const LagrangeParams s : {LagrangeParams{0.7, 0.0}, LagrangeParams{1.3, 0.4}}) {
    SolverState st = initial_state(p, FDivergence::kl(), s, kHamming2,
                                   OutputDistribution::uniform(2));
    for (int n = 0; n < 50; ++n) {
      st = iterate_once(st, p, FDivergence::kl(), s, kHamming2);
      CHECK(st.q[0] == doctest::Approx(0.5).epsilon(1e-13));
      CHECK(st.q[1] == doctest::Approx(0.5).epsilon(1e-13));
    }
  }
}

TEST_CASE("iterate_once converges to the penalized grid-search optimum") {
  const LagrangeParams s{1.0, 0.5};
  const FDivergence tv = FDivergence::total_variation();
  SolverState st = initial_state(kBer15, tv, s, kHamming2, OutputDistribution::uniform(2));
  for (int n = 0; n < 200; ++n) st = iterate_once(st, kBer15, tv, s, kHamming2);

  const TransitionKernel oracle_kernel = grid_penalized_argmin(kBer15, tv, kHamming2, s, 2e-3);
  const OutputDistribution oracle_q = induced_marginal(kBer15, oracle_kernel);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::abs(st.q[j] - oracle_q[j]) <= 1e-4);
  }
}

TEST_CASE("reconstruct_kernel") {
  const OutputDistribution q_half({0.5, 0.5});

  // A == 1: every row equals q
  RowMatrix ones(2, 2, 0.0);
  TransitionKernel flat = reconstruct_kernel(q_half, ones);
  for (std::size_t x = 0; x < 2; ++x) {
    CHECK(flat(x, 0) == doctest::Approx(0.5));
    CHECK(flat(x, 1) == doctest::Approx(0.5));
  }

  // s1 = ln 2 on Hamming: diagonal 1/(1 + 0.5) = 2/3
  const SourceDistribution p({0.5, 0.5});
  RowMatrix log_a = exponent_kernel(p, q_half, FDivergence::kl(), {std::log(2.0), 0.0}, kHamming2);
  TransitionKernel q = reconstruct_kernel(q_half, log_a);
  CHECK(q(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(q(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("marginal consistency at converged fixed points") {
  for (const auto& [name, s] : {std::pair{"tv", LagrangeParams{2.0, 0.4}},
                                std::pair{"kl", LagrangeParams{1.0, 0.3}},
                                std::pair{"chi2", LagrangeParams{1.5, 0.2}}}) {
    const FDivergence spec = FDivergence::from_name(name);
    const SolveResult r = solve(kBer15, spec, s, kHamming2, tight_config());
    REQUIRE(r.status == SolveStatus::kConverged);
    const OutputDistribution qm = induced_marginal(kBer15, r.kernel);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::abs(qm[j] - r.q[j]) <= 1e-8);
    }
  }
}

TEST_CASE("solve: zero multipliers give the zero-rate point") {
  const SolveResult r = solve(kBer15, FDivergence::total_variation(), {0.0, 0.0}, kHamming2);
  CHECK(r.status == SolveStatus::kConverged);
  CHECK(r.iterations == 0);
  CHECK(std::abs(r.rate) <= 1e-12);
  // D at the uniform start: E_{p x q0}[d] = 0.5 for Hamming
  CHECK(r.distortion == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.perception ==
        doctest::Approx(divergence(FDivergence::total_variation(), kBer15,
                                   OutputDistribution::uniform(2)))
            .epsilon(1e-10));
}

TEST_CASE("solve: classical binary point at s1 = ln 2") {
  const SourceDistribution p({0.5, 0.5});
  const SolveResult r =
      solve(p, FDivergence::kl(), {std::log(2.0), 0.0}, kHamming2, tight_config());
  REQUIRE(r.status == SolveStatus::kConverged);
  CHECK(r.distortion == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(r.rate ==
        doctest::Approx(std::log(2.0) - binary_entropy_nats(1.0 / 3.0)).epsilon(1e-9));
  CHECK(r.rate >= -1e-9);
  CHECK(r.rate <= std::log(2.0) + 1e-9);
}

TEST_CASE("solve: binary TV points match the closed form at their own (D, P)") {
  const FDivergence tv = FDivergence::total_variation();
  for (double s2 : {0.1, 0.3, 0.6}) {
    const SolveResult r = solve(kBer15, tv, {2.0, s2}, kHamming2, tight_config());
    REQUIRE(r.status == SolveStatus::kConverged);
    const double reference = closed_form_binary_tv(0.15, r.distortion, r.perception);
    CHECK(std::abs(r.rate - reference) <= 1e-7);
  }
}

TEST_CASE("kkt_residual") {
  // A == 1: c == 1, zero violation
  SolverState st = initial_state(kBer15, FDivergence::kl(), {0.0, 0.0}, kHamming2,
                                 OutputDistribution::uniform(2));
  KktResidual flat = kkt_residual(OutputDistribution::uniform(2), kBer15, st.log_a);
  CHECK(flat.max_violation <= 1e-12);
  CHECK(flat.c[0] == doctest::Approx(1.0).epsilon(1e-12));

  // converged solves certify within 10 eps
  for (double eps : {1e-9, 1e-11}) {
    SolverConfig config;
    config.epsilon = eps;
    const SolveResult r = solve(kBer15, FDivergence::total_variation(), {1.0, 0.5}, kHamming2,
                                config);
    REQUIRE(r.status == SolveStatus::kConverged);
    CHECK(r.kkt_max_violation <= 10.0 * eps);
  }

  // a start concentrated off the optimum shows c > 1 early (diagnostic)
  SolverState skew = initial_state(kBer15, FDivergence::total_variation(), {1.0, 0.5}, kHamming2,
                                   OutputDistribution({0.999, 0.001}));
  const KktResidual early = kkt_residual(OutputDistribution({0.999, 0.001}), kBer15, skew.log_a);
  CHECK((early.c[0] > 1.0 || early.c[1] > 1.0));
}

TEST_CASE("bound identity and sandwich along the trajectory") {
  const FDivergence tv = FDivergence::total_variation();
  const LagrangeParams s{1.0, 0.5};
  SolverState st = initial_state(kBer15, tv, s, kHamming2, OutputDistribution::uniform(2));
  for (int n = 0; n < 60; ++n) {
    const BoundPair b = bound_pair(st, kBer15, tv, s, kHamming2);
    CHECK(std::abs((b.upper - b.lower) - st.omega) <= 1e-12);
    CHECK(st.omega >= -1e-12);

    // the upper bound is the rate of the current kernel
    const TransitionKernel kernel = reconstruct_kernel(OutputDistribution(st.q), st.log_a);
    const double info = mutual_information(kBer15, kernel);
    CHECK(std::abs(b.upper - info) <= 1e-9);
    CHECK(b.lower <= info + 1e-12);
    st = iterate_once(st, kBer15, tv, s, kHamming2);
  }
}

TEST_CASE("bound_pair trivials") {
  SolverState st = initial_state(kBer15, FDivergence::kl(), {0.0, 0.0}, kHamming2,
                                 OutputDistribution::uniform(2));
  const BoundPair b = bound_pair(st, kBer15, FDivergence::kl(), {0.0, 0.0}, kHamming2);
  CHECK(std::abs(b.lower) <= 1e-12);
  CHECK(std::abs(b.upper) <= 1e-12);

  SolverConfig config = tight_config();
  const SolveResult r = solve(kBer15, FDivergence::kl(), {1.0, 0.3}, kHamming2, config);
  REQUIRE(r.status == SolveStatus::kConverged);
  CHECK(r.upper_bound - r.lower_bound <= config.epsilon);
  CHECK(r.lower_bound <= r.rate);
  CHECK(r.rate <= r.upper_bound);
}

TEST_CASE("lagrangian_lower_bound reproduces the certified lower bound") {
  const FDivergence tv = FDivergence::total_variation();
  const LagrangeParams s{1.0, 0.5};
  SolverState st = initial_state(kBer15, tv, s, kHamming2, OutputDistribution::uniform(2));
  for (int n = 0; n < 5; ++n) st = iterate_once(st, kBer15, tv, s, kHamming2);

  double lc_max = -std::numeric_limits<double>::infinity();
  for (double lc : st.log_c) lc_max = std::max(lc_max, lc);
  std::vector<double> lambda(2);
  for (std::size_t x = 0; x < 2; ++x) lambda[x] = std::exp(-(lc_max + st.log_norm[x]));

  const double bound = lagrangian_lower_bound(lambda, st, kBer15, tv, s, kHamming2);
  const BoundPair b = bound_pair(st, kBer15, tv, s, kHamming2);
  CHECK(std::abs(bound - b.lower) <= 1e-10);

  // scaling by alpha < 1 stays feasible and loosens the bound by ln alpha
  const double alpha = 0.25;
  std::vector<double> scaled = lambda;
  for (double& v : scaled) v *= alpha;
  const double looser = lagrangian_lower_bound(scaled, st, kBer15, tv, s, kHamming2);
  CHECK(looser == doctest::Approx(bound + std::log(alpha)).epsilon(1e-12));
  CHECK(looser < bound);

  // infeasible multipliers are rejected with the violating symbol reported
  std::vector<double> bad = lambda;
  for (double& v : bad) v *= 1.0 + 1e-3;
  CHECK_THROWS_AS(lagrangian_lower_bound(bad, st, kBer15, tv, s, kHamming2),
                  std::invalid_argument);
  std::vector<double> negative = lambda;
  negative[0] = -negative[0];
  CHECK_THROWS_AS(lagrangian_lower_bound(negative, st, kBer15, tv, s, kHamming2),
                  std::invalid_argument);
}

TEST_CASE("simplex preservation and omega nonnegativity across random instances") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const SourceDistribution p(random_simplex(rng, n, 5e-2));
    const DistortionMatrix d = DistortionMatrix::hamming(n);
    const LagrangeParams s{0.5 + trial * 0.3, trial % 2 == 0 ? 0.0 : 0.2};
    const FDivergence spec =
        trial % 3 == 0 ? FDivergence::kl()
                       : (trial % 3 == 1 ? FDivergence::total_variation()
                                         : FDivergence::chi_squared());
    SolverState st = initial_state(p, spec, s, d, OutputDistribution(random_simplex(rng, n, 1e-2)));
    for (int it = 0; it < 300; ++it) {
      st = iterate_once(st, p, spec, s, d);
      double sum = 0.0;
      for (double v : st.q) sum += v;
      CHECK(std::abs(sum - 1.0) <= 1e-10);
      CHECK(st.omega >= -1e-12);
    }
  }
}

TEST_CASE("with s2 = 0 the trajectory matches classical Blahut-Arimoto step for step") {
  const double s1 = 2.0;
  SolverConfig config;
  config.epsilon = 1e-300;  // never stop on omega
  config.max_iters = 200;
  const SolveResult r = solve(kBer15, FDivergence::kl(), {s1, 0.0}, kHamming2, config);
  REQUIRE(r.iterates.size() == 201);

  std::vector<double> q{0.5, 0.5};
  for (std::size_t n = 0; n < r.iterates.size(); ++n) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(r.iterates[n][j] - q[j]) <= 1e-12);
    q = classical_ba_step(q, {0.15, 0.85}, kHamming2, s1);
  }
}

TEST_CASE("rate output agrees with the mutual information of the output kernel") {
  SolverConfig config;
  config.epsilon = 1e-10;
  for (const auto& [name, s] : {std::pair{"tv", LagrangeParams{1.5, 0.6}},
                                std::pair{"kl", LagrangeParams{1.0, 0.25}},
                                std::pair{"chi2", LagrangeParams{2.0, 0.15}}}) {
    const SolveResult r = solve(kBer15, FDivergence::from_name(name), s, kHamming2, config);
    REQUIRE(r.status == SolveStatus::kConverged);
    CHECK(std::abs(r.rate - mutual_information(kBer15, r.kernel)) <= 10.0 * config.epsilon);
  }
}

TEST_CASE("divergence monitor: an unstable perception multiplier does not converge") {
  SolverConfig config;
  config.epsilon = 1e-11;
  config.max_iters = 4000;
  const SolveResult r = solve(kBer15, FDivergence::kl(), {1.0, 12.0}, kHamming2, config);
  CHECK(r.status != SolveStatus::kConverged);
}

TEST_CASE("support collapse: dominated reconstruction symbol dies cleanly") {
  const SourceDistribution p({0.6, 0.3, 0.1});
  const DistortionMatrix d(3, 3, {0.0, 1.0, 3.0, 1.0, 0.0, 3.0, 1.0, 1.0, 3.0});
  SolverConfig config;
  config.epsilon = 1e-11;
  config.q_floor = 1e-8;
  const SolveResult r = solve(p, FDivergence::total_variation(), {1.0, 0.15}, d, config);
  REQUIRE(r.status == SolveStatus::kConverged);
  CHECK(r.support_clamped);
  CHECK(r.q[2] == 0.0);
  CHECK(r.c[2] < 1.0 - 1e-6);  // strictly slack at the dead symbol
  CHECK(r.kkt_max_violation <= 10.0 * config.epsilon);
}

TEST_CASE("exact-implicit with s2 = 0 coincides with the approximate scheme exactly") {
  SolverConfig config;
  config.epsilon = 1e-300;
  config.max_iters = 120;
  const SolveResult a = solve(kBer15, FDivergence::kl(), {1.7, 0.0}, kHamming2, config);
  config.mode = SolverMode::kExactImplicit;
  const SolveResult e = solve(kBer15, FDivergence::kl(), {1.7, 0.0}, kHamming2, config);
  REQUIRE(a.iterates.size() == e.iterates.size());
  for (std::size_t n = 0; n < a.iterates.size(); ++n) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(a.iterates[n][j] == e.iterates[n][j]);
  }
}

TEST_CASE("exact-implicit agrees with the approximate scheme at shared fixed points") {
  SolverConfig config = tight_config();
  for (const auto& [name, s] : {std::pair{"tv", LagrangeParams{2.0, 0.4}},
                                std::pair{"kl", LagrangeParams{1.0, 0.3}}}) {
    const FDivergence spec = FDivergence::from_name(name);
    const SolveResult a = solve(kBer15, spec, s, kHamming2, config);
    const SolveResult e = solve_exact_implicit(kBer15, spec, s, kHamming2, config);
    REQUIRE(a.status == SolveStatus::kConverged);
    REQUIRE(e.status == SolveStatus::kConverged);
    CHECK(std::abs(a.distortion - e.distortion) <= 1e-6);
    CHECK(std::abs(a.perception - e.perception) <= 1e-6);
    CHECK(std::abs(a.rate - e.rate) <= 1e-6);
  }
}

TEST_CASE("exact-implicit matches the penalized grid oracle") {
  const LagrangeParams s{1.0, 0.3};
  const SolveResult r =
      solve_exact_implicit(kBer15, FDivergence::kl(), s, kHamming2, tight_config());
  REQUIRE(r.status == SolveStatus::kConverged);
  const TransitionKernel oracle_kernel =
      grid_penalized_argmin(kBer15, FDivergence::kl(), kHamming2, s, 2e-3);
  const OutputDistribution oracle_q = induced_marginal(kBer15, oracle_kernel);
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(r.q[j] - oracle_q[j]) <= 1e-4);

  const double oracle_rate = mutual_information(kBer15, oracle_kernel);
  CHECK(std::abs(r.rate - oracle_rate) <= 1e-4);
}

TEST_CASE("exact-implicit rejects large reconstruction alphabets") {
  const std::size_t n = 17;
  std::vector<double> uniform(n, 1.0 / n);
  const SourceDistribution p(uniform);
  CHECK_THROWS_AS(
      solve_exact_implicit(p, FDivergence::kl(), {1.0, 0.0}, DistortionMatrix::hamming(n)),
      std::invalid_argument);
}

TEST_CASE("solve validates inputs") {
  CHECK_THROWS_AS(solve(kBer15, FDivergence::kl(), {-1.0, 0.0}, kHamming2),
                  std::invalid_argument);
  SolverConfig config;
  config.initial_q = std::vector<double>{0.5, 0.5, 0.0};
  CHECK_THROWS_AS(solve(kBer15, FDivergence::kl(), {1.0, 0.0}, kHamming2, config),
                  std::invalid_argument);
  // rectangular problems cannot carry a perception constraint
  const DistortionMatrix wide(2, 3, {0.0, 1.0, 1.0, 1.0, 0.0, 1.0});
  CHECK_THROWS_AS(solve(kBer15, FDivergence::kl(), {1.0, 0.5}, wide), std::invalid_argument);
  CHECK_NOTHROW(solve(kBer15, FDivergence::kl(), {1.0, 0.0}, wide));
}
