#include "rdpf/spectral.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "test_helpers.hpp"

using namespace rdpf;
using rdpf::testing::random_simplex;

namespace {

const SourceDistribution kBer15{{0.15, 0.85}};
const DistortionMatrix kHamming2 = DistortionMatrix::hamming(2);

SolveResult converged_solve(const SourceDistribution& p, const FDivergence& spec,
                            LagrangeParams s, const DistortionMatrix& d, double eps = 1e-12) {
  SolverConfig config;
  config.epsilon = eps;
  SolveResult r = solve(p, spec, s, d, config);
  REQUIRE(r.status == SolveStatus::kConverged);
  return r;
}

}  // namespace

TEST_CASE("assemble_m: constant exponent gives the rank-one matrix q 1^T") {
  std::mt19937 rng(37);
  const std::vector<double> qv = random_simplex(rng, 3, 1e-2);
  const OutputDistribution q(qv);
  const SourceDistribution p(random_simplex(rng, 3, 1e-2));
  const RowMatrix ones(3, 3, 0.0);  // log A == 0
  const Eigen::MatrixXd m = assemble_m(q, p, ones);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(m(i, j) == doctest::Approx(qv[i]).epsilon(1e-12));
  }
  const auto eigs = eigenvalues(m);
  CHECK(std::abs(eigs[0] - std::complex<double>(1.0, 0.0)) <= 1e-10);
  for (std::size_t k = 1; k < eigs.size(); ++k) CHECK(std::abs(eigs[k]) <= 1e-10);
}

TEST_CASE("assemble_m: column sums reproduce the update factors at a fixed point") {
  const SolveResult r = converged_solve(kBer15, FDivergence::kl(), {1.0, 0.2}, kHamming2);
  const RowMatrix log_a = exponent_kernel(kBer15, r.q, FDivergence::kl(), {1.0, 0.2}, kHamming2);
  const Eigen::MatrixXd m = assemble_m(r.q, kBer15, log_a);
  for (int j = 0; j < m.cols(); ++j) {
    CHECK(m.col(j).sum() == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("assemble_m: hand-computed binary symmetric instance") {
  // p = (1/2, 1/2), s1 = ln 2, Hamming: q* = (1/2, 1/2), A = [[1, 1/2], [1/2, 1]],
  // M = [[5/9, 4/9], [4/9, 5/9]], eigenvalues {1, 1/9}.
  const SourceDistribution p({0.5, 0.5});
  const OutputDistribution q({0.5, 0.5});
  const RowMatrix log_a = exponent_kernel(p, q, FDivergence::kl(), {std::log(2.0), 0.0},
                                          kHamming2);
  const Eigen::MatrixXd m = assemble_m(q, p, log_a);
  CHECK(m(0, 0) == doctest::Approx(5.0 / 9.0).epsilon(1e-10));
  CHECK(m(0, 1) == doctest::Approx(4.0 / 9.0).epsilon(1e-10));
  CHECK(m(1, 0) == doctest::Approx(4.0 / 9.0).epsilon(1e-10));
  CHECK(m(1, 1) == doctest::Approx(5.0 / 9.0).epsilon(1e-10));
  const auto eigs = eigenvalues(m);
  CHECK(std::abs(eigs[0].real() - 1.0) <= 1e-10);
  CHECK(std::abs(eigs[1].real() - 1.0 / 9.0) <= 1e-10);
}

TEST_CASE("assemble_gamma closed forms") {
  const SourceDistribution p({0.15, 0.85});

  // s2 = 0: zero matrix regardless of the generator
  const auto zero = assemble_gamma(OutputDistribution({0.3, 0.7}), p, FDivergence::kl(), 0.0);
  REQUIRE(zero.has_value());
  CHECK(zero->isZero(0.0));

  // KL: s2 p / q*
  const auto kl = assemble_gamma(OutputDistribution({0.3, 0.7}), p, FDivergence::kl(), 0.5);
  REQUIRE(kl.has_value());
  CHECK((*kl)(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK((*kl)(1) == doctest::Approx(0.5 * 0.85 / 0.7).epsilon(1e-12));

  // chi2 at q* = p: 2 s2
  const auto chi = assemble_gamma(OutputDistribution({0.15, 0.85}), p,
                                  FDivergence::chi_squared(), 0.7);
  REQUIRE(chi.has_value());
  CHECK((*chi)(0) == doctest::Approx(1.4).epsilon(1e-12));
  CHECK((*chi)(1) == doctest::Approx(1.4).epsilon(1e-12));

  // TV has no curvature
  CHECK_FALSE(assemble_gamma(OutputDistribution({0.3, 0.7}), p, FDivergence::total_variation(),
                             0.5)
                  .has_value());
}

TEST_CASE("gamma entries are nonnegative for convex generators") {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const SourceDistribution p(random_simplex(rng, n, 1e-3));
    const OutputDistribution q(random_simplex(rng, n, 1e-3));
    for (const FDivergence& spec : {FDivergence::kl(), FDivergence::chi_squared()}) {
      const auto gamma = assemble_gamma(q, p, spec, 0.3 + trial * 0.05);
      REQUIRE(gamma.has_value());
      for (Eigen::Index i = 0; i < gamma->size(); ++i) CHECK((*gamma)(i) >= -1e-12);
    }
  }
}

TEST_CASE("jacobian_approx and jacobian_exact coincide when gamma vanishes") {
  const SolveResult r = converged_solve(kBer15, FDivergence::kl(), {1.5, 0.0}, kHamming2);
  const RowMatrix log_a = exponent_kernel(kBer15, r.q, FDivergence::kl(), {1.5, 0.0}, kHamming2);
  const Eigen::MatrixXd m = assemble_m(r.q, kBer15, log_a);
  const Eigen::VectorXd gamma = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd ja = jacobian_approx(m, gamma);
  const auto je = jacobian_exact(m, gamma);
  REQUIRE(je.has_value());
  CHECK((ja - *je).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((ja - (Eigen::MatrixXd::Identity(2, 2) - m)).cwiseAbs().maxCoeff() <= 1e-12);

  // M = I gives one-step convergence
  CHECK(jacobian_approx(Eigen::MatrixXd::Identity(2, 2), gamma).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jacobian_exact satisfies its defining relation on random inputs") {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 3;
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) b(i, j) = uni(rng) - 0.3;
    }
    const Eigen::MatrixXd m = 0.5 * (b * b.transpose()) / n;  // PSD-ish, modest norm
    Eigen::VectorXd gamma(n);
    for (int i = 0; i < n; ++i) gamma(i) = uni(rng);
    const auto j = jacobian_exact(m, gamma);
    REQUIRE(j.has_value());
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd residual =
        *j - (eye - m) * (eye - Eigen::MatrixXd(gamma.asDiagonal()) * *j);
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("eigenvalue ranges of M at converged fixed points") {
  for (const auto& [name, s] : {std::pair{"kl", LagrangeParams{1.0, 0.2}},
                                std::pair{"kl", LagrangeParams{2.0, 0.0}},
                                std::pair{"chi2", LagrangeParams{1.5, 0.1}}}) {
    const FDivergence spec = FDivergence::from_name(name);
    const SolveResult r = converged_solve(kBer15, spec, s, kHamming2);
    const RowMatrix log_a = exponent_kernel(kBer15, r.q, spec, s, kHamming2);
    const auto eigs = eigenvalues(assemble_m(r.q, kBer15, log_a));
    for (const auto& e : eigs) {
      CHECK(std::abs(e.imag()) <= 1e-10);
      CHECK(e.real() > 1e-12);        // full-rank Hamming exponent: strictly positive
      CHECK(e.real() <= 1.0 + 1e-9);  // never exceeds one at a fixed point
    }
  }
}

TEST_CASE("classical convergence: eigenvalues of I - M and the error envelope") {
  SolverConfig config;
  config.epsilon = 1e-13;
  const LagrangeParams s{2.0, 0.0};
  const SolveResult r = solve(kBer15, FDivergence::kl(), s, kHamming2, config);
  REQUIRE(r.status == SolveStatus::kConverged);

  const SpectralReport report = analyze(r, kBer15, FDivergence::kl(), s, kHamming2);
  REQUIRE(report.j_approx.has_value());
  for (const auto& e : report.eigenvalues_approx) {
    CHECK(e.real() >= -1e-9);
    CHECK(e.real() < 1.0);
  }

  // the empirical contraction matches the spectral radius of I - M
  REQUIRE(report.empirical_rate.has_value());
  CHECK(*report.empirical_rate ==
        doctest::Approx(report.spectral_radius_approx).epsilon(0.10));

  // error sequence dominated by a fitted K gamma^n
  const double gamma = report.spectral_radius_approx;
  double k_fit = 0.0;
  std::vector<double> dists;
  for (const auto& qn : r.iterates) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < qn.size(); ++j) {
      d2 += (qn[j] - r.q[j]) * (qn[j] - r.q[j]);
    }
    dists.push_back(std::sqrt(d2));
  }
  for (std::size_t n = 0; n < dists.size(); ++n) {
    if (dists[n] > 1e-13) k_fit = std::max(k_fit, dists[n] / std::pow(gamma, double(n)));
  }
  for (std::size_t n = 0; n < dists.size(); ++n) {
    CHECK(dists[n] <= k_fit * std::pow(gamma, double(n)) * (1.0 + 1e-9) + 1e-300);
  }
}

TEST_CASE("empirical rate trivia") {
  // zero multipliers: immediate fixed point, exact convergence
  const SolveResult r = solve(kBer15, FDivergence::kl(), {0.0, 0.0}, kHamming2);
  const auto rate = empirical_rate(r.iterates, r.q.probs());
  REQUIRE(rate.has_value());
  CHECK(*rate == 0.0);

  // too few usable iterates: unavailable
  std::vector<std::vector<double>> short_trace(8, {0.4, 0.6});
  short_trace[0] = {0.9, 0.1};
  CHECK_FALSE(empirical_rate(short_trace, std::vector<double>{0.4, 0.6}).has_value());
}

TEST_CASE("empirical rate tracks the spectral radius as s2 approaches instability") {
  SolverConfig config;
  config.epsilon = 1e-12;
  // at s1 = 2 the stable window ends near s2 = 3; the spectral radius dips
  // and then climbs back toward 1, and the fitted rate follows it
  std::vector<double> radii;
  for (double s2 : {0.0, 0.2, 2.0}) {
    const LagrangeParams s{2.0, s2};
    const SolveResult r = solve(kBer15, FDivergence::kl(), s, kHamming2, config);
    REQUIRE(r.status == SolveStatus::kConverged);
    const SpectralReport report = analyze(r, kBer15, FDivergence::kl(), s, kHamming2);
    REQUIRE(report.empirical_rate.has_value());
    CHECK(*report.empirical_rate ==
          doctest::Approx(report.spectral_radius_approx).epsilon(0.10));
    CHECK(*report.empirical_rate < 1.0);
    radii.push_back(report.spectral_radius_approx);
  }
  CHECK(radii[2] > radii[1]);  // climbing back toward 1 near the threshold
}

TEST_CASE("analyze reports explicit statuses") {
  // TV with s2 > 0: gamma unavailable, jacobians skipped, M still present
  const SolveResult tv = converged_solve(kBer15, FDivergence::total_variation(), {1.0, 0.4},
                                         kHamming2);
  const SpectralReport report =
      analyze(tv, kBer15, FDivergence::total_variation(), {1.0, 0.4}, kHamming2);
  CHECK(report.status == "gamma-unavailable");
  CHECK_FALSE(report.j_approx.has_value());
  CHECK(report.eigenvalues_m.size() == 2);

  // reduced support is out of scope for the linearization
  const SourceDistribution p3({0.6, 0.3, 0.1});
  const DistortionMatrix d3(3, 3, {0.0, 1.0, 3.0, 1.0, 0.0, 3.0, 1.0, 1.0, 3.0});
  SolverConfig config;
  config.epsilon = 1e-11;
  config.q_floor = 1e-8;
  const SolveResult collapsed =
      solve(p3, FDivergence::total_variation(), {1.0, 0.15}, d3, config);
  REQUIRE(collapsed.status == SolveStatus::kConverged);
  const SpectralReport reduced =
      analyze(collapsed, p3, FDivergence::total_variation(), {1.0, 0.15}, d3);
  CHECK(reduced.status == "reduced-support");
}
