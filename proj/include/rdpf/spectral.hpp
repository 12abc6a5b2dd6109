#ifndef RDPF_SPECTRAL_HPP
#define RDPF_SPECTRAL_HPP

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "rdpf/solver.hpp"

namespace rdpf {

/// Linearization of the update map at a converged fixed point q*:
/// M and Gamma assemble the Jacobians J = (I - M)(I - Gamma J) of the exact
/// recursion and J_a = (I - M)(I - Gamma) of the approximate scheme. The
/// spectral radius of J_a governs the contraction rate and the admissible
/// range of s2.
struct SpectralReport {
  Eigen::MatrixXd m;
  std::optional<Eigen::VectorXd> gamma;       // diagonal; unavailable for TV with s2 > 0
  std::optional<Eigen::MatrixXd> j_approx;    // (I - M)(I - Gamma)
  std::optional<Eigen::MatrixXd> j_exact;     // solves J = (I - M)(I - Gamma J)
  std::vector<std::complex<double>> eigenvalues_m;
  std::vector<std::complex<double>> eigenvalues_approx;
  std::vector<std::complex<double>> eigenvalues_exact;
  double spectral_radius_approx = std::numeric_limits<double>::quiet_NaN();
  double spectral_radius_exact = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> empirical_rate;
  std::string status;  // "ok" | "gamma-unavailable" | "jexact-singular" | "reduced-support"
};

/// M(i, j) = q*(i) sum_x p(x) A(x,i) A(x,j) / (sum_k q*(k) A(x,k))^2, both
/// indices over the reconstruction alphabet, computed through log-domain
/// normalizers. Requires finite log_a (full-support fixed points).
Eigen::MatrixXd assemble_m(const OutputDistribution& q_star, const SourceDistribution& p,
                           const RowMatrix& log_a);

/// Gamma(i, i) = s2 q*(i) f''(p(i)/q*(i)) p(i)^2 / q*(i)^3. Zero when s2 = 0
/// regardless of f''; nullopt when s2 > 0 and f'' is unavailable (TV).
std::optional<Eigen::VectorXd> assemble_gamma(const OutputDistribution& q_star,
                                              const SourceDistribution& p,
                                              const FDivergence& spec, double s2);

/// J_a = (I - M)(I - Gamma).
Eigen::MatrixXd jacobian_approx(const Eigen::MatrixXd& m, const Eigen::VectorXd& gamma);

/// Solves J = (I - M)(I - Gamma J), i.e. (I + (I - M) Gamma) J = I - M.
/// Returns nullopt when the system is singular or the residual
/// ||J - (I-M)(I-Gamma J)||_inf exceeds 1e-10.
std::optional<Eigen::MatrixXd> jacobian_exact(const Eigen::MatrixXd& m,
                                              const Eigen::VectorXd& gamma);

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& a);

double spectral_radius(const std::vector<std::complex<double>>& eigs);

/// Fitted per-iteration contraction: the least-squares slope of
/// ln ||q^(n) - q*|| against n over the tail of the iterate trace,
/// exponentiated. Returns 0 for immediate fixed points and nullopt when
/// fewer than 20 usable iterates remain.
std::optional<double> empirical_rate(const std::vector<std::vector<double>>& iterates,
                                     std::span<const double> q_star);

/// Assembles the full report at a converged solve.
SpectralReport analyze(const SolveResult& result, const SourceDistribution& p,
                       const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d);

}  // namespace rdpf

#endif  // RDPF_SPECTRAL_HPP
