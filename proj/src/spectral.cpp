#include "rdpf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdpf {

namespace {

constexpr double kUsableFloor = 1e-13;

}  // namespace

Eigen::MatrixXd assemble_m(const OutputDistribution& q_star, const SourceDistribution& p,
                           const RowMatrix& log_a) {
  const std::size_t nx = log_a.rows();
  const std::size_t nh = log_a.cols();
  if (q_star.size() != nh || p.size() != nx) {
    throw std::invalid_argument("assemble_m: dimension mismatch");
  }
  for (double v : log_a.data()) {
    if (std::isinf(v) && v > 0.0) {
      throw std::domain_error("assemble_m: infinite exponent entry (reduced support)");
    }
  }
  // B(x, i) = A(x, i) / sum_k q*(k) A(x, k)
  Eigen::MatrixXd b(nx, nh);
  for (std::size_t x = 0; x < nx; ++x) {
    const double z = log_normalizer(std::span<const double>(q_star.probs()), log_a.row(x));
    for (std::size_t i = 0; i < nh; ++i) b(x, i) = std::exp(log_a(x, i) - z);
  }
  Eigen::MatrixXd m(nh, nh);
  for (std::size_t i = 0; i < nh; ++i) {
    for (std::size_t j = 0; j < nh; ++j) {
      double sum = 0.0;
      for (std::size_t x = 0; x < nx; ++x) sum += p[x] * b(x, i) * b(x, j);
      m(i, j) = q_star[i] * sum;
    }
  }
  return m;
}

std::optional<Eigen::VectorXd> assemble_gamma(const OutputDistribution& q_star,
                                              const SourceDistribution& p,
                                              const FDivergence& spec, double s2) {
  if (q_star.size() != p.size()) throw std::invalid_argument("assemble_gamma: dimension mismatch");
  const auto n = static_cast<Eigen::Index>(q_star.size());
  if (s2 == 0.0) return Eigen::VectorXd::Zero(n);
  if (!spec.has_second_derivative()) return std::nullopt;
  Eigen::VectorXd gamma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    gamma(i) = s2 * q_star[idx] * perception_curvature(spec, p, q_star, idx);
  }
  return gamma;
}

Eigen::MatrixXd jacobian_approx(const Eigen::MatrixXd& m, const Eigen::VectorXd& gamma) {
  if (m.rows() != m.cols() || gamma.size() != m.rows()) {
    throw std::invalid_argument("jacobian_approx: shape mismatch");
  }
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  return (eye - m) * (eye - Eigen::MatrixXd(gamma.asDiagonal()));
}

std::optional<Eigen::MatrixXd> jacobian_exact(const Eigen::MatrixXd& m,
                                              const Eigen::VectorXd& gamma) {
  if (m.rows() != m.cols() || gamma.size() != m.rows()) {
    throw std::invalid_argument("jacobian_exact: shape mismatch");
  }
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  const Eigen::MatrixXd im = eye - m;
  const Eigen::MatrixXd a = eye + im * gamma.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (!qr.isInvertible()) return std::nullopt;
  Eigen::MatrixXd j = qr.solve(im);
  const Eigen::MatrixXd residual =
      j - im * (eye - Eigen::MatrixXd(gamma.asDiagonal()) * j);
  if (residual.cwiseAbs().maxCoeff() > 1e-10) return std::nullopt;
  return j;
}

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
  // deterministic order: descending modulus, then descending real part
  std::sort(out.begin(), out.end(), [](const auto& lhs, const auto& rhs) {
    const double la = std::abs(lhs), lb = std::abs(rhs);
    if (la != lb) return la > lb;
    return lhs.real() > rhs.real();
  });
  return out;
}

double spectral_radius(const std::vector<std::complex<double>>& eigs) {
  double r = 0.0;
  for (const auto& e : eigs) r = std::max(r, std::abs(e));
  return r;
}

std::optional<double> empirical_rate(const std::vector<std::vector<double>>& iterates,
                                     std::span<const double> q_star) {
  if (iterates.empty()) return std::nullopt;
  std::vector<std::pair<double, double>> samples;  // (n, ln dist)
  // The last few iterates sit within roundoff of the stored fixed point;
  // drop them so they do not bias the fit.
  const std::size_t last = iterates.size() > 4 ? iterates.size() - 4 : 0;
  for (std::size_t n = 0; n < last; ++n) {
    double dist2 = 0.0;
    for (std::size_t j = 0; j < q_star.size(); ++j) {
      const double delta = iterates[n][j] - q_star[j];
      dist2 += delta * delta;
    }
    const double dist = std::sqrt(dist2);
    if (dist > kUsableFloor) samples.emplace_back(static_cast<double>(n), std::log(dist));
  }
  if (samples.empty()) return 0.0;  // immediate fixed point: exact convergence
  if (samples.size() < 20) return std::nullopt;
  if (samples.size() > 400) samples.erase(samples.begin(), samples.end() - 400);

  double mean_n = 0.0, mean_y = 0.0;
  for (const auto& [n, y] : samples) {
    mean_n += n;
    mean_y += y;
  }
  mean_n /= static_cast<double>(samples.size());
  mean_y /= static_cast<double>(samples.size());
  double num = 0.0, den = 0.0;
  for (const auto& [n, y] : samples) {
    num += (n - mean_n) * (y - mean_y);
    den += (n - mean_n) * (n - mean_n);
  }
  if (den == 0.0) return std::nullopt;
  return std::exp(num / den);
}

SpectralReport analyze(const SolveResult& result, const SourceDistribution& p,
                       const FDivergence& spec, LagrangeParams s, const DistortionMatrix& d) {
  SpectralReport report;
  for (std::size_t j = 0; j < result.q.size(); ++j) {
    if (!(result.q[j] > 0.0)) {
      report.status = "reduced-support";
      return report;
    }
  }
  const RowMatrix log_a = exponent_kernel(p, result.q, spec, s, d);
  report.m = assemble_m(result.q, p, log_a);
  report.eigenvalues_m = eigenvalues(report.m);
  report.empirical_rate = empirical_rate(result.iterates, result.q.probs());

  if (s.s2 == 0.0) {
    report.gamma = Eigen::VectorXd::Zero(report.m.rows());
  } else {
    report.gamma = assemble_gamma(result.q, p, spec, s.s2);
  }
  if (!report.gamma) {
    report.status = "gamma-unavailable";
    return report;
  }
  report.j_approx = jacobian_approx(report.m, *report.gamma);
  report.eigenvalues_approx = eigenvalues(*report.j_approx);
  report.spectral_radius_approx = spectral_radius(report.eigenvalues_approx);

  report.j_exact = jacobian_exact(report.m, *report.gamma);
  if (report.j_exact) {
    report.eigenvalues_exact = eigenvalues(*report.j_exact);
    report.spectral_radius_exact = spectral_radius(report.eigenvalues_exact);
    report.status = "ok";
  } else {
    report.status = "jexact-singular";
  }
  return report;
}

}  // namespace rdpf
