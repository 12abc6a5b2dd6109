#include "rdpf/fdivergence.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rdpf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double kl_f(double t) { return t * std::log(t); }
double kl_sub(double t) { return std::log(t) + 1.0; }
double kl_fpp(double t) { return 1.0 / t; }

double tv_f(double t) { return 0.5 * std::abs(t - 1.0); }
double tv_sub(double t) {
  if (t > 1.0) return 0.5;
  if (t < 1.0) return -0.5;
  return 0.0;  // midpoint selection at the kink
}

double chi2_f(double t) {
  const double u = t - 1.0;
  return u * u;
}
double chi2_sub(double t) { return 2.0 * (t - 1.0); }
double chi2_fpp(double) { return 2.0; }

}  // namespace

FDivergence FDivergence::kl() {
  return FDivergence("kl", kl_f, kl_sub, kl_fpp, 0.0, kInf, -kInf);
}

FDivergence FDivergence::total_variation() {
  return FDivergence("tv", tv_f, tv_sub, nullptr, 0.5, 0.5, -0.5);
}

FDivergence FDivergence::chi_squared() {
  return FDivergence("chi2", chi2_f, chi2_sub, chi2_fpp, 1.0, kInf, -kInf);
}

FDivergence FDivergence::from_name(const std::string& name) {
  if (name == "kl") return kl();
  if (name == "tv") return total_variation();
  if (name == "chi2") return chi_squared();
  throw std::invalid_argument("unknown divergence \"" + name + "\" (expected kl, tv or chi2)");
}

double FDivergence::second_derivative(double t) const {
  if (fpp_ == nullptr) {
    throw std::domain_error("divergence \"" + name_ + "\": second derivative unavailable");
  }
  return fpp_(t);
}

double divergence(const FDivergence& spec, const SourceDistribution& p,
                  const OutputDistribution& q) {
  if (p.size() != q.size()) throw std::invalid_argument("divergence: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    const double qi = q[i];
    if (qi > 0.0) {
      sum += pi > 0.0 ? qi * spec.f(pi / qi) : qi * spec.limit_at_zero();
    } else if (pi > 0.0) {
      const double slope = spec.slope_at_infinity();
      if (std::isinf(slope)) return kInf;
      sum += pi * slope;
    }
  }
  return sum;
}

double g_term(const FDivergence& spec, const SourceDistribution& p, const OutputDistribution& v,
              std::size_t xhat) {
  if (p.size() != v.size()) throw std::invalid_argument("g_term: dimension mismatch");
  if (!(v[xhat] > 0.0)) throw std::domain_error("g_term: singular ratio, v(xhat) = 0");
  const double t = p[xhat] / v[xhat];
  return spec.f(t) - t * spec.subgradient(t);
}

double perception_curvature(const FDivergence& spec, const SourceDistribution& p,
                            const OutputDistribution& q, std::size_t xhat) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("perception_curvature: dimension mismatch");
  }
  if (!(q[xhat] > 0.0)) throw std::domain_error("perception_curvature: q(xhat) = 0");
  const double pi = p[xhat];
  const double qi = q[xhat];
  return spec.second_derivative(pi / qi) * pi * pi / (qi * qi * qi);
}

}  // namespace rdpf
