#ifndef RDPF_FDIVERGENCE_HPP
#define RDPF_FDIVERGENCE_HPP

#include <string>

#include "rdpf/simplex.hpp"

namespace rdpf {

/// Generator of an f-divergence: a convex f on (0, inf) with f(1) = 0, a
/// chosen subgradient, and (when it exists) the second derivative. The
/// exponent term g(t) = f(t) - t df(t) drives the perception part of the
/// solver's update kernel.
///
/// Built-ins: "kl" (t ln t), "tv" (|t-1|/2, subgradient 0 at the kink),
/// "chi2" ((t-1)^2). Other generators can be added through the same
/// interface.
class FDivergence {
 public:
  using Fn = double (*)(double);

  static FDivergence kl();
  static FDivergence total_variation();
  static FDivergence chi_squared();
  static FDivergence from_name(const std::string& name);

  const std::string& name() const { return name_; }
  double f(double t) const { return f_(t); }
  double subgradient(double t) const { return sub_(t); }

  bool has_second_derivative() const { return fpp_ != nullptr; }
  double second_derivative(double t) const;

  /// f(0+); finite for the built-ins (KL 0, TV 1/2, chi2 1).
  double limit_at_zero() const { return f_zero_; }
  /// lim_{t->inf} f(t)/t; +inf for KL and chi2, 1/2 for TV.
  double slope_at_infinity() const { return slope_inf_; }
  /// lim_{t->inf} f(t) - t df(t); -inf for KL and chi2, -1/2 for TV.
  double g_limit_at_infinity() const { return g_inf_; }

 private:
  FDivergence(std::string name, Fn f, Fn sub, Fn fpp, double f_zero, double slope_inf,
              double g_inf)
      : name_(std::move(name)),
        f_(f),
        sub_(sub),
        fpp_(fpp),
        f_zero_(f_zero),
        slope_inf_(slope_inf),
        g_inf_(g_inf) {}

  std::string name_;
  Fn f_;
  Fn sub_;
  Fn fpp_;  // nullptr when unavailable (TV)
  double f_zero_;
  double slope_inf_;
  double g_inf_;
};

/// D_f(p || q) = sum_i q(i) f(p(i)/q(i)). Terms with q(i) = 0 and p(i) > 0
/// contribute p(i) * lim_{t->inf} f(t)/t; 0 * f(0/0) := 0. An infinite
/// divergence is returned as +infinity, never thrown.
double divergence(const FDivergence& spec, const SourceDistribution& p,
                  const OutputDistribution& q);

/// g(t) = f(t) - t df(t) at t = p(xhat) / v(xhat). Throws std::domain_error
/// when v(xhat) = 0.
double g_term(const FDivergence& spec, const SourceDistribution& p, const OutputDistribution& v,
              std::size_t xhat);

/// Unconstrained coordinate second derivative of D_f(p||.) at q:
/// f''(p/q) p^2 / q^3. Nonnegative for convex f. Throws std::domain_error
/// when f'' is unavailable (TV) or q(xhat) = 0.
double perception_curvature(const FDivergence& spec, const SourceDistribution& p,
                            const OutputDistribution& q, std::size_t xhat);

}  // namespace rdpf

#endif  // RDPF_FDIVERGENCE_HPP
