#ifndef RDPF_ORACLES_HPP
#define RDPF_ORACLES_HPP

#include <optional>

#include "rdpf/fdivergence.hpp"
#include "rdpf/simplex.hpp"
#include "rdpf/solver.hpp"

namespace rdpf {

struct OracleResult {
  bool feasible = false;
  double rate = 0.0;  // nats
  std::optional<TransitionKernel> argmin;
  bool distortion_active = false;
  bool perception_active = false;
  double grid_step = 0.0;
};

/// Exhaustive lattice search over row-stochastic kernels on tiny alphabets:
/// each row ranges over a uniform lattice on its simplex (exact completion),
/// both constraints are filtered strictly, and the feasible kernel of
/// minimum mutual information wins (ties broken lexicographically). One
/// local refinement pass at grid_step/10 tightens the incumbent. Restricted
/// to |X| (|Xhat| - 1) <= 6 free parameters and grid_step in [1e-4, 1e-1].
OracleResult grid_oracle(const SourceDistribution& p, const FDivergence& spec,
                         const DistortionMatrix& d, double distortion_budget,
                         double perception_budget, double grid_step);

/// Lattice minimizer of the penalized objective
/// s1 E[d] + s2 D_f(p||Qm) + I(p, Q), refined twice (grid_step/10 and /100).
/// Serves as an independent fixed-point oracle for the solver.
TransitionKernel grid_penalized_argmin(const SourceDistribution& p, const FDivergence& spec,
                                       const DistortionMatrix& d, LagrangeParams s,
                                       double grid_step);

/// Classical binary rate-distortion function under Hamming distortion,
/// h(p1) - h(D) for D < min(p1, 1-p1) and 0 beyond, in nats.
double binary_rdf(double p1, double distortion);

/// Closed-form binary RDPF under Hamming distortion and a total-variation
/// perception budget, in nats. Coincides with binary_rdf whenever the
/// perception budget exceeds the TV gap of the unconstrained optimum.
double closed_form_binary_tv(double p1, double distortion, double perception);

}  // namespace rdpf

#endif  // RDPF_ORACLES_HPP
