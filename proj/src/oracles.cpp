#include "rdpf/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace rdpf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double binary_entropy(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -x * std::log(x) - (1.0 - x) * std::log(1.0 - x);
}

// All length-k nonnegative integer vectors summing to n, coordinates within
// [lo, hi], visited in ascending lexicographic order.
void enum_counts(int n, int k, const std::vector<int>& lo, const std::vector<int>& hi,
                 std::vector<int>& cur, int idx,
                 const std::function<void(const std::vector<int>&)>& cb) {
  if (idx == k - 1) {
    if (n >= lo[idx] && n <= hi[idx]) {
      cur[idx] = n;
      cb(cur);
    }
    return;
  }
  const int lower = lo[idx];
  const int upper = std::min(hi[idx], n);
  for (int v = lower; v <= upper; ++v) {
    cur[idx] = v;
    enum_counts(n - v, k, lo, hi, cur, idx + 1, cb);
  }
}

void for_each_composition(int n, int k, const std::vector<int>& lo, const std::vector<int>& hi,
                          const std::function<void(const std::vector<int>&)>& cb) {
  std::vector<int> cur(k, 0);
  enum_counts(n, k, lo, hi, cur, 0, cb);
}

struct LatticeKernel {
  int denom = 0;
  std::vector<std::vector<int>> rows;  // counts per row, each summing to denom

  std::vector<double> flatten() const {
    std::vector<double> data;
    data.reserve(rows.size() * rows.front().size());
    for (const auto& row : rows) {
      for (int c : row) data.push_back(static_cast<double>(c) / denom);
    }
    return data;
  }
};

struct Evaluation {
  double distortion = 0.0;
  double perception = 0.0;
  double information = 0.0;
};

// Direct evaluation of a lattice kernel: E[d], D_f(p||Qm) and I(p, Q) via
// independent summations (no solver machinery involved).
Evaluation evaluate(const SourceDistribution& p, const FDivergence* spec,
                    const DistortionMatrix& d, const LatticeKernel& k) {
  const std::size_t nx = d.rows();
  const std::size_t nh = d.cols();
  Evaluation out;
  std::vector<double> qm(nh, 0.0);
  double negent = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t j = 0; j < nh; ++j) {
      const double v = static_cast<double>(k.rows[x][j]) / k.denom;
      if (v == 0.0) continue;
      out.distortion += p[x] * v * d(x, j);
      negent += p[x] * v * std::log(v);
      qm[j] += p[x] * v;
    }
  }
  double marg_ent = 0.0;
  for (double q : qm) {
    if (q > 0.0) marg_ent += q * std::log(q);
  }
  out.information = std::max(negent - marg_ent, 0.0);
  if (spec != nullptr) {
    double div = 0.0;
    for (std::size_t j = 0; j < nh; ++j) {
      if (qm[j] > 0.0) {
        div += qm[j] * spec->f(p[j] / qm[j]);
      } else {
        const double slope = spec->slope_at_infinity();
        div += std::isinf(slope) ? kInf : p[j] * slope;
        if (std::isinf(div)) break;
      }
    }
    out.perception = div;
  }
  return out;
}

struct SearchSpec {
  const SourceDistribution& p;
  const FDivergence* spec;  // nullptr: no perception term at all
  const DistortionMatrix& d;
  bool constrained = true;
  double distortion_budget = kInf;
  double perception_budget = kInf;
  LagrangeParams s;  // penalized mode
};

double objective(const SearchSpec& ss, const Evaluation& e) {
  if (ss.constrained) return e.information;
  double obj = ss.s.s1 * e.distortion + e.information;
  if (ss.spec != nullptr && ss.s.s2 != 0.0) obj += ss.s.s2 * e.perception;
  return obj;
}

bool feasible(const SearchSpec& ss, const Evaluation& e) {
  if (!ss.constrained) return std::isfinite(objective(ss, e));
  if (e.distortion > ss.distortion_budget) return false;
  if (ss.spec != nullptr && e.perception > ss.perception_budget) return false;
  return true;
}

// Full lattice scan at denominator n. Returns true when a feasible kernel
// exists; best holds the incumbent (first-found minimum, hence
// lexicographically smallest among ties). Per-row candidates carry their
// distortion and entropy contributions so leaves only price the marginal.
bool scan_lattice(const SearchSpec& ss, int denom, LatticeKernel& best, double& best_obj) {
  const std::size_t nx = ss.d.rows();
  const std::size_t nh = ss.d.cols();
  const std::vector<int> lo(nh, 0);
  const std::vector<int> hi(nh, denom);

  struct RowCand {
    std::vector<int> counts;
    std::vector<double> weighted;  // p(x) * counts / denom, ready to add to the marginal
    double dist = 0.0;             // p(x) sum_j Q d
    double negent = 0.0;           // p(x) sum_j Q ln Q
  };
  std::vector<std::vector<RowCand>> cands(nx);
  for (std::size_t x = 0; x < nx; ++x) {
    for_each_composition(denom, static_cast<int>(nh), lo, hi,
                         [&](const std::vector<int>& counts) {
                           RowCand rc;
                           rc.counts = counts;
                           rc.weighted.resize(nh);
                           for (std::size_t j = 0; j < nh; ++j) {
                             const double v = static_cast<double>(counts[j]) / denom;
                             rc.weighted[j] = ss.p[x] * v;
                             rc.dist += ss.p[x] * v * ss.d(x, j);
                             if (v > 0.0) rc.negent += ss.p[x] * v * std::log(v);
                           }
                           cands[x].push_back(std::move(rc));
                         });
  }

  // Suffix lower bounds on the remaining distortion, for pruning.
  std::vector<double> suffix_min(nx + 1, 0.0);
  for (std::size_t x = nx; x-- > 0;) {
    double row_min = kInf;
    for (std::size_t j = 0; j < nh; ++j) row_min = std::min(row_min, ss.d(x, j));
    suffix_min[x] = suffix_min[x + 1] + ss.p[x] * row_min;
  }

  std::vector<std::vector<double>> qm_stack(nx + 1, std::vector<double>(nh, 0.0));
  std::vector<const RowCand*> picked(nx, nullptr);
  bool found = false;

  std::function<void(std::size_t, double, double)> dfs = [&](std::size_t x, double dist_acc,
                                                             double negent_acc) {
    if (ss.constrained && dist_acc + suffix_min[x] > ss.distortion_budget) return;
    if (x == nx) {
      const std::vector<double>& qm = qm_stack[nx];
      double marg_ent = 0.0;
      for (double q : qm) {
        if (q > 0.0) marg_ent += q * std::log(q);
      }
      Evaluation e;
      e.distortion = dist_acc;
      e.information = std::max(negent_acc - marg_ent, 0.0);
      if (ss.spec != nullptr) {
        for (std::size_t j = 0; j < nh; ++j) {
          if (qm[j] > 0.0) {
            e.perception += qm[j] * ss.spec->f(ss.p[j] / qm[j]);
          } else {
            const double slope = ss.spec->slope_at_infinity();
            e.perception += std::isinf(slope) ? kInf : ss.p[j] * slope;
            if (std::isinf(e.perception)) break;
          }
        }
      }
      if (!feasible(ss, e)) return;
      const double obj = objective(ss, e);
      if (!found || obj < best_obj) {
        found = true;
        best_obj = obj;
        best.denom = denom;
        best.rows.resize(nx);
        for (std::size_t r = 0; r < nx; ++r) best.rows[r] = picked[r]->counts;
      }
      return;
    }
    for (const RowCand& rc : cands[x]) {
      if (ss.constrained && dist_acc + rc.dist + suffix_min[x + 1] > ss.distortion_budget) {
        continue;
      }
      for (std::size_t j = 0; j < nh; ++j) {
        qm_stack[x + 1][j] = qm_stack[x][j] + rc.weighted[j];
      }
      picked[x] = &rc;
      dfs(x + 1, dist_acc + rc.dist, negent_acc + rc.negent);
    }
  };
  dfs(0, 0.0, 0.0);
  return found;
}

// Row-wise coordinate descent at 10x finer resolution, within one coarse
// cell of the incumbent.
void refine_lattice(const SearchSpec& ss, LatticeKernel& best, double& best_obj) {
  const std::size_t nx = ss.d.rows();
  const int nh = static_cast<int>(ss.d.cols());
  const int scale = 10;
  LatticeKernel fine;
  fine.denom = best.denom * scale;
  fine.rows = best.rows;
  for (auto& row : fine.rows) {
    for (int& c : row) c *= scale;
  }
  {
    const Evaluation e = evaluate(ss.p, ss.spec, ss.d, fine);
    best_obj = objective(ss, e);
  }
  for (int sweep = 0; sweep < 5; ++sweep) {
    bool improved = false;
    for (std::size_t x = 0; x < nx; ++x) {
      std::vector<int> lo(nh), hi(nh);
      for (int j = 0; j < nh; ++j) {
        lo[j] = std::max(0, fine.rows[x][j] - scale);
        hi[j] = std::min(fine.denom, fine.rows[x][j] + scale);
      }
      std::vector<int> best_row = fine.rows[x];
      for_each_composition(fine.denom, nh, lo, hi, [&](const std::vector<int>& counts) {
        fine.rows[x] = counts;
        const Evaluation e = evaluate(ss.p, ss.spec, ss.d, fine);
        if (!feasible(ss, e)) return;
        const double obj = objective(ss, e);
        if (obj < best_obj) {
          best_obj = obj;
          best_row = counts;
          improved = true;
        }
      });
      fine.rows[x] = best_row;
    }
    if (!improved) break;
  }
  best = fine;
}

}  // namespace

OracleResult grid_oracle(const SourceDistribution& p, const FDivergence& spec,
                         const DistortionMatrix& d, double distortion_budget,
                         double perception_budget, double grid_step) {
  if (p.size() * (d.cols() - 1) > 6) {
    throw std::invalid_argument("grid_oracle: more than 6 free parameters");
  }
  if (!(grid_step >= 1e-4 && grid_step <= 1e-1)) {
    throw std::invalid_argument("grid_oracle: grid_step must lie in [1e-4, 1e-1]");
  }
  if (d.rows() != p.size()) throw std::invalid_argument("grid_oracle: dimension mismatch");
  const bool use_perception = std::isfinite(perception_budget);
  if (use_perception && p.size() != d.cols()) {
    throw std::invalid_argument("grid_oracle: perception constraint requires |X| = |Xhat|");
  }

  SearchSpec ss{p, use_perception ? &spec : nullptr, d, true,
                distortion_budget, perception_budget, {}};
  const int denom = std::max(1, static_cast<int>(std::lround(1.0 / grid_step)));

  OracleResult result;
  result.grid_step = grid_step;
  LatticeKernel best;
  double best_obj = kInf;
  if (!scan_lattice(ss, denom, best, best_obj)) {
    result.feasible = false;
    return result;
  }
  refine_lattice(ss, best, best_obj);

  const Evaluation e = evaluate(ss.p, ss.spec, ss.d, best);
  result.feasible = true;
  result.rate = e.information;
  result.argmin = TransitionKernel(d.rows(), d.cols(), best.flatten());
  result.distortion_active = distortion_budget - e.distortion <= grid_step;
  result.perception_active = use_perception && perception_budget - e.perception <= grid_step;
  return result;
}

TransitionKernel grid_penalized_argmin(const SourceDistribution& p, const FDivergence& spec,
                                       const DistortionMatrix& d, LagrangeParams s,
                                       double grid_step) {
  if (p.size() * (d.cols() - 1) > 6) {
    throw std::invalid_argument("grid_penalized_argmin: more than 6 free parameters");
  }
  if (!(grid_step >= 1e-4 && grid_step <= 1e-1)) {
    throw std::invalid_argument("grid_penalized_argmin: grid_step must lie in [1e-4, 1e-1]");
  }
  const bool use_perception = s.s2 != 0.0;
  if (use_perception && p.size() != d.cols()) {
    throw std::invalid_argument("grid_penalized_argmin: perception requires |X| = |Xhat|");
  }
  SearchSpec ss{p, use_perception ? &spec : nullptr, d, false, kInf, kInf, s};
  const int denom = std::max(1, static_cast<int>(std::lround(1.0 / grid_step)));
  LatticeKernel best;
  double best_obj = kInf;
  if (!scan_lattice(ss, denom, best, best_obj)) {
    throw std::domain_error("grid_penalized_argmin: empty lattice");
  }
  refine_lattice(ss, best, best_obj);
  refine_lattice(ss, best, best_obj);
  return TransitionKernel(d.rows(), d.cols(), best.flatten());
}

double binary_rdf(double p1, double distortion) {
  if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("binary_rdf: p1 must lie in (0, 1)");
  if (distortion < 0.0) throw std::invalid_argument("binary_rdf: distortion must be >= 0");
  const double pp = std::min(p1, 1.0 - p1);
  if (distortion >= pp) return 0.0;
  return binary_entropy(pp) - binary_entropy(distortion);
}

double closed_form_binary_tv(double p1, double distortion, double perception) {
  if (!(p1 > 0.0 && p1 < 1.0)) {
    throw std::invalid_argument("closed_form_binary_tv: p1 must lie in (0, 1)");
  }
  if (distortion < 0.0 || perception < 0.0) {
    throw std::invalid_argument("closed_form_binary_tv: budgets must be >= 0");
  }
  const double pp = std::min(p1, 1.0 - p1);

  // Reconstruction marginal: the unconstrained optimum, floored by the
  // perception budget.
  const double a_uncon = distortion < pp ? (pp - distortion) / (1.0 - 2.0 * distortion) : 0.0;
  double a = std::max(a_uncon, pp - perception);
  a = std::max(a, 0.0);

  // Zero rate is achievable when an independent reconstruction with this
  // marginal already meets the distortion budget.
  if (distortion >= pp + a * (1.0 - 2.0 * pp)) return 0.0;

  double pi = 0.5 * (pp + a - distortion);
  pi = std::clamp(pi, std::max(0.0, pp + a - 1.0), std::min(pp, a));

  const double joint[2][2] = {{1.0 - pp - a + pi, a - pi}, {pp - pi, pi}};
  const double rows[2] = {1.0 - pp, pp};
  const double cols[2] = {1.0 - a, a};
  double rate = 0.0;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      if (joint[x][y] > 0.0) rate += joint[x][y] * std::log(joint[x][y] / (rows[x] * cols[y]));
    }
  }
  return std::max(rate, 0.0);
}

}  // namespace rdpf
