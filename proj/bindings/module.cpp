// Python bindings for the rate-distortion-perception solver.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "rdpf/oracles.hpp"
#include "rdpf/solver.hpp"
#include "rdpf/spectral.hpp"

namespace py = pybind11;

namespace {

rdpf::DistortionMatrix make_distortion(const std::optional<std::vector<std::vector<double>>>& d,
                                       std::size_t nx) {
  if (!d) return rdpf::DistortionMatrix::hamming(nx);
  const std::size_t rows = d->size();
  if (rows == 0) throw std::invalid_argument("distortion: empty matrix");
  const std::size_t cols = d->front().size();
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& row : *d) {
    if (row.size() != cols) throw std::invalid_argument("distortion: ragged matrix");
    data.insert(data.end(), row.begin(), row.end());
  }
  return rdpf::DistortionMatrix(rows, cols, std::move(data));
}

rdpf::SolverConfig make_config(double eps, std::size_t max_iters, double q_floor,
                               const std::string& mode,
                               const std::optional<std::vector<double>>& q0,
                               bool record_iterates) {
  rdpf::SolverConfig config;
  config.epsilon = eps;
  config.max_iters = max_iters;
  config.q_floor = q_floor;
  if (mode == "approximate") {
    config.mode = rdpf::SolverMode::kApproximate;
  } else if (mode == "exact-implicit") {
    config.mode = rdpf::SolverMode::kExactImplicit;
  } else {
    throw std::invalid_argument("mode must be \"approximate\" or \"exact-implicit\"");
  }
  config.initial_q = q0;
  config.record_iterates = record_iterates;
  return config;
}

std::vector<std::vector<double>> kernel_rows(const rdpf::TransitionKernel& q) {
  std::vector<std::vector<double>> rows(q.rows());
  for (std::size_t x = 0; x < q.rows(); ++x) {
    rows[x].assign(q.row(x).begin(), q.row(x).end());
  }
  return rows;
}

py::dict result_to_dict(const rdpf::SolveResult& r) {
  py::dict out;
  out["D"] = r.distortion;
  out["P"] = r.perception;
  out["R"] = r.rate;
  out["lower"] = r.lower_bound;
  out["upper"] = r.upper_bound;
  out["iterations"] = r.iterations;
  out["status"] = std::string(rdpf::to_string(r.status));
  out["q"] = r.q.probs();
  out["kernel"] = kernel_rows(r.kernel);
  out["kkt_violation"] = r.kkt_max_violation;
  out["support_clamped"] = r.support_clamped;
  return out;
}

rdpf::SolveResult run_solve(const std::vector<double>& source, const std::string& divergence,
                            double s1, double s2,
                            const std::optional<std::vector<std::vector<double>>>& distortion,
                            double eps, std::size_t max_iters, double q_floor,
                            const std::string& mode, const std::optional<std::vector<double>>& q0,
                            bool record_iterates) {
  const rdpf::SourceDistribution p(source);
  const rdpf::FDivergence spec = rdpf::FDivergence::from_name(divergence);
  const rdpf::DistortionMatrix d = make_distortion(distortion, p.size());
  return rdpf::solve(p, spec, {s1, s2}, d,
                     make_config(eps, max_iters, q_floor, mode, q0, record_iterates));
}

}  // namespace

PYBIND11_MODULE(_rdpf, m) {
  m.doc() = "Rate-distortion-perception function solver (alternating minimization "
            "with certified stopping bounds and spectral diagnostics)";
  m.attr("__version__") = "0.1.0";

  m.def(
      "solve",
      [](const std::vector<double>& source, const std::string& divergence, double s1, double s2,
         const std::optional<std::vector<std::vector<double>>>& distortion, double eps,
         std::size_t max_iters, double q_floor, const std::string& mode,
         const std::optional<std::vector<double>>& q0) {
        return result_to_dict(
            run_solve(source, divergence, s1, s2, distortion, eps, max_iters, q_floor, mode, q0,
                      /*record_iterates=*/false));
      },
      py::arg("source"), py::arg("divergence"), py::arg("s1"), py::arg("s2") = 0.0,
      py::arg("distortion") = std::nullopt, py::arg("eps") = 1e-9,
      py::arg("max_iters") = std::size_t{100000}, py::arg("q_floor") = 1e-15,
      py::arg("mode") = "approximate", py::arg("q0") = std::nullopt,
      "Solve one (s1, s2) point; distortion defaults to Hamming. Rates in nats.");

  m.def(
      "spectral",
      [](const std::vector<double>& source, const std::string& divergence, double s1, double s2,
         const std::optional<std::vector<std::vector<double>>>& distortion, double eps,
         std::size_t max_iters, double q_floor, const std::string& mode,
         const std::optional<std::vector<double>>& q0) {
        const rdpf::SourceDistribution p(source);
        const rdpf::FDivergence spec = rdpf::FDivergence::from_name(divergence);
        const rdpf::DistortionMatrix d = make_distortion(distortion, p.size());
        const rdpf::SolveResult r =
            run_solve(source, divergence, s1, s2, distortion, eps, max_iters, q_floor, mode, q0,
                      /*record_iterates=*/true);
        const rdpf::SpectralReport report = rdpf::analyze(r, p, spec, {s1, s2}, d);
        py::dict out;
        out["solve"] = result_to_dict(r);
        out["status"] = report.status;
        auto eig_list = [](const std::vector<std::complex<double>>& eigs) {
          py::list out_list;
          for (const auto& e : eigs) out_list.append(py::make_tuple(e.real(), e.imag()));
          return out_list;
        };
        out["eigenvalues_m"] = eig_list(report.eigenvalues_m);
        out["eigenvalues"] = eig_list(report.eigenvalues_approx);
        out["spectral_radius"] = report.spectral_radius_approx;
        if (report.empirical_rate) {
          out["empirical_rate"] = *report.empirical_rate;
        } else {
          out["empirical_rate"] = py::none();
        }
        return out;
      },
      py::arg("source"), py::arg("divergence"), py::arg("s1"), py::arg("s2") = 0.0,
      py::arg("distortion") = std::nullopt, py::arg("eps") = 1e-9,
      py::arg("max_iters") = std::size_t{100000}, py::arg("q_floor") = 1e-15,
      py::arg("mode") = "approximate", py::arg("q0") = std::nullopt,
      "Solve one point and attach the fixed-point spectral report.");

  m.def(
      "divergence",
      [](const std::string& name, const std::vector<double>& p, const std::vector<double>& q) {
        return rdpf::divergence(rdpf::FDivergence::from_name(name), rdpf::SourceDistribution(p),
                                rdpf::OutputDistribution(q));
      },
      py::arg("name"), py::arg("p"), py::arg("q"), "D_f(p || q) for f in {kl, tv, chi2}.");

  m.def(
      "mutual_information",
      [](const std::vector<double>& p, const std::vector<std::vector<double>>& kernel) {
        const rdpf::SourceDistribution source(p);
        const std::size_t rows = kernel.size();
        const std::size_t cols = kernel.empty() ? 0 : kernel.front().size();
        std::vector<double> data;
        for (const auto& row : kernel) data.insert(data.end(), row.begin(), row.end());
        return rdpf::mutual_information(source, rdpf::TransitionKernel(rows, cols, data));
      },
      py::arg("p"), py::arg("kernel"), "I(X; Xhat) in nats.");

  m.def("binary_rdf", &rdpf::binary_rdf, py::arg("p1"), py::arg("distortion"),
        "Classical binary Hamming rate-distortion function, nats.");

  m.def("closed_form_binary_tv", &rdpf::closed_form_binary_tv, py::arg("p1"),
        py::arg("distortion"), py::arg("perception"),
        "Closed-form binary Hamming/TV rate-distortion-perception value, nats.");

  m.def(
      "grid_oracle",
      [](const std::vector<double>& source, const std::string& divergence,
         const std::optional<std::vector<std::vector<double>>>& distortion, double d_budget,
         double p_budget, double grid_step) {
        const rdpf::SourceDistribution p(source);
        const rdpf::FDivergence spec = rdpf::FDivergence::from_name(divergence);
        const rdpf::DistortionMatrix d = make_distortion(distortion, p.size());
        const rdpf::OracleResult r = rdpf::grid_oracle(p, spec, d, d_budget, p_budget, grid_step);
        py::dict out;
        out["feasible"] = r.feasible;
        out["R"] = r.rate;
        out["distortion_active"] = r.distortion_active;
        out["perception_active"] = r.perception_active;
        out["grid_step"] = r.grid_step;
        if (r.argmin) {
          out["argmin"] = kernel_rows(*r.argmin);
        } else {
          out["argmin"] = py::none();
        }
        return out;
      },
      py::arg("source"), py::arg("divergence"), py::arg("distortion") = std::nullopt,
      py::arg("d_budget") = 1.0, py::arg("p_budget") = 1.0, py::arg("grid_step") = 0.01,
      "Exhaustive lattice ground truth for tiny alphabets.");
}
