#include "rdpf/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rdpf {

namespace {

void check_simplex_sum(const std::vector<double>& v, const char* what) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (std::abs(sum - 1.0) > kSimplexTol) {
    throw std::invalid_argument(std::string(what) + ": entries sum to " +
                                std::to_string(sum) + ", expected 1 within 1e-12");
  }
}

}  // namespace

SourceDistribution::SourceDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("source distribution: empty");
  for (double x : probs_) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument(
          "source distribution: all entries must be strictly positive "
          "(strip zero-mass symbols before construction)");
    }
  }
  check_simplex_sum(probs_, "source distribution");
}

OutputDistribution::OutputDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("output distribution: empty");
  for (double x : probs_) {
    if (x < 0.0 || !std::isfinite(x)) {
      throw std::invalid_argument("output distribution: entries must be nonnegative and finite");
    }
  }
  check_simplex_sum(probs_, "output distribution");
}

OutputDistribution OutputDistribution::uniform(std::size_t n) {
  if (n == 0) throw std::invalid_argument("output distribution: empty");
  return OutputDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

TransitionKernel::TransitionKernel(std::size_t rows, std::size_t cols, std::vector<double> data) {
  if (rows == 0 || cols == 0 || data.size() != rows * cols) {
    throw std::invalid_argument("transition kernel: bad shape");
  }
  m_ = RowMatrix(rows, cols);
  for (std::size_t x = 0; x < rows; ++x) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      double v = data[x * cols + j];
      if (v < 0.0 || !std::isfinite(v)) {
        throw std::invalid_argument("transition kernel: entries must be nonnegative and finite");
      }
      sum += v;
      m_(x, j) = v;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
      throw std::invalid_argument("transition kernel: row " + std::to_string(x) +
                                  " sums to " + std::to_string(sum));
    }
  }
}

TransitionKernel TransitionKernel::identity(std::size_t n) {
  std::vector<double> data(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
  return TransitionKernel(n, n, std::move(data));
}

TransitionKernel TransitionKernel::constant_rows(std::size_t rows, const std::vector<double>& row) {
  std::vector<double> data;
  data.reserve(rows * row.size());
  for (std::size_t x = 0; x < rows; ++x) data.insert(data.end(), row.begin(), row.end());
  return TransitionKernel(rows, row.size(), std::move(data));
}

DistortionMatrix::DistortionMatrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  if (rows == 0 || cols == 0 || data.size() != rows * cols) {
    throw std::invalid_argument("distortion matrix: bad shape");
  }
  for (double v : data) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw std::invalid_argument("distortion matrix: entries must be nonnegative and finite");
    }
  }
  m_ = RowMatrix(rows, cols);
  for (std::size_t i = 0; i < data.size(); ++i) m_(i / cols, i % cols) = data[i];
}

DistortionMatrix DistortionMatrix::hamming(std::size_t n) {
  std::vector<double> data(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 0.0;
  return DistortionMatrix(n, n, std::move(data));
}

double DistortionMatrix::max_value() const {
  double m = 0.0;
  for (double v : m_.data()) m = std::max(m, v);
  return m;
}

OutputDistribution induced_marginal(const SourceDistribution& p, const TransitionKernel& q) {
  if (p.size() != q.rows()) {
    throw std::invalid_argument("induced_marginal: dimension mismatch");
  }
  std::vector<double> out(q.cols(), 0.0);
  for (std::size_t x = 0; x < q.rows(); ++x) {
    const double px = p[x];
    for (std::size_t j = 0; j < q.cols(); ++j) out[j] += px * q(x, j);
  }
  return OutputDistribution(std::move(out));
}

double mutual_information(const SourceDistribution& p, const TransitionKernel& q) {
  if (p.size() != q.rows()) {
    throw std::invalid_argument("mutual_information: dimension mismatch");
  }
  const OutputDistribution qm = induced_marginal(p, q);
  double sum = 0.0;
  for (std::size_t x = 0; x < q.rows(); ++x) {
    for (std::size_t j = 0; j < q.cols(); ++j) {
      const double v = q(x, j);
      if (v == 0.0) continue;  // 0 * ln(0/.) = 0
      sum += p[x] * v * std::log(v / qm[j]);
    }
  }
  return std::max(sum, 0.0);
}

double expected_distortion(const SourceDistribution& p, const TransitionKernel& q,
                           const DistortionMatrix& d) {
  if (p.size() != q.rows() || q.rows() != d.rows() || q.cols() != d.cols()) {
    throw std::invalid_argument("expected_distortion: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t x = 0; x < q.rows(); ++x) {
    for (std::size_t j = 0; j < q.cols(); ++j) sum += p[x] * q(x, j) * d(x, j);
  }
  return sum;
}

double log_normalizer(std::span<const double> q, std::span<const double> log_a) {
  if (q.size() != log_a.size()) {
    throw std::invalid_argument("log_normalizer: dimension mismatch");
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) shift = std::max(shift, log_a[i]);
  }
  if (std::isinf(shift)) {
    if (shift > 0.0) return shift;  // infinite normalizer
    throw std::domain_error("log_normalizer: degenerate (all mass on -inf entries)");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) sum += q[i] * std::exp(log_a[i] - shift);
  }
  return shift + std::log(sum);
}

}  // namespace rdpf
