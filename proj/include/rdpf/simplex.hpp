#ifndef RDPF_SIMPLEX_HPP
#define RDPF_SIMPLEX_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace rdpf {

// Tolerance for simplex membership (sum-to-one) checks.
inline constexpr double kSimplexTol = 1e-12;

/// Minimal dense row-major matrix of doubles, used for kernels and
/// log-domain tables.
class RowMatrix {
 public:
  RowMatrix() = default;
  RowMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Probability vector over the source alphabet. Entries must be strictly
/// positive: zero-mass symbols contribute nothing and break the
/// strict-positivity assumptions in the solver's update ratios, so callers
/// must strip them before construction.
class SourceDistribution {
 public:
  explicit SourceDistribution(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Probability vector over the reconstruction alphabet. Zero entries are
/// allowed: reduced-support optima are legitimate.
class OutputDistribution {
 public:
  explicit OutputDistribution(std::vector<double> probs);

  static OutputDistribution uniform(std::size_t n);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Conditional reconstruction distribution Q(xhat | x), one simplex row per
/// source symbol.
class TransitionKernel {
 public:
  TransitionKernel(std::size_t rows, std::size_t cols, std::vector<double> data);

  static TransitionKernel identity(std::size_t n);
  static TransitionKernel constant_rows(std::size_t rows, const std::vector<double>& row);

  double operator()(std::size_t x, std::size_t xhat) const { return m_(x, xhat); }
  std::size_t rows() const { return m_.rows(); }
  std::size_t cols() const { return m_.cols(); }
  std::span<const double> row(std::size_t x) const { return m_.row(x); }
  const std::vector<double>& data() const { return m_.data(); }

 private:
  RowMatrix m_;
};

/// Per-symbol distortions d(x, xhat); all entries nonnegative and finite.
class DistortionMatrix {
 public:
  DistortionMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DistortionMatrix hamming(std::size_t n);

  double operator()(std::size_t x, std::size_t xhat) const { return m_(x, xhat); }
  std::size_t rows() const { return m_.rows(); }
  std::size_t cols() const { return m_.cols(); }
  std::span<const double> row(std::size_t x) const { return m_.row(x); }
  double max_value() const;

 private:
  RowMatrix m_;
};

/// q(xhat) = sum_x p(x) Q(xhat|x).
OutputDistribution induced_marginal(const SourceDistribution& p, const TransitionKernel& q);

/// I(X; Xhat) in nats under the joint p(x) Q(xhat|x), with the convention
/// 0 * ln(0/.) = 0 enforced by an explicit zero-mass short-circuit.
double mutual_information(const SourceDistribution& p, const TransitionKernel& q);

/// E[d(x, xhat)] under the joint p(x) Q(xhat|x).
double expected_distortion(const SourceDistribution& p, const TransitionKernel& q,
                           const DistortionMatrix& d);

/// ln( sum_i q(i) exp(log_a(i)) ) by max-shifted exponentiation. Entries with
/// q(i) == 0 are skipped regardless of log_a(i). Throws std::domain_error if
/// all q-mass sits on log_a = -inf entries.
double log_normalizer(std::span<const double> q, std::span<const double> log_a);

inline double log_normalizer(const OutputDistribution& q, std::span<const double> log_a) {
  return log_normalizer(std::span<const double>(q.probs()), log_a);
}

}  // namespace rdpf

#endif  // RDPF_SIMPLEX_HPP
