#pragma once

#include <cstddef>
#include <vector>

namespace mdgp {

/// Dense row-major matrix of doubles. Small-scale workhorse for the whole
/// project; no aliasing tricks, no views, everything owned.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;  // row-major, rows*cols

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), entries(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) {
    return entries[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return entries[i * cols + j];
  }
  const double* row(std::size_t i) const { return entries.data() + i * cols; }
  double* row(std::size_t i) { return entries.data() + i * cols; }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool all_finite() const;
};

/// Lower-triangular Cholesky factor L with L·Lᵀ = a.
///
/// Requires a symmetric (within 1e-10 relative) positive-definite input.
/// Throws NotPositiveDefinite when a pivot falls at or below
/// dim · 1e-12 · max-diagonal; callers may jitter the diagonal and retry.
DenseMatrix cholesky(const DenseMatrix& a);

/// y = m·x for an r×c matrix and length-c vector.
std::vector<double> matvec(const DenseMatrix& m, const std::vector<double>& x);

/// c = a·b.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// In-place LU factorization with partial pivoting plus solve; used for the
/// (indefinite) ordinary-kriging systems. Throws std::runtime_error on a
/// numerically singular matrix.
class LuSolver {
 public:
  explicit LuSolver(DenseMatrix a);
  std::vector<double> solve(const std::vector<double>& rhs) const;
  std::size_t dim() const { return lu_.rows; }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

/// Exponential covariance sigma2 · exp(−distance / rho).
double exp_cov(double distance, double sigma2, double rho);

/// Type-7 linear-interpolation quantile of an unsorted sample.
/// Throws std::invalid_argument on an empty sample.
double empirical_quantile(std::vector<double> samples, double level);

/// Same, but for a sample the caller has already sorted ascending.
double empirical_quantile_sorted(const std::vector<double>& sorted,
                                 double level);

}  // namespace mdgp
