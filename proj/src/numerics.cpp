#include "mdgp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mdgp/errors.hpp"

namespace mdgp {

bool DenseMatrix::all_finite() const {
  for (double v : entries) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

DenseMatrix cholesky(const DenseMatrix& a) {
  const std::size_t n = a.rows;
  if (n == 0 || a.cols != n) {
    throw std::invalid_argument("cholesky: matrix must be square, dim >= 1");
  }
  double max_abs = 0.0;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_diag = std::max(max_diag, a(i, i));
    for (std::size_t j = 0; j < n; ++j) {
      max_abs = std::max(max_abs, std::abs(a(i, j)));
    }
  }
  const double sym_tol = 1e-10 * std::max(1.0, max_abs);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > sym_tol) {
        throw std::invalid_argument("cholesky: matrix not symmetric");
      }
    }
  }

  const double pivot_tol = static_cast<double>(n) * 1e-12 * max_diag;
  DenseMatrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a(i, j);
      const double* li = l.row(i);
      const double* lj = l.row(j);
      for (std::size_t k = 0; k < j; ++k) sum -= li[k] * lj[k];
      if (i == j) {
        if (sum <= pivot_tol) throw NotPositiveDefinite(i);
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

std::vector<double> matvec(const DenseMatrix& m, const std::vector<double>& x) {
  if (x.size() != m.cols) throw std::invalid_argument("matvec: dim mismatch");
  std::vector<double> y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* mi = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += mi[j] * x[j];
    y[i] = s;
  }
  return y;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: dim mismatch");
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

LuSolver::LuSolver(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows) {
  const std::size_t n = lu_.rows;
  if (lu_.cols != n || n == 0) {
    throw std::invalid_argument("LuSolver: matrix must be square");
  }
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best < 1e-300) throw std::runtime_error("LuSolver: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
      std::swap(perm_[k], perm_[piv]);
    }
    const double pivot = lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / pivot;
      lu_(i, k) = f;
      if (f == 0.0) continue;
      double* ri = lu_.row(i);
      const double* rk = lu_.row(k);
      for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
    }
  }
}

std::vector<double> LuSolver::solve(const std::vector<double>& rhs) const {
  const std::size_t n = lu_.rows;
  if (rhs.size() != n) throw std::invalid_argument("LuSolver: rhs dim");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = lu_.row(i);
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= ri[j] * x[j];
    x[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    const double* ri = lu_.row(ii);
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= ri[j] * x[j];
    x[ii] = s / ri[ii];
  }
  return x;
}

double exp_cov(double distance, double sigma2, double rho) {
  if (distance < 0.0) throw std::invalid_argument("exp_cov: negative distance");
  return sigma2 * std::exp(-distance / rho);
}

double empirical_quantile_sorted(const std::vector<double>& sorted,
                                 double level) {
  if (sorted.empty()) {
    throw std::invalid_argument("empirical_quantile: empty sample");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("empirical_quantile: level outside (0,1)");
  }
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = static_cast<double>(n - 1) * level;
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double empirical_quantile(std::vector<double> samples, double level) {
  std::sort(samples.begin(), samples.end());
  return empirical_quantile_sorted(samples, level);
}

}  // namespace mdgp
