#pragma once

// Dense row-major matrices and a Householder QR used to pre-factor the
// implicit system matrices (I - gamma * L). A factored solve is one
// transposed matrix-vector product followed by a back substitution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ridc/errors.hpp"

namespace ridc {

using StateVector = std::vector<double>;

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), entries_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw ContractViolation("DenseMatrix: dimensions must be positive");
    }
  }

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows == 0 || cols == 0) {
      throw ContractViolation("DenseMatrix: dimensions must be positive");
    }
    if (entries_.size() != rows * cols) {
      throw ContractViolation("DenseMatrix: expected " + std::to_string(rows * cols) +
                              " entries, got " + std::to_string(entries_.size()));
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * cols_, cols_};
  }
  std::span<const double> entries() const noexcept { return entries_; }

  /// Max absolute row sum.
  double norm_inf() const {
    double m = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (double x : row(i)) s += std::abs(x);
      m = std::max(m, s);
    }
    return m;
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

inline StateVector mat_vec(const DenseMatrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) {
    throw ContractViolation("mat_vec: matrix has " + std::to_string(m.cols()) +
                            " columns but vector has length " + std::to_string(x.size()));
  }
  StateVector y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

inline DenseMatrix mat_mul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ContractViolation("mat_mul: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

struct QrFactorization {
  DenseMatrix q;  // orthogonal
  DenseMatrix r;  // upper triangular, exact zeros below the diagonal

  std::size_t dimension() const noexcept { return r.rows(); }
};

namespace detail {

// a <- (I - beta v v^T) a on rows [k, n) and columns [col0, n), row-contiguous.
inline void apply_reflector(DenseMatrix& a, const std::vector<double>& v, double beta,
                            std::size_t k, std::size_t col0, std::vector<double>& w) {
  const std::size_t n = a.rows();
  std::fill(w.begin() + static_cast<std::ptrdiff_t>(col0), w.end(), 0.0);
  for (std::size_t i = k; i < n; ++i) {
    const double vi = v[i];
    for (std::size_t j = col0; j < n; ++j) w[j] += vi * a(i, j);
  }
  for (std::size_t i = k; i < n; ++i) {
    const double bvi = beta * v[i];
    for (std::size_t j = col0; j < n; ++j) a(i, j) -= bvi * w[j];
  }
}

}  // namespace detail

/// Householder QR without pivoting. Throws SingularMatrixError if any
/// |R_ii| < 1e-14 * ||M||_inf.
inline QrFactorization qr_factor(const DenseMatrix& m) {
  if (!m.square()) throw ContractViolation("qr_factor: matrix must be square");
  const std::size_t n = m.rows();
  const double scale = m.norm_inf();
  const double tiny = 1e-14 * scale;

  DenseMatrix r = m;
  // Reflectors are accumulated into Q^T, starting from the identity.
  DenseMatrix qt = DenseMatrix::identity(n);
  std::vector<double> v(n);
  std::vector<double> w(n);

  for (std::size_t k = 0; k < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k; i < n; ++i) alpha += r(i, k) * r(i, k);
    alpha = std::sqrt(alpha);
    if (alpha <= tiny) throw SingularMatrixError(k, alpha);
    if (r(k, k) > 0.0) alpha = -alpha;

    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      v[i] = r(i, k) - (i == k ? alpha : 0.0);
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) continue;  // column already reduced
    const double beta = 2.0 / vnorm2;

    detail::apply_reflector(r, v, beta, k, k, w);
    detail::apply_reflector(qt, v, beta, k, 0, w);
    r(k, k) = alpha;
    for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(r(k, k)) < tiny) throw SingularMatrixError(k, std::abs(r(k, k)));
  }
  return {qt.transpose(), std::move(r)};
}

/// Solves (QR) x = b as back substitution on Q^T b.
inline StateVector qr_solve(const QrFactorization& f, std::span<const double> b) {
  const std::size_t n = f.dimension();
  if (b.size() != n) {
    throw ContractViolation("qr_solve: right-hand side has length " + std::to_string(b.size()) +
                            ", factorization has dimension " + std::to_string(n));
  }
  // y = Q^T b, accumulated row by row of Q for contiguous access.
  StateVector x(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double bk = b[k];
    const auto qrow = f.q.row(k);
    for (std::size_t i = 0; i < n; ++i) x[i] += qrow[i] * bk;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    const auto rrow = f.r.row(ii);
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= rrow[j] * x[j];
    x[ii] = s / rrow[ii];
  }
  return x;
}

}  // namespace ridc
