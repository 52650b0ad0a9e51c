#include "lsc/numerics/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lsc::linalg {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                                " times " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("add: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

double trace(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("trace: matrix not square");
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) t += a(i, i);
  return t;
}

double frobenius(const Matrix& a) {
  double s = 0.0;
  for (auto v : a.data) s += v * v;
  return std::sqrt(s);
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SymmetricEigen symmetric_eigen(const Matrix& input, double tol, std::size_t max_sweeps) {
  if (input.rows != input.cols) throw std::invalid_argument("symmetric_eigen: matrix not square");
  const std::size_t n = input.rows;
  Matrix a = input;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
  Matrix v = Matrix::identity(n);

  const double scale = std::max(frobenius(a), 1e-300);
  std::size_t sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) <= tol * scale) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  if (sweep == max_sweeps && off_diagonal_norm(a) > tol * scale) {
    throw ConvergenceError("symmetric_eigen: Jacobi did not converge in " +
                               std::to_string(max_sweeps) + " sweeps",
                           off_diagonal_norm(a));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

PsdSqrt psd_sqrt(const Matrix& a) {
  auto eig = symmetric_eigen(a);
  const std::size_t n = a.rows;
  PsdSqrt out{Matrix(n, n), 0.0};
  std::vector<double> roots(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (eig.values[k] < 0.0) out.clipped = std::max(out.clipped, -eig.values[k]);
    roots[k] = std::sqrt(std::max(eig.values[k], 0.0));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += eig.vectors(i, k) * roots[k] * eig.vectors(j, k);
      out.root(i, j) = s;
    }
  return out;
}

std::vector<double> column_means(const Matrix& x) {
  std::vector<double> mu(x.cols, 0.0);
  if (x.rows == 0) return mu;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) mu[j] += x(i, j);
  for (auto& m : mu) m /= static_cast<double>(x.rows);
  return mu;
}

Matrix covariance(const Matrix& x) {
  if (x.rows < 2) throw std::invalid_argument("covariance: need at least two samples");
  const auto mu = column_means(x);
  Matrix cov(x.cols, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t a = 0; a < x.cols; ++a) {
      const double da = x(i, a) - mu[a];
      for (std::size_t b = a; b < x.cols; ++b) cov(a, b) += da * (x(i, b) - mu[b]);
    }
  const double denom = static_cast<double>(x.rows - 1);
  for (std::size_t a = 0; a < x.cols; ++a)
    for (std::size_t b = a; b < x.cols; ++b) cov(b, a) = cov(a, b) = cov(a, b) / denom;
  return cov;
}

}  // namespace lsc::linalg
