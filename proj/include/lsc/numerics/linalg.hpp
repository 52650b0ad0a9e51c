#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Small dense double-precision linear algebra for metric computations
// (covariances, matrix square roots, PCA). Sizes here are tens, not thousands.

namespace lsc::linalg {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
double trace(const Matrix& a);
double frobenius(const Matrix& a);

/// Eigenpairs of a symmetric matrix; values descending, vectors as columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

/// Cyclic Jacobi rotations until the off-diagonal mass falls below
/// `tol * frobenius(a)`. Throws ConvergenceError carrying the remaining
/// off-diagonal norm if `max_sweeps` is exhausted.
SymmetricEigen symmetric_eigen(const Matrix& a, double tol = 1e-14, std::size_t max_sweeps = 100);

struct PsdSqrt {
  Matrix root;
  double clipped = 0.0;  // magnitude of the most negative eigenvalue clipped to zero
};

/// Principal square root of a symmetric PSD matrix (input is symmetrized first).
PsdSqrt psd_sqrt(const Matrix& a);

/// Column means of an [n, d] row-major sample block.
std::vector<double> column_means(const Matrix& samples);

/// Unbiased sample covariance (n - 1 denominator) of an [n, d] block.
Matrix covariance(const Matrix& samples);

}  // namespace lsc::linalg
