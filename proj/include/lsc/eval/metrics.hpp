#pragma once

#include <vector>

#include "lsc/numerics/linalg.hpp"
#include "lsc/numerics/tensor.hpp"

namespace lsc::eval {

/// Mean and unbiased covariance of embedding rows, in double.
struct Gaussian {
  std::vector<double> mean;
  linalg::Matrix cov;
  std::size_t dim() const noexcept { return mean.size(); }
};

/// Needs at least two rows.
Gaussian fit_gaussian(const Tensor& embeddings);
Gaussian fit_gaussian(const linalg::Matrix& samples);

struct FrechetResult {
  double distance = 0.0;
  double clipped = 0.0;  // largest negative eigenvalue clipped to zero in the square roots
};

/// |μ1−μ2|² + Tr(Σ1 + Σ2 − 2(Σ1Σ2)^½). The trace of (Σ1Σ2)^½ is taken as
/// Tr((Σ1^½ Σ2 Σ1^½)^½), a symmetric PSD product with the same spectrum.
/// Throws std::invalid_argument on mismatched or non-symmetric input and
/// linalg::ConvergenceError (with residual) if an eigensolve fails.
FrechetResult frechet(const std::vector<double>& mu1, const linalg::Matrix& sigma1, const std::vector<double>& mu2,
                      const linalg::Matrix& sigma2);
double frechet_distance(const std::vector<double>& mu1, const linalg::Matrix& sigma1, const std::vector<double>& mu2,
                        const linalg::Matrix& sigma2);
double frechet_distance(const Gaussian& a, const Gaussian& b);

/// Tr((Σ1Σ2)^½) as used by frechet().
double trace_sqrt_product(const linalg::Matrix& sigma1, const linalg::Matrix& sigma2);

/// exp(mean_i KL(p(y|x_i) || p̄(y))) over rows of class probabilities.
/// Throws std::invalid_argument when a row is negative or does not sum to 1 within 1e-5.
double inception_score(const linalg::Matrix& probs);
double inception_score(const Tensor& probs);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// series is constant. Throws on length mismatch or fewer than two points.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lsc::eval
