#include "lsc/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lsc::eval {

namespace {

linalg::Matrix to_matrix(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("eval: expected a [N, D] tensor, got " + to_string(t.shape()));
  linalg::Matrix m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.size(); ++i) m.data[i] = static_cast<double>(t[i]);
  return m;
}

void check_covariance(const linalg::Matrix& s, std::size_t d, const char* which) {
  if (s.rows != d || s.cols != d) {
    throw std::invalid_argument(std::string("frechet: ") + which + " is " + std::to_string(s.rows) + "x" +
                                std::to_string(s.cols) + ", mean has dimension " + std::to_string(d));
  }
  const double scale = std::max(1.0, linalg::frobenius(s));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      if (std::abs(s(i, j) - s(j, i)) > 1e-9 * scale) {
        throw std::invalid_argument(std::string("frechet: ") + which + " is not symmetric");
      }
    }
  }
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

Gaussian fit_gaussian(const linalg::Matrix& samples) {
  if (samples.rows < 2) throw std::invalid_argument("fit_gaussian: need at least two samples");
  return {linalg::column_means(samples), linalg::covariance(samples)};
}

Gaussian fit_gaussian(const Tensor& embeddings) { return fit_gaussian(to_matrix(embeddings)); }

double trace_sqrt_product(const linalg::Matrix& sigma1, const linalg::Matrix& sigma2, double* clipped) {
  const auto root1 = linalg::psd_sqrt(sigma1);
  const auto inner = linalg::matmul(linalg::matmul(root1.root, sigma2), root1.root);
  const auto eig = linalg::symmetric_eigen(inner);
  double tr = 0.0, worst = root1.clipped;
  for (double l : eig.values) {
    if (l < 0.0) worst = std::max(worst, -l);
    tr += std::sqrt(std::max(l, 0.0));
  }
  if (clipped) *clipped = worst;
  return tr;
}

double trace_sqrt_product(const linalg::Matrix& sigma1, const linalg::Matrix& sigma2) {
  return trace_sqrt_product(sigma1, sigma2, nullptr);
}

FrechetResult frechet(const std::vector<double>& mu1, const linalg::Matrix& sigma1, const std::vector<double>& mu2,
                      const linalg::Matrix& sigma2) {
  const std::size_t d = mu1.size();
  if (mu2.size() != d) {
    throw std::invalid_argument("frechet: mean dimensions " + std::to_string(d) + " and " +
                                std::to_string(mu2.size()) + " differ");
  }
  check_covariance(sigma1, d, "sigma1");
  check_covariance(sigma2, d, "sigma2");

  FrechetResult r;
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean_term += (mu1[i] - mu2[i]) * (mu1[i] - mu2[i]);

  const double tr_sqrt = trace_sqrt_product(sigma1, sigma2, &r.clipped);
  r.distance = std::max(0.0, mean_term + linalg::trace(sigma1) + linalg::trace(sigma2) - 2.0 * tr_sqrt);
  return r;
}

double frechet_distance(const std::vector<double>& mu1, const linalg::Matrix& sigma1, const std::vector<double>& mu2,
                        const linalg::Matrix& sigma2) {
  return frechet(mu1, sigma1, mu2, sigma2).distance;
}

double frechet_distance(const Gaussian& a, const Gaussian& b) { return frechet_distance(a.mean, a.cov, b.mean, b.cov); }

double inception_score(const linalg::Matrix& p) {
  if (p.rows == 0 || p.cols == 0) throw std::invalid_argument("inception_score: empty probability matrix");
  std::vector<double> marginal(p.cols, 0.0);
  for (std::size_t i = 0; i < p.rows; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < p.cols; ++c) {
      const double v = p(i, c);
      if (!(v >= 0.0)) throw std::invalid_argument("inception_score: row " + std::to_string(i) + " has a negative or NaN entry");
      sum += v;
      marginal[c] += v;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw std::invalid_argument("inception_score: row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
  for (auto& m : marginal) m /= static_cast<double>(p.rows);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.rows; ++i) {
    for (std::size_t c = 0; c < p.cols; ++c) {
      const double v = p(i, c);
      if (v > 0.0) kl += v * (std::log(v) - std::log(marginal[c]));
    }
  }
  return std::exp(kl / static_cast<double>(p.rows));
}

double inception_score(const Tensor& probs) { return inception_score(to_matrix(probs)); }

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: series lengths differ");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two points");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace lsc::eval
