#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsc/numerics/tape.hpp"

namespace lsc {

/// Raised when a matrix is too close to zero for its spectral norm to be estimated.
class DegenerateMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct PowerIterate {
  T sigma{};
  std::vector<T> u;  // left singular estimate, length rows
  std::vector<T> v;  // right singular estimate, length cols
};

template <typename T>
struct SpectralResult {
  BasicTensor<T> normalized;
  std::vector<T> u;
  T sigma{};
};

namespace detail {

template <typename T>
T normalize_in_place(std::vector<T>& x) {
  T norm{0};
  for (auto v : x) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > T{0}) {
    for (auto& v : x) v /= norm;
  }
  return norm;
}

}  // namespace detail

/// Views any rank >= 2 weight as [rows, rest]; rank-1 is rejected.
inline std::pair<std::size_t, std::size_t> matrix_view(const Shape& shape) {
  if (shape.size() < 2) throw ShapeError("spectral: weight must have rank >= 2, got " + to_string(shape));
  return {shape[0], numel(shape) / shape[0]};
}

/// `iters` rounds of v = W^T u / |.|, u = W v / |.|, then sigma = u^T W v.
template <typename T>
PowerIterate<T> power_iteration(const BasicTensor<T>& w, std::vector<T> u, std::size_t iters) {
  const auto [rows, cols] = matrix_view(w.shape());
  if (u.size() != rows) {
    throw ShapeError("spectral: u has length " + std::to_string(u.size()) + ", expected " +
                     std::to_string(rows));
  }
  if (detail::normalize_in_place(u) == T{0}) throw std::invalid_argument("spectral: u must be non-zero");
  constexpr T tiny = T{1e-12};
  std::vector<T> v(cols);
  const std::size_t rounds = iters == 0 ? 1 : iters;
  for (std::size_t it = 0; it < rounds; ++it) {
    std::fill(v.begin(), v.end(), T{0});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) v[c] += w[r * cols + c] * u[r];
    if (detail::normalize_in_place(v) < tiny) {
      throw DegenerateMatrixError("spectral: |W^T u| below tolerance; matrix is (near) zero");
    }
    if (iters == 0) break;
    for (std::size_t r = 0; r < rows; ++r) {
      T acc{0};
      for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * v[c];
      u[r] = acc;
    }
    if (detail::normalize_in_place(u) < tiny) {
      throw DegenerateMatrixError("spectral: |W v| below tolerance; matrix is (near) zero");
    }
  }
  T sigma{0};
  for (std::size_t r = 0; r < rows; ++r) {
    T acc{0};
    for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * v[c];
    sigma += u[r] * acc;
  }
  if (!(sigma > tiny)) {
    throw DegenerateMatrixError("spectral: sigma estimate " + std::to_string(sigma) +
                                " below tolerance");
  }
  return {sigma, std::move(u), std::move(v)};
}

/// Returns W / sigma_hat together with the advanced u and the estimate itself.
template <typename T>
SpectralResult<T> spectral_normalize(const BasicTensor<T>& w, std::vector<T> u, std::size_t iters) {
  auto est = power_iteration(w, std::move(u), iters);
  BasicTensor<T> out(w.shape());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] / est.sigma;
  return {std::move(out), std::move(est.u), est.sigma};
}

namespace ops {

/// Differentiable W / sigma(W) with sigma = u^T W v and u, v held fixed in the
/// backward pass, so dL/dW = (G - <G, W_sn> u v^T) / sigma.
/// `u` is read and, when `update` is set, replaced by the advanced estimate.
template <typename T>
BasicVar<T> spectral_normalized(BasicVar<T> w, std::vector<T>& u, std::size_t iters, bool update) {
  auto est = power_iteration(w.value(), u, iters);
  if (update) u = est.u;
  const T sigma = est.sigma;
  const auto& wv = w.value();
  BasicTensor<T> out(wv.shape());
  for (std::size_t i = 0; i < wv.size(); ++i) out[i] = wv[i] / sigma;
  const auto [rows, cols] = matrix_view(wv.shape());
  const auto wid = w.id();
  return w.tape().record(
      std::move(out), {w},
      [=, uu = std::move(est.u), vv = std::move(est.v)](Tape<T>& t, std::size_t self) {
        if (!t.requires_grad(wid)) return;
        auto gy = t.grad_buffer(self);
        const auto& y = t.value(self);
        T inner{0};
        for (std::size_t i = 0; i < gy.size(); ++i) inner += gy[i] * y[i];
        auto gw = t.grad_buffer(wid);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            gw[i] += (gy[i] - inner * uu[r] * vv[c]) / sigma;
          }
      });
}

}  // namespace ops

}  // namespace lsc
