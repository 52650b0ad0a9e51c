#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "lsc/numerics/param_store.hpp"

namespace lsc {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;
};

/// First/second moment buffers per parameter plus the step counter.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  ParamStore<T> m;
  ParamStore<T> v;

  friend bool operator==(const AdamState& a, const AdamState& b) {
    return a.step == b.step && a.m == b.m && a.v == b.v && a.config.lr == b.config.lr &&
           a.config.beta1 == b.config.beta1 && a.config.beta2 == b.config.beta2 &&
           a.config.eps == b.config.eps;
  }
};

/// Bias-corrected Adam update, applied in place. Moments are created on first use.
template <typename T>
void adam_step(ParamStore<T>& params, const ParamStore<T>& grads, AdamState<T>& state) {
  if (grads.size() != params.size()) {
    throw ShapeError("adam: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (const auto& [name, p] : params) {
    if (!grads.contains(name)) throw ShapeError("adam: missing gradient for '" + name + "'");
    const auto& g = grads.at(name);
    if (g.shape() != p.shape()) {
      throw ShapeError("adam: gradient shape " + to_string(g.shape()) + " != parameter shape " +
                       to_string(p.shape()) + " for '" + name + "'");
    }
    g.check_finite("adam gradient");
  }

  const auto& c = state.config;
  const std::uint64_t t = state.step + 1;
  const double correct1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double correct2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (auto& [name, p] : params) {
    if (!state.m.contains(name)) {
      state.m.add(name, BasicTensor<T>(p.shape()));
      state.v.add(name, BasicTensor<T>(p.shape()));
    }
    auto& m = state.m.at(name);
    auto& v = state.v.at(name);
    const auto& g = grads.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / correct1;
      if (mhat == 0.0) continue;
      const double vhat = vi / correct2;
      p[i] = static_cast<T>(p[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
  state.step = t;
}

}  // namespace lsc
