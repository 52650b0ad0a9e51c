#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lsc/numerics/tape.hpp"

// Differentiable ops recorded on a Tape. Each op computes its forward value
// eagerly and registers a closure that accumulates parent gradients.

namespace lsc::ops {

namespace detail {

template <typename T>
void require_rank(const BasicVar<T>& v, std::size_t rank, const char* op) {
  if (v.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     to_string(v.shape()));
  }
}

template <typename T>
void require_same(const BasicVar<T>& a, const BasicVar<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename T, typename F>
BasicVar<T> unary(BasicVar<T> x, F&& forward_and_slope) {
  auto& tape = x.tape();
  const auto& in = x.value();
  BasicTensor<T> out(in.shape());
  std::vector<T> slope(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [y, dy] = forward_and_slope(in[i]);
    out[i] = y;
    slope[i] = dy;
  }
  const auto xid = x.id();
  return tape.record(std::move(out), {x},
                     [xid, slope = std::move(slope)](Tape<T>& t, std::size_t self) {
                       if (!t.requires_grad(xid)) return;
                       auto gy = t.grad_buffer(self);
                       auto gx = t.grad_buffer(xid);
                       for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * slope[i];
                     });
}

}  // namespace detail

/// y[b,o] = sum_i x[b,i] w[o,i] + bias[o]
template <typename T>
BasicVar<T> affine(BasicVar<T> x, BasicVar<T> w, BasicVar<T> bias) {
  detail::require_rank(x, 2, "affine input");
  detail::require_rank(w, 2, "affine weight");
  detail::require_rank(bias, 1, "affine bias");
  const std::size_t batch = x.shape()[0], in = x.shape()[1], out = w.shape()[0];
  if (w.shape()[1] != in || bias.shape()[0] != out) {
    throw ShapeError("affine: input " + to_string(x.shape()) + ", weight " + to_string(w.shape()) +
                     ", bias " + to_string(bias.shape()));
  }
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = bias.value();
  BasicTensor<T> y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    const T* xr = &xv[b * in];
    for (std::size_t o = 0; o < out; ++o) {
      const T* wr = &wv[o * in];
      T acc = bv[o];
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      y[b * out + o] = acc;
    }
  }
  const auto xid = x.id(), wid = w.id(), bid = bias.id();
  return x.tape().record(
      std::move(y), {x, w, bias}, [=](Tape<T>& t, std::size_t self) {
        auto gy = t.grad_buffer(self);
        const auto& xv = t.value(xid);
        const auto& wv = t.value(wid);
        if (t.requires_grad(xid)) {
          auto gx = t.grad_buffer(xid);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out; ++o) {
              const T g = gy[b * out + o];
              if (g == T{0}) continue;
              for (std::size_t i = 0; i < in; ++i) gx[b * in + i] += g * wv[o * in + i];
            }
        }
        if (t.requires_grad(wid)) {
          auto gw = t.grad_buffer(wid);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out; ++o) {
              const T g = gy[b * out + o];
              if (g == T{0}) continue;
              for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += g * xv[b * in + i];
            }
        }
        if (t.requires_grad(bid)) {
          auto gb = t.grad_buffer(bid);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out; ++o) gb[o] += gy[b * out + o];
        }
      });
}

/// 2D cross-correlation over [B,C,H,W] with kernel [O,C,K,K], zero padding.
template <typename T>
BasicVar<T> conv2d(BasicVar<T> x, BasicVar<T> w, BasicVar<T> bias, std::size_t stride,
                   std::size_t padding) {
  detail::require_rank(x, 4, "conv2d input");
  detail::require_rank(w, 4, "conv2d kernel");
  detail::require_rank(bias, 1, "conv2d bias");
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  const std::size_t batch = xs[0], channels = xs[1], height = xs[2], width = xs[3];
  const std::size_t out_c = ws[0], k = ws[2];
  if (ws[1] != channels || ws[3] != k || bias.shape()[0] != out_c || stride == 0) {
    throw ShapeError("conv2d: input " + to_string(xs) + ", kernel " + to_string(ws) + ", bias " +
                     to_string(bias.shape()));
  }
  if (height + 2 * padding < k || width + 2 * padding < k) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                     to_string(xs));
  }
  const std::size_t out_h = (height + 2 * padding - k) / stride + 1;
  const std::size_t out_w = (width + 2 * padding - k) / stride + 1;
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = bias.value();
  BasicTensor<T> y({batch, out_c, out_h, out_w});
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const auto ih = static_cast<std::ptrdiff_t>(height), iw = static_cast<std::ptrdiff_t>(width);

  // Visits every (output, input, kernel) triple that lies inside the image.
  auto for_each_tap = [=](auto&& visit) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out_c; ++o)
        for (std::size_t oy = 0; oy < out_h; ++oy)
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::size_t yi = ((b * out_c + o) * out_h + oy) * out_w + ox;
            for (std::size_t c = 0; c < channels; ++c)
              for (std::size_t ky = 0; ky < k; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                if (iy < 0 || iy >= ih) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                  const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                  if (ix < 0 || ix >= iw) continue;
                  const std::size_t xi =
                      ((b * channels + c) * height + static_cast<std::size_t>(iy)) * width +
                      static_cast<std::size_t>(ix);
                  const std::size_t wi = ((o * channels + c) * k + ky) * k + kx;
                  visit(yi, xi, wi);
                }
              }
          }
  };

  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_c; ++o)
      std::fill_n(&y[(b * out_c + o) * out_h * out_w], out_h * out_w, bv[o]);
  for_each_tap([&](std::size_t yi, std::size_t xi, std::size_t wi) { y[yi] += xv[xi] * wv[wi]; });

  const auto xid = x.id(), wid = w.id(), bid = bias.id();
  const std::size_t plane = out_h * out_w;
  return x.tape().record(std::move(y), {x, w, bias}, [=](Tape<T>& t, std::size_t self) {
    auto gy = t.grad_buffer(self);
    const bool need_x = t.requires_grad(xid), need_w = t.requires_grad(wid);
    if (need_x || need_w) {
      const auto& xv = t.value(xid);
      const auto& wv = t.value(wid);
      std::span<T> gx, gw;
      if (need_x) gx = t.grad_buffer(xid);
      if (need_w) gw = t.grad_buffer(wid);
      for_each_tap([&](std::size_t yi, std::size_t xi, std::size_t wi) {
        const T g = gy[yi];
        if (need_x) gx[xi] += g * wv[wi];
        if (need_w) gw[wi] += g * xv[xi];
      });
    }
    if (t.requires_grad(bid)) {
      auto gb = t.grad_buffer(bid);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out_c; ++o)
          for (std::size_t p = 0; p < plane; ++p) gb[o] += gy[(b * out_c + o) * plane + p];
    }
  });
}

template <typename T>
BasicVar<T> leaky_relu(BasicVar<T> x, T slope) {
  return detail::unary(x, [slope](T v) {
    return v > T{0} ? std::pair<T, T>{v, T{1}} : std::pair<T, T>{slope * v, slope};
  });
}

template <typename T>
BasicVar<T> sigmoid(BasicVar<T> x) {
  return detail::unary(x, [](T v) {
    const T s = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
    return std::pair<T, T>{s, s * (T{1} - s)};
  });
}

/// log(clamp(x, lo, hi)); gradient is zero where the clamp is active.
template <typename T>
BasicVar<T> clamped_log(BasicVar<T> x, T lo, T hi) {
  return detail::unary(x, [lo, hi](T v) {
    if (v < lo) return std::pair<T, T>{std::log(lo), T{0}};
    if (v > hi) return std::pair<T, T>{std::log(hi), T{0}};
    return std::pair<T, T>{std::log(v), T{1} / v};
  });
}

/// a * x + b elementwise for scalar constants a, b.
template <typename T>
BasicVar<T> scale_shift(BasicVar<T> x, T a, T b) {
  return detail::unary(x, [a, b](T v) { return std::pair<T, T>{a * v + b, a}; });
}

template <typename T>
BasicVar<T> one_minus(BasicVar<T> x) {
  return scale_shift(x, T{-1}, T{1});
}

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b) {
  detail::require_same(a, b, "add");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  const auto aid = a.id(), bid = b.id();
  return a.tape().record(std::move(out), {a, b}, [aid, bid](Tape<T>& t, std::size_t self) {
    auto gy = t.grad_buffer(self);
    for (auto id : {aid, bid}) {
      if (!t.requires_grad(id)) continue;
      auto g = t.grad_buffer(id);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
    }
  });
}

template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b) {
  detail::require_same(a, b, "mul");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  const auto aid = a.id(), bid = b.id();
  return a.tape().record(std::move(out), {a, b}, [aid, bid](Tape<T>& t, std::size_t self) {
    auto gy = t.grad_buffer(self);
    const auto& av = t.value(aid);
    const auto& bv = t.value(bid);
    if (t.requires_grad(aid)) {
      auto g = t.grad_buffer(aid);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * bv[i];
    }
    if (t.requires_grad(bid)) {
      auto g = t.grad_buffer(bid);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * av[i];
    }
  });
}

/// Sum of all elements as a rank-0 tensor.
template <typename T>
BasicVar<T> sum(BasicVar<T> x) {
  T acc{0};
  for (auto v : x.value().values()) acc += v;
  const auto xid = x.id();
  return x.tape().record(BasicTensor<T>(Shape{}, std::vector<T>{acc}), {x},
                         [xid](Tape<T>& t, std::size_t self) {
                           if (!t.requires_grad(xid)) return;
                           const T g = t.grad_buffer(self)[0];
                           for (auto& v : t.grad_buffer(xid)) v += g;
                         });
}

/// Mean of all elements as a rank-0 tensor.
template <typename T>
BasicVar<T> mean(BasicVar<T> x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale_shift(sum(x), T{1} / static_cast<T>(n), T{0});
}

/// Weighted sum of rank-0 terms.
template <typename T>
BasicVar<T> weighted_sum(const std::vector<BasicVar<T>>& terms, const std::vector<T>& weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: need one weight per term");
  }
  T acc{0};
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().size() != 1) throw ShapeError("weighted_sum: terms must be scalars");
    acc += weights[i] * terms[i].value()[0];
  }
  std::vector<std::size_t> ids;
  for (const auto& v : terms) ids.push_back(v.id());
  return terms[0].tape().record(BasicTensor<T>(Shape{}, std::vector<T>{acc}), terms,
                                [ids, weights](Tape<T>& t, std::size_t self) {
                                  const T g = t.grad_buffer(self)[0];
                                  for (std::size_t i = 0; i < ids.size(); ++i) {
                                    if (t.requires_grad(ids[i])) t.grad_buffer(ids[i])[0] += weights[i] * g;
                                  }
                                });
}

template <typename T>
BasicVar<T> reshape(BasicVar<T> x, Shape shape) {
  auto out = x.value().reshaped(std::move(shape));
  const auto xid = x.id();
  return x.tape().record(std::move(out), {x}, [xid](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto gy = t.grad_buffer(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
}

/// [B, ...] -> [B, prod(...)]
template <typename T>
BasicVar<T> flatten(BasicVar<T> x) {
  if (x.shape().empty()) throw ShapeError("flatten: scalar input");
  const std::size_t batch = x.shape()[0];
  return reshape(x, Shape{batch, batch ? x.value().size() / batch : 0});
}

/// Concatenates along axis 1; all other extents must agree.
template <typename T>
BasicVar<T> concat_channels(BasicVar<T> a, BasicVar<T> b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  bool ok = as.size() >= 2 && as.size() == bs.size() && as[0] == bs[0];
  for (std::size_t d = 2; ok && d < as.size(); ++d) ok = as[d] == bs[d];
  if (!ok) {
    throw ShapeError("concat_channels: incompatible shapes " + to_string(as) + " and " +
                     to_string(bs));
  }
  const std::size_t batch = as[0];
  const std::size_t ra = a.value().size() / std::max<std::size_t>(batch, 1);
  const std::size_t rb = b.value().size() / std::max<std::size_t>(batch, 1);
  Shape shape = as;
  shape[1] += bs[1];
  BasicTensor<T> out(shape);
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(&a.value()[n * ra], ra, &out[n * (ra + rb)]);
    std::copy_n(&b.value()[n * rb], rb, &out[n * (ra + rb) + ra]);
  }
  const auto aid = a.id(), bid = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape<T>& t, std::size_t self) {
    auto gy = t.grad_buffer(self);
    if (t.requires_grad(aid)) {
      auto g = t.grad_buffer(aid);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < ra; ++i) g[n * ra + i] += gy[n * (ra + rb) + i];
    }
    if (t.requires_grad(bid)) {
      auto g = t.grad_buffer(bid);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < rb; ++i) g[n * rb + i] += gy[n * (ra + rb) + ra + i];
    }
  });
}

/// Stacks vars along the leading axis.
template <typename T>
BasicVar<T> concat_rows(const std::vector<BasicVar<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  std::vector<BasicTensor<T>> values;
  for (const auto& p : parts) values.push_back(p.value());
  auto out = lsc::concat_rows<T>(std::span<const BasicTensor<T>>(values));
  std::vector<std::size_t> ids, sizes;
  for (const auto& p : parts) {
    ids.push_back(p.id());
    sizes.push_back(p.value().size());
  }
  return parts[0].tape().record(std::move(out), parts,
                                [ids, sizes](Tape<T>& t, std::size_t self) {
                                  auto gy = t.grad_buffer(self);
                                  std::size_t offset = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (t.requires_grad(ids[k])) {
                                      auto g = t.grad_buffer(ids[k]);
                                      for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += gy[offset + i];
                                    }
                                    offset += sizes[k];
                                  }
                                });
}

/// Rows [begin, end) along the leading axis.
template <typename T>
BasicVar<T> slice_rows(BasicVar<T> x, std::size_t begin, std::size_t end) {
  auto out = lsc::slice_rows(x.value(), begin, end);
  const std::size_t row = x.value().size() / x.shape()[0];
  const auto xid = x.id();
  return x.tape().record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto gy = t.grad_buffer(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[begin * row + i] += gy[i];
  });
}

/// Nearest-neighbour upsampling of [B,C,H,W] by an integer factor.
template <typename T>
BasicVar<T> upsample_nearest(BasicVar<T> x, std::size_t factor) {
  detail::require_rank(x, 4, "upsample");
  if (factor == 0) throw ShapeError("upsample: factor must be positive");
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const std::size_t oh = h * factor, ow = w * factor;
  BasicTensor<T> out({s[0], s[1], oh, ow});
  const auto& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        out[(p * oh + y) * ow + xx] = xv[(p * h + y / factor) * w + xx / factor];
  const auto xid = x.id();
  return x.tape().record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto gy = t.grad_buffer(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx)
          gx[(p * h + y / factor) * w + xx / factor] += gy[(p * oh + y) * ow + xx];
  });
}

/// Row-wise softmax of a [B, K] tensor.
template <typename T>
BasicVar<T> softmax(BasicVar<T> x) {
  detail::require_rank(x, 2, "softmax");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  BasicTensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = xv[r * cols];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xv[r * cols + c]);
    T z{0};
    for (std::size_t c = 0; c < cols; ++c) z += out[r * cols + c] = std::exp(xv[r * cols + c] - mx);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= z;
  }
  const auto xid = x.id();
  return x.tape().record(std::move(out), {x}, [=](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto gy = t.grad_buffer(self);
    const auto& y = t.value(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot{0};
      for (std::size_t c = 0; c < cols; ++c) dot += gy[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c)
        gx[r * cols + c] += y[r * cols + c] * (gy[r * cols + c] - dot);
    }
  });
}

/// Mean negative log-likelihood of integer targets under softmax(logits).
template <typename T>
BasicVar<T> cross_entropy(BasicVar<T> logits, std::span<const int> targets) {
  detail::require_rank(logits, 2, "cross_entropy");
  const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  const auto& xv = logits.value();
  std::vector<T> probs(rows * cols);
  T loss{0};
  for (std::size_t r = 0; r < rows; ++r) {
    const auto label = targets[r];
    if (label < 0 || static_cast<std::size_t>(label) >= cols) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(label) + " outside [0," +
                              std::to_string(cols) + ")");
    }
    T mx = xv[r * cols];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xv[r * cols + c]);
    T z{0};
    for (std::size_t c = 0; c < cols; ++c) z += probs[r * cols + c] = std::exp(xv[r * cols + c] - mx);
    for (std::size_t c = 0; c < cols; ++c) probs[r * cols + c] /= z;
    loss -= xv[r * cols + static_cast<std::size_t>(label)] - mx - std::log(z);
  }
  loss /= static_cast<T>(rows);
  std::vector<int> labels(targets.begin(), targets.end());
  const auto xid = logits.id();
  return logits.tape().record(
      BasicTensor<T>(Shape{}, std::vector<T>{loss}), {logits},
      [=, probs = std::move(probs), labels = std::move(labels)](Tape<T>& t, std::size_t self) {
        if (!t.requires_grad(xid)) return;
        const T g = t.grad_buffer(self)[0] / static_cast<T>(rows);
        auto gx = t.grad_buffer(xid);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            const T onehot = static_cast<std::size_t>(labels[r]) == c ? T{1} : T{0};
            gx[r * cols + c] += g * (probs[r * cols + c] - onehot);
          }
      });
}

}  // namespace lsc::ops
