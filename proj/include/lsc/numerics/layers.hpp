#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "lsc/numerics/ops.hpp"
#include "lsc/numerics/rng.hpp"
#include "lsc/numerics/spectral.hpp"

namespace lsc {

namespace layers {
struct Affine {
  std::size_t in = 0;
  std::size_t out = 0;
};
struct Conv2d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
};
struct LeakyRelu {
  double slope = 0.2;
};
struct Sigmoid {};
struct Softmax {};
struct Flatten {};
/// Per-sample target shape; the batch axis is kept.
struct Reshape {
  Shape sample_shape;
};
struct Upsample {
  std::size_t factor = 2;
};
/// Joins a second input along the channel axis. Only valid as a network's first layer.
struct ChannelConcat {
  std::size_t extra_channels = 0;
};
}  // namespace layers

using LayerSpec = std::variant<layers::Affine, layers::Conv2d, layers::LeakyRelu, layers::Sigmoid,
                               layers::Softmax, layers::Flatten, layers::Reshape, layers::Upsample,
                               layers::ChannelConcat>;

std::string describe(const LayerSpec& layer);

inline bool has_params(const LayerSpec& layer) {
  return std::holds_alternative<layers::Affine>(layer) || std::holds_alternative<layers::Conv2d>(layer);
}

/// Per-sample output shape (batch axis excluded), or ShapeError with the offending extents.
Shape infer_shape(const LayerSpec& layer, const Shape& sample_in);

/// Weight and bias bound on a tape for a parametric layer.
template <typename T>
struct LayerParams {
  BasicVar<T> weight;
  BasicVar<T> bias;
};

/// Applies one unary layer to a batched input.
template <typename T>
BasicVar<T> layer_forward(const LayerSpec& layer, BasicVar<T> input,
                          const std::optional<LayerParams<T>>& params = std::nullopt) {
  if (input.shape().empty()) throw ShapeError("layer " + describe(layer) + ": input has no batch axis");
  const Shape sample(input.shape().begin() + 1, input.shape().end());
  infer_shape(layer, sample);
  return std::visit(
      [&](const auto& l) -> BasicVar<T> {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, layers::Affine> || std::is_same_v<L, layers::Conv2d>) {
          if (!params) throw std::invalid_argument("layer " + describe(layer) + ": missing parameters");
          if constexpr (std::is_same_v<L, layers::Affine>) {
            return ops::affine(input, params->weight, params->bias);
          } else {
            return ops::conv2d(input, params->weight, params->bias, l.stride, l.padding);
          }
        } else if constexpr (std::is_same_v<L, layers::LeakyRelu>) {
          return ops::leaky_relu(input, static_cast<T>(l.slope));
        } else if constexpr (std::is_same_v<L, layers::Sigmoid>) {
          return ops::sigmoid(input);
        } else if constexpr (std::is_same_v<L, layers::Softmax>) {
          return ops::softmax(input);
        } else if constexpr (std::is_same_v<L, layers::Flatten>) {
          return ops::flatten(input);
        } else if constexpr (std::is_same_v<L, layers::Reshape>) {
          Shape full{input.shape()[0]};
          full.insert(full.end(), l.sample_shape.begin(), l.sample_shape.end());
          return ops::reshape(input, full);
        } else if constexpr (std::is_same_v<L, layers::Upsample>) {
          return ops::upsample_nearest(input, l.factor);
        } else {
          throw std::invalid_argument("layer channel-concat takes two inputs");
        }
      },
      layer);
}

/// Channel-concat layer: joins `second` after `first` along axis 1.
template <typename T>
BasicVar<T> layer_forward(const layers::ChannelConcat& layer, BasicVar<T> first, BasicVar<T> second) {
  if (second.shape().size() < 2 || second.shape()[1] != layer.extra_channels) {
    throw ShapeError("channel-concat: second input " + to_string(second.shape()) + " must carry " +
                     std::to_string(layer.extra_channels) + " channels");
  }
  return ops::concat_channels(first, second);
}

/// Power-iteration vectors keyed by weight name.
template <typename T>
using SpectralState = std::map<std::string, std::vector<T>>;

enum class SpectralMode { frozen, update };

/// Feed-forward stack of layers with named parameters.
///
/// Parameter names are "<name>.<index>.weight" / "<name>.<index>.bias". With
/// spectral normalization on, every weight is divided by its power-iteration
/// spectral-norm estimate on the way into its op.
template <typename T>
class Network {
 public:
  Network() = default;

  Network(std::string name, Shape sample_input, std::vector<LayerSpec> layers,
          bool spectral_norm = false, std::size_t spectral_iters = 1)
      : name_(std::move(name)),
        input_(std::move(sample_input)),
        layers_(std::move(layers)),
        spectral_norm_(spectral_norm),
        spectral_iters_(spectral_iters) {
    Shape s = input_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (std::holds_alternative<layers::ChannelConcat>(layers_[i])) {
        if (i != 0) throw std::invalid_argument(name_ + ": channel-concat must be the first layer");
        const auto& cc = std::get<layers::ChannelConcat>(layers_[i]);
        if (s.size() < 1) throw ShapeError(name_ + ": channel-concat needs a channel axis");
        s[0] += cc.extra_channels;
      } else {
        try {
          s = infer_shape(layers_[i], s);
        } catch (const ShapeError& e) {
          throw ShapeError(name_ + " layer " + std::to_string(i) + ": " + e.what());
        }
      }
      shapes_.push_back(s);
    }
  }

  const std::string& name() const noexcept { return name_; }
  const Shape& input_shape() const noexcept { return input_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t depth() const noexcept { return layers_.size(); }
  bool spectral_norm() const noexcept { return spectral_norm_; }
  std::size_t spectral_iters() const noexcept { return spectral_iters_; }

  /// Per-sample shape after layer `index` (inclusive).
  const Shape& shape_after(std::size_t index) const { return shapes_.at(index); }
  const Shape& output_shape() const { return shapes_.empty() ? input_ : shapes_.back(); }

  std::string weight_name(std::size_t i) const { return name_ + "." + std::to_string(i) + ".weight"; }
  std::string bias_name(std::size_t i) const { return name_ + "." + std::to_string(i) + ".bias"; }

  /// Fan-in scaled uniform weights U(-sqrt(3/fan_in), sqrt(3/fan_in)), zero biases.
  void init_params(ParamStore<T>& store, Rng& rng) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Shape w;
      std::size_t out = 0;
      if (const auto* a = std::get_if<layers::Affine>(&layers_[i])) {
        w = {a->out, a->in};
        out = a->out;
      } else if (const auto* c = std::get_if<layers::Conv2d>(&layers_[i])) {
        w = {c->out_channels, c->in_channels, c->kernel, c->kernel};
        out = c->out_channels;
      } else {
        continue;
      }
      const std::size_t fan_in = numel(w) / w[0];
      const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
      BasicTensor<T> weight(w);
      for (auto& v : weight.values()) v = static_cast<T>(rng.uniform(-bound, bound));
      store.add(weight_name(i), std::move(weight));
      store.add(bias_name(i), BasicTensor<T>(Shape{out}));
    }
  }

  /// Unit-norm random starting vectors for each weight's power iteration.
  SpectralState<T> init_spectral(Rng& rng) const {
    SpectralState<T> state;
    if (!spectral_norm_) return state;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      std::size_t rows = 0;
      if (const auto* a = std::get_if<layers::Affine>(&layers_[i])) rows = a->out;
      if (const auto* c = std::get_if<layers::Conv2d>(&layers_[i])) rows = c->out_channels;
      if (rows == 0) continue;
      std::vector<T> u(rows);
      for (auto& v : u) v = static_cast<T>(rng.normal());
      detail::normalize_in_place(u);
      state.emplace(weight_name(i), std::move(u));
    }
    return state;
  }

  /// Runs layers [0, stop) (all by default). `second` feeds a leading channel-concat.
  BasicVar<T> forward(Tape<T>& tape, const ParamStore<T>& params, BasicVar<T> input,
                      SpectralState<T>* spectral = nullptr, SpectralMode mode = SpectralMode::frozen,
                      std::optional<BasicVar<T>> second = std::nullopt,
                      std::size_t stop = static_cast<std::size_t>(-1)) const {
    check_input(input);
    if (spectral_norm_ && !spectral) {
      throw std::invalid_argument(name_ + ": spectral state required when spectral norm is enabled");
    }
    BasicVar<T> h = input;
    const std::size_t end = std::min(stop, layers_.size());
    for (std::size_t i = 0; i < end; ++i) {
      const auto& layer = layers_[i];
      if (const auto* cc = std::get_if<layers::ChannelConcat>(&layer)) {
        if (!second) throw std::invalid_argument(name_ + ": channel-concat needs a second input");
        if (second->shape().size() != input.shape().size() || second->shape()[0] != input.shape()[0]) {
          throw ShapeError(name_ + ": second input " + to_string(second->shape()) +
                           " does not pair with " + to_string(input.shape()));
        }
        h = layer_forward(*cc, h, *second);
        continue;
      }
      std::optional<LayerParams<T>> p;
      if (has_params(layer)) {
        auto w = tape.param(params, weight_name(i));
        // Weights without a power-iteration vector (e.g. a zeroed head) are used raw.
        if (auto it = spectral_norm_ ? spectral->find(weight_name(i)) : spectral->end();
            spectral_norm_ && it != spectral->end()) {
          w = ops::spectral_normalized(w, it->second, spectral_iters_, mode == SpectralMode::update);
        }
        p = LayerParams<T>{w, tape.param(params, bias_name(i))};
      }
      h = layer_forward(layer, h, p);
    }
    return h;
  }

 private:
  void check_input(const BasicVar<T>& input) const {
    const auto& s = input.shape();
    if (s.size() != input_.size() + 1 || !std::equal(input_.begin(), input_.end(), s.begin() + 1)) {
      throw ShapeError(name_ + ": expected input [B," + to_string(input_).substr(1) + ", got " +
                       to_string(s));
    }
  }

  std::string name_;
  Shape input_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  bool spectral_norm_ = false;
  std::size_t spectral_iters_ = 1;
};

}  // namespace lsc
