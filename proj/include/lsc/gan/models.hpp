#pragma once

#include <optional>
#include <vector>

#include "lsc/numerics/layers.hpp"

namespace lsc::gan {

/// MLP generator: (z ⊕ f) -> hidden lrelu layers -> sigmoid image.
struct GeneratorArch {
  std::size_t noise_dim = 16;
  std::size_t code_dim = 64;
  std::vector<std::size_t> hidden{128, 128};
  Shape image{1, 8, 8};
  bool use_codes = true;  // false: the code input is replaced by zeros (unconditional baseline)
};

template <typename T>
class Generator {
 public:
  using Var = BasicVar<T>;

  Generator() = default;
  Generator(const GeneratorArch& arch, std::uint64_t seed) : arch_(arch), net_(build(arch)) {
    Rng rng(derive_seed(seed, 11));
    net_.init_params(params_, rng);
  }

  const GeneratorArch& arch() const noexcept { return arch_; }
  const Network<T>& network() const noexcept { return net_; }
  const ParamStore<T>& params() const noexcept { return params_; }
  ParamStore<T>& params() noexcept { return params_; }

  /// Records G(z ⊕ f) on `tape`; z is [B, Z], f is [B, F].
  Var forward(Tape<T>& tape, Var z, Var f) const {
    if (z.shape().size() != 2 || f.shape().size() != 2 || z.shape()[1] != arch_.noise_dim ||
        f.shape()[1] != arch_.code_dim || z.shape()[0] != f.shape()[0]) {
      throw ShapeError("generator: noise " + to_string(z.shape()) + " and code " + to_string(f.shape()) +
                       " do not match [B," + std::to_string(arch_.noise_dim) + "] / [B," +
                       std::to_string(arch_.code_dim) + "]");
    }
    if (!arch_.use_codes) f = tape.constant(BasicTensor<T>(f.shape()));
    return net_.forward(tape, params_, ops::concat_channels(z, f));
  }

  /// Inference without gradient tracking.
  BasicTensor<T> generate(const BasicTensor<T>& z, const BasicTensor<T>& f) const {
    Tape<T> tape(false);
    return forward(tape, tape.constant(z), tape.constant(f)).value();
  }

 private:
  static Network<T> build(const GeneratorArch& a) {
    std::vector<LayerSpec> layers;
    std::size_t width = a.noise_dim + a.code_dim;
    for (auto h : a.hidden) {
      layers.push_back(layers::Affine{width, h});
      layers.push_back(layers::LeakyRelu{0.2});
      width = h;
    }
    layers.push_back(layers::Affine{width, numel(a.image)});
    layers.push_back(layers::Sigmoid{});
    layers.push_back(layers::Reshape{a.image});
    return Network<T>("gen", {a.noise_dim + a.code_dim}, std::move(layers));
  }

  GeneratorArch arch_;
  Network<T> net_;
  ParamStore<T> params_;
};

/// Convolutional discriminator with a sigmoid head. When coupled, the two
/// input images are concatenated along channels (first image first).
struct DiscriminatorArch {
  Shape image{1, 8, 8};
  std::size_t conv1 = 16;
  std::size_t conv2 = 32;
  std::size_t hidden = 64;
  bool coupled = true;
  bool spectral_norm = true;
  std::size_t spectral_iters = 1;
  std::size_t spectral_warmup = 20;  // power iterations on the initial weights
};

template <typename T>
class Discriminator {
 public:
  using Var = BasicVar<T>;

  Discriminator() = default;
  Discriminator(const DiscriminatorArch& arch, std::uint64_t seed) : arch_(arch), net_(build(arch)) {
    Rng rng(derive_seed(seed, 12));
    net_.init_params(params_, rng);
    spectral_ = net_.init_spectral(rng);
    for (auto& [name, u] : spectral_) u = power_iteration(params_.at(name), u, arch.spectral_warmup).u;
  }

  const DiscriminatorArch& arch() const noexcept { return arch_; }
  const Network<T>& network() const noexcept { return net_; }
  const ParamStore<T>& params() const noexcept { return params_; }
  ParamStore<T>& params() noexcept { return params_; }
  const SpectralState<T>& spectral() const noexcept { return spectral_; }
  SpectralState<T>& spectral() noexcept { return spectral_; }

  /// Probabilities [B] for the pairs (a_i, b_i), or for single images a_i.
  Var forward(Tape<T>& tape, Var a, std::optional<Var> b = std::nullopt,
              SpectralMode mode = SpectralMode::frozen) {
    if (arch_.coupled != b.has_value()) {
      throw std::invalid_argument(arch_.coupled ? "discriminator: coupled variant needs two images"
                                                : "discriminator: single-image variant takes one image");
    }
    if (b && a.shape() != b->shape()) {
      throw ShapeError("discriminator: pair shapes " + to_string(a.shape()) + " and " + to_string(b->shape()) +
                       " differ");
    }
    auto out = net_.forward(tape, params_, a, &spectral_, mode, b);
    return ops::reshape(out, Shape{out.shape()[0]});
  }

  std::vector<T> discriminate(const BasicTensor<T>& a, const std::optional<BasicTensor<T>>& b = std::nullopt) {
    Tape<T> tape(false);
    std::optional<Var> bv;
    if (b) bv = tape.constant(*b);
    const auto p = forward(tape, tape.constant(a), bv).value();
    return {p.values().begin(), p.values().end()};
  }

  /// Zeroes the final affine layer so every output is exactly sigmoid(0) = 0.5.
  void zero_final_layer() {
    for (std::size_t i = net_.depth(); i-- > 0;) {
      if (!has_params(net_.layers()[i])) continue;
      for (auto& v : params_.at(net_.weight_name(i)).values()) v = T{0};
      for (auto& v : params_.at(net_.bias_name(i)).values()) v = T{0};
      spectral_.erase(net_.weight_name(i));
      return;
    }
  }

 private:
  static Network<T> build(const DiscriminatorArch& a) {
    if (a.image.size() != 3) throw ShapeError("discriminator: image shape must be [C,H,W]");
    const std::size_t c = a.image[0];
    std::vector<LayerSpec> layers;
    if (a.coupled) layers.push_back(layers::ChannelConcat{c});
    const std::size_t in_c = a.coupled ? 2 * c : c;
    layers.push_back(layers::Conv2d{in_c, a.conv1, 3, 2, 1});
    layers.push_back(layers::LeakyRelu{0.2});
    layers.push_back(layers::Conv2d{a.conv1, a.conv2, 3, 2, 1});
    layers.push_back(layers::LeakyRelu{0.2});
    layers.push_back(layers::Flatten{});
    const std::size_t h = (((a.image[1] + 1) / 2) + 1) / 2, w = (((a.image[2] + 1) / 2) + 1) / 2;
    layers.push_back(layers::Affine{a.conv2 * h * w, a.hidden});
    layers.push_back(layers::LeakyRelu{0.2});
    layers.push_back(layers::Affine{a.hidden, 1});
    layers.push_back(layers::Sigmoid{});
    return Network<T>("disc", a.image, std::move(layers), a.spectral_norm, a.spectral_iters);
  }

  DiscriminatorArch arch_;
  Network<T> net_;
  ParamStore<T> params_;
  SpectralState<T> spectral_;
};

}  // namespace lsc::gan
