#pragma once

#include <cstdint>
#include <vector>

#include "lsc/data/dataset.hpp"
#include "lsc/numerics/adam.hpp"
#include "lsc/numerics/layers.hpp"

namespace lsc::latent {

/// Small convolutional classifier:
///   0 conv3x3(C->conv1, pad 1)  1 lrelu
///   2 conv3x3(conv1->conv2, stride 2, pad 1)  3 lrelu
///   4 flatten  5 affine(->hidden)  6 lrelu  7 affine(->classes)
struct ClassifierArch {
  std::size_t channels = 1;
  std::size_t side = 8;
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t hidden = 32;
  int num_classes = 4;
};

Network<float> make_classifier_network(const ClassifierArch& arch, const std::string& name = "cls");

struct ClassifierTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch = 32;
  AdamConfig adam{.lr = 1e-3, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8};
  std::uint64_t seed = 1;
};

struct ClassifierTrainReport {
  std::size_t steps = 0;
  double final_loss = 0.0;      // mean cross-entropy over the last epoch
  double train_accuracy = 0.0;  // after training, on the training set
};

class Classifier {
 public:
  Classifier() = default;
  Classifier(const ClassifierArch& arch, std::uint64_t seed, const std::string& name = "cls");

  const ClassifierArch& arch() const noexcept { return arch_; }
  const Network<float>& network() const noexcept { return net_; }
  const ParamStore<float>& params() const noexcept { return params_; }
  ParamStore<float>& params() noexcept { return params_; }

  /// Activation after layer `stop - 1` for every image, evaluated in chunks
  /// without gradient tracking. Rows do not depend on the chunking.
  Tensor run(const Tensor& images, std::size_t stop = static_cast<std::size_t>(-1),
             std::size_t chunk = 256) const;

  Tensor logits(const Tensor& images) const { return run(images); }
  /// Input to the final affine layer.
  Tensor penultimate(const Tensor& images) const { return run(images, net_.depth() - 1); }
  /// Row-wise softmax of the logits, computed in double then stored as float.
  Tensor probabilities(const Tensor& images) const;
  std::vector<int> predict(const Tensor& images) const;
  double accuracy(const data::Dataset& dataset) const;

  ClassifierTrainReport train(const data::Dataset& dataset, const ClassifierTrainConfig& config);

 private:
  ClassifierArch arch_;
  Network<float> net_;
  ParamStore<float> params_;
};

}  // namespace lsc::latent
