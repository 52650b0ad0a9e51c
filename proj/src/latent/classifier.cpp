#include "lsc/latent/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace lsc::latent {

Network<float> make_classifier_network(const ClassifierArch& a, const std::string& name) {
  if (a.num_classes < 2) throw std::invalid_argument("classifier: need at least two classes");
  const std::size_t half = (a.side + 1) / 2;
  return Network<float>(name, {a.channels, a.side, a.side},
                        {layers::Conv2d{a.channels, a.conv1, 3, 1, 1}, layers::LeakyRelu{0.2},
                         layers::Conv2d{a.conv1, a.conv2, 3, 2, 1}, layers::LeakyRelu{0.2}, layers::Flatten{},
                         layers::Affine{a.conv2 * half * half, a.hidden}, layers::LeakyRelu{0.2},
                         layers::Affine{a.hidden, static_cast<std::size_t>(a.num_classes)}});
}

Classifier::Classifier(const ClassifierArch& arch, std::uint64_t seed, const std::string& name)
    : arch_(arch), net_(make_classifier_network(arch, name)) {
  Rng rng(derive_seed(seed, 1));
  net_.init_params(params_, rng);
}

Tensor Classifier::run(const Tensor& images, std::size_t stop, std::size_t chunk) const {
  const std::size_t n = images.dim(0);
  if (n == 0) throw ShapeError(net_.name() + ": no images");
  std::vector<Tensor> parts;
  for (std::size_t b = 0; b < n; b += chunk) {
    Tape<float> tape(false);
    auto x = tape.constant(slice_rows(images, b, std::min(n, b + chunk)));
    parts.push_back(net_.forward(tape, params_, x, nullptr, SpectralMode::frozen, std::nullopt, stop).value());
  }
  return parts.size() == 1 ? std::move(parts.front()) : concat_rows<float>(parts);
}

Tensor Classifier::probabilities(const Tensor& images) const {
  Tensor z = logits(images);
  const std::size_t n = z.dim(0), k = z.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    float* row = &z[i * k];
    const double m = *std::max_element(row, row + k);
    double total = 0.0;
    std::vector<double> e(k);
    for (std::size_t j = 0; j < k; ++j) total += e[j] = std::exp(static_cast<double>(row[j]) - m);
    for (std::size_t j = 0; j < k; ++j) row[j] = static_cast<float>(e[j] / total);
  }
  return z;
}

std::vector<int> Classifier::predict(const Tensor& images) const {
  const Tensor z = logits(images);
  const std::size_t n = z.dim(0), k = z.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = &z[i * k];
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

double Classifier::accuracy(const data::Dataset& dataset) const {
  const auto pred = predict(dataset.images);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == dataset.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

ClassifierTrainReport Classifier::train(const data::Dataset& dataset, const ClassifierTrainConfig& config) {
  if (dataset.num_classes > arch_.num_classes) {
    throw std::invalid_argument("classifier: dataset has " + std::to_string(dataset.num_classes) +
                                " classes, network only " + std::to_string(arch_.num_classes));
  }
  if (config.batch == 0) throw std::invalid_argument("classifier: batch must be positive");
  ClassifierTrainReport report;
  AdamState<float> state;
  state.config = config.adam;
  Rng rng(derive_seed(config.seed, 2));
  const std::size_t n = dataset.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += config.batch) {
      const std::span<const std::size_t> idx(order.data() + b, std::min(config.batch, n - b));
      std::vector<int> targets;
      for (auto i : idx) targets.push_back(dataset.labels[i]);
      Tape<float> tape;
      auto x = tape.constant(gather_rows(dataset.images, idx));
      auto loss = ops::cross_entropy(net_.forward(tape, params_, x), std::span<const int>(targets));
      loss.value().check_finite("classifier loss");
      tape.backward(loss);
      adam_step(params_, tape.param_grads(params_), state);
      loss_sum += loss.value()[0];
      ++batches;
      ++report.steps;
    }
    report.final_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
  }
  report.train_accuracy = accuracy(dataset);
  return report;
}

}  // namespace lsc::latent
