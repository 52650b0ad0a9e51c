#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsc/data/dataset.hpp"
#include "lsc/eval/metrics.hpp"
#include "lsc/gan/models.hpp"
#include "lsc/latent/classifier.hpp"
#include "lsc/latent/features.hpp"
#include "lsc/training/trainer.hpp"

namespace lsc::eval {

class OracleBelowFloor : public std::runtime_error {
 public:
  OracleBelowFloor(double accuracy, double floor)
      : std::runtime_error("oracle classifier test accuracy " + std::to_string(accuracy) + " is below the floor " +
                           std::to_string(floor) + "; refusing to compute metrics with it"),
        accuracy_(accuracy) {}
  double accuracy() const noexcept { return accuracy_; }

 private:
  double accuracy_;
};

struct OracleConfig {
  latent::ClassifierArch arch;
  latent::ClassifierTrainConfig train;
  std::uint64_t seed = 7;
  double floor = 0.95;
};

/// Classifier trained on real labelled data, used only for measurement.
class OracleClassifier {
 public:
  OracleClassifier() = default;
  OracleClassifier(latent::Classifier model, double test_accuracy, double floor);

  const latent::Classifier& model() const noexcept { return model_; }
  double test_accuracy() const noexcept { return test_accuracy_; }
  double floor() const noexcept { return floor_; }
  int num_classes() const noexcept { return model_.arch().num_classes; }
  bool usable() const noexcept { return test_accuracy_ >= floor_; }
  /// Throws OracleBelowFloor unless usable().
  void require_usable() const;

  std::vector<int> predict(const Tensor& images) const { return model_.predict(images); }
  Tensor probabilities(const Tensor& images) const { return model_.probabilities(images); }
  /// Penultimate-layer activations, the Fréchet embedding.
  Tensor embed(const Tensor& images) const { return model_.penultimate(images); }

 private:
  latent::Classifier model_;
  double test_accuracy_ = 0.0;
  double floor_ = 0.95;
};

/// Trains on `train`, records accuracy on `test`. Does not throw when below
/// the floor; consumers check usable() / require_usable().
OracleClassifier train_oracle(const data::Dataset& train, const data::Dataset& test, const OracleConfig& config);

/// Maps (codes [B,F], source images [B,C,H,W], rng) to generated images.
using ConditionalSampler = std::function<Tensor(const Tensor& codes, const Tensor& sources, Rng& rng)>;

/// G(z ⊕ f) with a fresh z ~ N(0, I) per sample drawn from the rng.
ConditionalSampler generator_sampler(const gan::Generator<float>& generator);

struct AccuracyConfig {
  std::size_t num_samples = 2048;
  std::uint64_t seed = 1;
  std::size_t chunk = 256;
};

struct AccuracyResult {
  double accuracy = 0.0;
  std::vector<std::size_t> sources;  // dataset index of each sample's code
  std::vector<int> predicted;
  std::vector<bool> success;
  Tensor generated;  // [num_samples, C, H, W]
  std::size_t size() const noexcept { return sources.size(); }
};

/// Source indices: concatenated seeded permutations of the dataset, so every
/// image is used once before any repeats.
std::vector<std::size_t> sample_sources(std::size_t n, std::size_t count, Rng& rng);

/// Fraction of generated samples the oracle assigns to the label of the
/// code's source image. `features` row i = E(dataset.images[i]).
AccuracyResult conditional_accuracy(const ConditionalSampler& sampler, const Tensor& features,
                                    const OracleClassifier& oracle, const data::Dataset& dataset,
                                    const AccuracyConfig& config = {});
/// Same, extracting codes with `extractor`.
AccuracyResult conditional_accuracy(const ConditionalSampler& sampler, const latent::FeatureExtractor& extractor,
                                    const OracleClassifier& oracle, const data::Dataset& dataset,
                                    const AccuracyConfig& config = {});

/// Accuracy, Fréchet distance and Inception Score of one generator.
struct MetricReport {
  double accuracy = 0.0;
  double frechet = 0.0;
  double inception = 1.0;
  std::size_t samples = 0;
  int num_classes = 0;
  std::string fingerprint;

  /// Throws std::invalid_argument when a value is out of range.
  void validate() const;
  /// Flat `key=value` lines; doubles printed round-trip exact.
  std::string to_text() const;
  static MetricReport parse(const std::string& text);
};

/// Scores generated samples against the real data; real embeddings are
/// computed once at construction. Usable as a training::Evaluator.
class GeneratorEvaluator {
 public:
  GeneratorEvaluator(const OracleClassifier& oracle, const data::Dataset& dataset, Tensor features,
                     AccuracyConfig config = {});

  const Gaussian& real_statistics() const noexcept { return real_; }
  MetricReport evaluate(const ConditionalSampler& sampler, const std::string& fingerprint = "") const;
  MetricReport evaluate(const gan::Generator<float>& generator, const std::string& fingerprint = "") const {
    return evaluate(generator_sampler(generator), fingerprint);
  }
  training::EvalPoint operator()(const gan::Generator<float>& generator, std::uint64_t iter) const;
  AccuracyResult accuracy(const ConditionalSampler& sampler) const;

 private:
  const OracleClassifier* oracle_;
  const data::Dataset* dataset_;
  Tensor features_;
  AccuracyConfig config_;
  Gaussian real_;
};

}  // namespace lsc::eval
