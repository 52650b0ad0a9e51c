#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lsc/latent/classifier.hpp"

namespace lsc::latent {

/// Classifier whose intermediate activation (after layer `tap`, inclusive) is
/// exported as the latent code, optionally average pooled over pool x pool
/// spatial windows, then flattened.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(Classifier model, std::size_t tap, std::size_t pool = 1);

  const Classifier& model() const noexcept { return model_; }
  Classifier& model() noexcept { return model_; }
  std::size_t tap() const noexcept { return tap_; }
  std::size_t pool() const noexcept { return pool_; }
  const Shape& input_shape() const { return model_.network().input_shape(); }
  std::size_t feature_dim() const noexcept { return dim_; }

 private:
  Classifier model_;
  std::size_t tap_ = 0;
  std::size_t pool_ = 1;
  std::size_t dim_ = 0;
};

struct FeatureSet {
  Tensor features;                       // [N, F]
  std::string source;                    // dataset name or fingerprint
  std::optional<std::vector<int>> labels;  // evaluation only
  std::size_t size() const { return features.dim(0); }
  std::size_t dim() const { return features.dim(1); }
};

struct ExtractorConfig {
  ClassifierArch arch;
  std::size_t tap = 3;   // second conv block output
  std::size_t pool = 2;
  ClassifierTrainConfig train;
  double min_accuracy = 0.0;  // training accuracy below this is a convergence failure
};

/// Seeded, untrained extractor (the unsupervised path).
FeatureExtractor make_extractor(const ExtractorConfig& config);

class ExtractorConvergenceError : public std::runtime_error {
 public:
  ExtractorConvergenceError(double accuracy, double floor)
      : std::runtime_error("extractor did not converge: training accuracy " + std::to_string(accuracy) +
                           " below " + std::to_string(floor)),
        accuracy_(accuracy) {}
  double accuracy() const noexcept { return accuracy_; }

 private:
  double accuracy_;
};

struct TrainedExtractor {
  FeatureExtractor extractor;
  ClassifierTrainReport report;
};

/// Trains the underlying classifier by cross-entropy; epochs = 0 returns the
/// seeded initial network. Labels are consumed here and nowhere on the GAN path.
TrainedExtractor train_extractor(const data::Dataset& dataset, const ExtractorConfig& config);

FeatureSet extract_features(const FeatureExtractor& extractor, const Tensor& images,
                            std::size_t chunk = 256);

/// Symmetric N x N matrix of L1 distances accumulated in double.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;
  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

DistanceMatrix pairwise_l1(const Tensor& features);

/// Index of the k-th nearest neighbour (1-based) of every row; self excluded,
/// ties broken by lower index. Throws if k >= N or k == 0.
std::vector<std::size_t> kth_neighbors(const Tensor& features, std::size_t k);

/// Fraction of samples whose k-th neighbour shares their label, for each k.
std::vector<double> neighbor_purity(const Tensor& features, std::span<const int> labels,
                                    std::span<const std::size_t> ks);

struct EmbeddingRow {
  double x = 0.0;
  double y = 0.0;
  std::optional<int> label;
  std::optional<bool> flag;
};

struct Embedding {
  std::vector<EmbeddingRow> rows;
  std::vector<double> explained_variance;  // variance along x and y
  std::vector<double> mean;                // feature-space centre
  std::vector<double> components;          // 2 x F, row-major, orthonormal rows
  bool fallback = false;                   // zero-variance input; raw axes used
  std::string warning;
};

/// Projection onto the top two principal components (signs fixed so the
/// largest-magnitude loading of each component is positive).
Embedding export_embedding(const Tensor& features, std::span<const int> labels = {},
                           const std::vector<bool>& flags = {});

/// CSV with header `x,y,label,flag`; absent values are empty cells.
void write_embedding_csv(const std::filesystem::path& path, const Embedding& embedding);

}  // namespace lsc::latent
