#include "lsc/sampler/batch.hpp"

#include <cmath>

namespace lsc::sampler {

Extremes batch_extremes(const latent::DistanceMatrix& d) {
  Extremes e{std::vector<std::size_t>(d.n), std::vector<std::size_t>(d.n)};
  for (std::size_t i = 0; i < d.n; ++i) {
    std::size_t lo = d.n, hi = d.n;
    for (std::size_t j = 0; j < d.n; ++j) {
      if (j == i) continue;
      // Strict comparisons keep the first (lowest) index on ties.
      if (lo == d.n || d(i, j) < d(i, lo)) lo = j;
      if (hi == d.n || d(i, j) > d(i, hi)) hi = j;
    }
    e.nearest[i] = lo;
    e.farthest[i] = hi;
  }
  return e;
}

namespace {

void check_batch(const Tensor& images, std::size_t batch) {
  if (batch < 2) throw std::invalid_argument("build_batch: batch size must be >= 2, got " + std::to_string(batch));
  if (batch > images.dim(0)) {
    throw std::invalid_argument("build_batch: batch size " + std::to_string(batch) + " exceeds " +
                                std::to_string(images.dim(0)) + " images");
  }
}

TripletBatch assemble(const Tensor& images, Tensor codes, std::vector<std::size_t> anchors,
                      std::vector<std::size_t> pos, std::vector<std::size_t> neg, bool local) {
  TripletBatch b;
  b.codes = std::move(codes);
  b.anchor_indices = std::move(anchors);
  if (local) {
    b.positive_pos = pos;
    b.negative_pos = neg;
    for (auto& p : pos) p = b.anchor_indices[p];
    for (auto& p : neg) p = b.anchor_indices[p];
  }
  b.positive_indices = std::move(pos);
  b.negative_indices = std::move(neg);
  b.anchors = gather_rows(images, b.anchor_indices);
  b.positives = gather_rows(images, b.positive_indices);
  b.negatives = gather_rows(images, b.negative_indices);
  return b;
}

}  // namespace

TripletBatch build_batch_from_features(const Tensor& images, const Tensor& features, std::size_t batch, Rng& rng,
                                       Neighborhood mode) {
  check_batch(images, batch);
  if (features.rank() != 2 || features.dim(0) != images.dim(0)) {
    throw ShapeError("build_batch: features " + to_string(features.shape()) + " do not match images " +
                     to_string(images.shape()));
  }
  auto idx = rng.sample_without_replacement(images.dim(0), batch);
  Tensor codes = gather_rows(features, idx);
  if (mode == Neighborhood::batch) {
    const auto e = batch_extremes(latent::pairwise_l1(codes));
    return assemble(images, std::move(codes), std::move(idx), e.nearest, e.farthest, true);
  }
  const std::size_t n = features.dim(0), f = features.dim(1);
  std::vector<std::size_t> pos(batch), neg(batch);
  for (std::size_t a = 0; a < batch; ++a) {
    const std::size_t i = idx[a];
    double best = INFINITY, worst = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double acc = 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        acc += std::abs(static_cast<double>(features[i * f + k]) - static_cast<double>(features[j * f + k]));
      }
      if (acc < best) best = acc, pos[a] = j;
      if (acc > worst) worst = acc, neg[a] = j;
    }
  }
  return assemble(images, std::move(codes), std::move(idx), std::move(pos), std::move(neg), false);
}

TripletBatch build_batch(const Tensor& images, const latent::FeatureExtractor& extractor, std::size_t batch,
                         std::uint64_t seed) {
  check_batch(images, batch);
  Rng rng(seed);
  auto idx = rng.sample_without_replacement(images.dim(0), batch);
  Tensor codes = latent::extract_features(extractor, gather_rows(images, idx)).features;
  const auto e = batch_extremes(latent::pairwise_l1(codes));
  return assemble(images, std::move(codes), std::move(idx), e.nearest, e.farthest, true);
}

}  // namespace lsc::sampler
