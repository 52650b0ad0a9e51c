#pragma once

#include <cstdint>
#include <vector>

#include "lsc/latent/features.hpp"

namespace lsc::sampler {

/// Per-anchor (anchor, nearest, farthest, code) tuples. Positions index the
/// sampled batch; `*_indices` index the source image set.
struct TripletBatch {
  Tensor anchors;    // [B, C, H, W]
  Tensor positives;  // nearest neighbour of each anchor ("real correct")
  Tensor negatives;  // farthest neighbour of each anchor ("real wrong")
  Tensor codes;      // [B, F] features of the anchors
  std::vector<std::size_t> anchor_indices;
  std::vector<std::size_t> positive_indices;
  std::vector<std::size_t> negative_indices;
  std::vector<std::size_t> positive_pos;  // batch positions (batch-local mode only)
  std::vector<std::size_t> negative_pos;
  std::size_t size() const noexcept { return anchor_indices.size(); }
};

/// Nearest and farthest other row of every row under L1; ties go to the lower index.
struct Extremes {
  std::vector<std::size_t> nearest;
  std::vector<std::size_t> farthest;
};
Extremes batch_extremes(const latent::DistanceMatrix& d);

enum class Neighborhood { batch, global };

/// Samples B images without replacement, then pairs each anchor with its
/// nearest and farthest neighbour among the other batch members (or, in
/// global mode, among all images). `features` holds E(x) for every image; rows
/// are batch-size independent, so this equals extracting per batch.
TripletBatch build_batch_from_features(const Tensor& images, const Tensor& features, std::size_t batch, Rng& rng,
                                       Neighborhood mode = Neighborhood::batch);

/// Self-contained form: extracts features of the sampled batch only.
TripletBatch build_batch(const Tensor& images, const latent::FeatureExtractor& extractor, std::size_t batch,
                         std::uint64_t seed);

}  // namespace lsc::sampler
