#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsc/numerics/tensor.hpp"

namespace lsc::data {

/// Images [N, C, H, W] in [0, 1] plus integer labels in [0, num_classes).
///
/// Labels are consumed only by extractor training, the oracle classifier and
/// evaluation; the GAN path never reads them.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  int num_classes = 0;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  Shape image_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
  std::size_t image_size() const { return numel(image_shape()); }

  /// Throws std::invalid_argument describing the first broken invariant.
  void validate() const;
};

struct NoiseSpec {
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticSpec {
  int num_classes = 4;
  std::size_t per_class = 100;
  std::size_t image_side = 8;
  std::uint64_t seed = 1;
  double noise = 0.15;       // half-width of the uniform per-pixel perturbation
  std::size_t jitter = 0;    // max glyph translation in pixels, per axis
};

/// Malformed IDX input; `offset` is the byte position where parsing stopped.
class IdxError : public std::runtime_error {
 public:
  IdxError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Decodes an IDX image/label pair. `num_classes` <= 0 means max(label) + 1.
Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes,
                  int num_classes = 0, std::string name = "idx");

std::vector<std::uint8_t> encode_idx_images(const Tensor& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels);

/// Reads a whole file, gunzipping when it starts with the gzip magic.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes, bool gzip = false);

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 int num_classes = 0);

/// Class glyphs plus seeded per-pixel noise; deterministic per spec.
Dataset make_synthetic(const SyntheticSpec& spec);

/// Replaces exactly round(p * N) labels, chosen without replacement, by a
/// uniformly drawn label different from the original. Images are untouched.
Dataset inject_label_noise(const Dataset& dataset, const NoiseSpec& spec);

struct Split {
  Dataset train;
  Dataset test;
};

/// Deterministic 5:1 train/test split by seeded permutation.
Split split(const Dataset& dataset, std::uint64_t seed);

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

/// First `count` samples.
Dataset take(const Dataset& dataset, std::size_t count);

/// Bilinear resampling to side x side (pixel-centre aligned).
Dataset resize(const Dataset& dataset, std::size_t side);

/// 64-bit FNV-1a over shape, pixels and labels, as 16 hex digits.
std::string fingerprint(const Dataset& dataset);

}  // namespace lsc::data
