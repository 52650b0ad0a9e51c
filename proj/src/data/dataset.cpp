#include "lsc/data/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lsc/numerics/rng.hpp"

namespace lsc::data {

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument(name + ": dataset is empty");
  if (images.rank() != 4) {
    throw std::invalid_argument(name + ": images must be [N,C,H,W], got " + to_string(images.shape()));
  }
  if (images.dim(0) != labels.size()) {
    throw std::invalid_argument(name + ": " + std::to_string(images.dim(0)) + " images but " +
                                std::to_string(labels.size()) + " labels");
  }
  if (num_classes <= 0) throw std::invalid_argument(name + ": num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::invalid_argument(name + ": label " + std::to_string(labels[i]) + " at index " +
                                  std::to_string(i) + " outside [0," + std::to_string(num_classes) + ")");
    }
  }
  for (auto v : images.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument(name + ": pixel outside [0,1]");
  }
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4) {
    throw IdxError(std::string(what) + ": truncated header, need 4 bytes, have " +
                       std::to_string(bytes.size() > offset ? bytes.size() - offset : 0),
                   offset);
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::uint32_t got, std::uint32_t want, const char* what) {
  if (got != want) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s: bad magic 0x%08x, expected 0x%08x", what, got, want);
    throw IdxError(buf, 0);
  }
}

void check_payload(std::span<const std::uint8_t> bytes, std::size_t offset, std::size_t need,
                   const char* what) {
  if (bytes.size() - offset < need) {
    throw IdxError(std::string(what) + ": truncated payload, expected " + std::to_string(need) +
                       " bytes, found " + std::to_string(bytes.size() - offset),
                   bytes.size());
  }
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes,
                  int num_classes, std::string name) {
  check_magic(read_be32(image_bytes, 0, "idx images"), kIdxImageMagic, "idx images");
  const std::size_t count = read_be32(image_bytes, 4, "idx images");
  const std::size_t rows = read_be32(image_bytes, 8, "idx images");
  const std::size_t cols = read_be32(image_bytes, 12, "idx images");
  check_payload(image_bytes, 16, count * rows * cols, "idx images");

  check_magic(read_be32(label_bytes, 0, "idx labels"), kIdxLabelMagic, "idx labels");
  const std::size_t label_count = read_be32(label_bytes, 4, "idx labels");
  if (label_count != count) {
    throw IdxError("idx: count mismatch, " + std::to_string(count) + " images vs " +
                       std::to_string(label_count) + " labels",
                   4);
  }
  check_payload(label_bytes, 8, label_count, "idx labels");

  Dataset d;
  d.name = std::move(name);
  d.images = Tensor({count, 1, rows, cols});
  for (std::size_t i = 0; i < count * rows * cols; ++i) {
    d.images[i] = static_cast<float>(image_bytes[16 + i]) / 255.0f;
  }
  d.labels.resize(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    d.labels[i] = label_bytes[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  d.validate();
  return d;
}

std::vector<std::uint8_t> encode_idx_images(const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != 1) {
    throw ShapeError("idx: can only encode single-channel [N,1,H,W] images, got " +
                     to_string(images.shape()));
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.dim(0)));
  write_be32(out, static_cast<std::uint32_t>(images.dim(2)));
  write_be32(out, static_cast<std::uint32_t>(images.dim(3)));
  for (auto v : images.values()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (auto l : labels) {
    if (l < 0 || l > 255) throw std::invalid_argument("idx: label " + std::to_string(l) + " does not fit a byte");
    out.push_back(static_cast<std::uint8_t>(l));
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() < 2 || raw[0] != 0x1f || raw[1] != 0x8b) return raw;

  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw std::runtime_error("zlib: inflateInit failed");
  zs.next_in = raw.data();
  zs.avail_in = static_cast<uInt>(raw.size());
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw std::runtime_error("gzip: corrupt stream in " + path.string() + " at compressed offset " +
                               std::to_string(zs.total_in));
    }
    out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw std::runtime_error("gzip: truncated stream in " + path.string());
    }
  }
  inflateEnd(&zs);
  return out;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes, bool gzip) {
  if (gzip) {
    gzFile f = gzopen(path.string().c_str(), "wb9");
    if (!f) throw std::runtime_error("cannot write " + path.string());
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size())) throw std::runtime_error("short gzip write to " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, int num_classes) {
  const auto ib = read_bytes(images);
  const auto lb = read_bytes(labels);
  return parse_idx(ib, lb, num_classes, images.stem().string());
}

namespace {

// Binary glyph for class k on a side x side grid.
std::vector<float> glyph(int k, std::size_t side) {
  std::vector<float> g(side * side, 0.0f);
  const std::size_t s = side;
  const std::size_t band = std::max<std::size_t>(1, s / 4);
  const std::size_t lo = (s - band) / 2, hi = lo + band;
  auto set = [&](std::size_t y, std::size_t x) { g[y * s + x] = 1.0f; };
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) {
      const auto dy = static_cast<std::ptrdiff_t>(y), dx = static_cast<std::ptrdiff_t>(x);
      const auto n = static_cast<std::ptrdiff_t>(s);
      switch (k) {
        case 0: if (y >= lo && y < hi) set(y, x); break;                        // horizontal bar
        case 1: if (x >= lo && x < hi) set(y, x); break;                        // vertical bar
        case 2: if (std::abs(dy - dx) <= 0) set(y, x); if (std::abs(dy - dx) == 1 && s > 6) set(y, x); break;
        case 3: if (std::abs(dy + dx - (n - 1)) <= (s > 6 ? 1 : 0)) set(y, x); break;
        case 4: if (y < band || y >= s - band || x < band || x >= s - band) set(y, x); break;  // frame
        case 5: if (y >= s / 4 && y < s - s / 4 && x >= s / 4 && x < s - s / 4) set(y, x); break;
        case 6: if ((y >= lo && y < hi) || (x >= lo && x < hi)) set(y, x); break;            // plus
        case 7: if (dy == dx || dy + dx == n - 1) set(y, x); break;                         // X
        case 8: if (((y / band) + (x / band)) % 2 == 0) set(y, x); break;                   // checker
        case 9: if (y < s / 2) set(y, x); break;                                            // top half
        default: break;
      }
    }
  if (k >= 10) {
    // Fixed pseudo-random pattern per class, independent of the dataset seed.
    Rng pattern(mix_seed(static_cast<std::uint64_t>(k)));
    for (auto& v : g) v = pattern.uniform() < 0.4 ? 1.0f : 0.0f;
  }
  return g;
}

}  // namespace

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("synthetic: num_classes must be >= 2");
  if (spec.image_side < 4) throw std::invalid_argument("synthetic: image_side must be >= 4");
  if (spec.per_class < 1) throw std::invalid_argument("synthetic: per_class must be >= 1");
  if (spec.noise < 0.0) throw std::invalid_argument("synthetic: noise must be non-negative");
  const std::size_t s = spec.image_side;
  const std::size_t n = spec.per_class * static_cast<std::size_t>(spec.num_classes);
  Dataset d;
  d.name = "synthetic" + std::to_string(spec.num_classes);
  d.num_classes = spec.num_classes;
  d.images = Tensor({n, 1, s, s});
  d.labels.resize(n);
  std::vector<std::vector<float>> glyphs;
  for (int k = 0; k < spec.num_classes; ++k) glyphs.push_back(glyph(k, s));

  Rng rng(spec.seed);
  const auto jitter = static_cast<std::ptrdiff_t>(spec.jitter);
  for (std::size_t i = 0; i < n; ++i) {
    // Interleaved labels: 0,1,..,K-1,0,1,...
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
    d.labels[i] = label;
    std::ptrdiff_t sy = 0, sx = 0;
    if (jitter > 0) {
      sy = static_cast<std::ptrdiff_t>(rng.index(static_cast<std::size_t>(2 * jitter + 1))) - jitter;
      sx = static_cast<std::ptrdiff_t>(rng.index(static_cast<std::size_t>(2 * jitter + 1))) - jitter;
    }
    const auto& g = glyphs[static_cast<std::size_t>(label)];
    float* px = &d.images[i * s * s];
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        const auto gy = static_cast<std::ptrdiff_t>(y) - sy, gx = static_cast<std::ptrdiff_t>(x) - sx;
        const bool inside = gy >= 0 && gx >= 0 && gy < static_cast<std::ptrdiff_t>(s) &&
                            gx < static_cast<std::ptrdiff_t>(s);
        const float base = inside ? 0.1f + 0.8f * g[static_cast<std::size_t>(gy) * s + static_cast<std::size_t>(gx)]
                                  : 0.1f;
        const double eps = spec.noise > 0.0 ? rng.uniform(-spec.noise, spec.noise) : 0.0;
        px[y * s + x] = std::clamp(base + static_cast<float>(eps), 0.0f, 1.0f);
      }
  }
  return d;
}

Dataset inject_label_noise(const Dataset& dataset, const NoiseSpec& spec) {
  if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0)) {
    throw std::invalid_argument("label noise: fraction must lie in [0,1]");
  }
  Dataset out = dataset;
  const std::size_t n = dataset.size();
  const auto flips = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
  if (flips == 0) return out;
  if (dataset.num_classes < 2) throw std::invalid_argument("label noise: need at least two classes");
  Rng rng(spec.seed);
  const auto k = static_cast<std::size_t>(dataset.num_classes);
  for (auto i : rng.sample_without_replacement(n, flips)) {
    const auto old = static_cast<std::size_t>(dataset.labels[i]);
    out.labels[i] = static_cast<int>((old + 1 + rng.index(k - 1)) % k);
  }
  return out;
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out;
  out.name = dataset.name;
  out.num_classes = dataset.num_classes;
  out.images = gather_rows(dataset.images, indices);
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(dataset.labels.at(i));
  return out;
}

Dataset take(const Dataset& dataset, std::size_t count) {
  count = std::min(count, dataset.size());
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  return subset(dataset, idx);
}

Split split(const Dataset& dataset, std::uint64_t seed) {
  if (dataset.size() < 2) throw std::invalid_argument("split: need at least two samples");
  Rng rng(seed);
  auto perm = rng.permutation(dataset.size());
  const std::size_t test_n = std::max<std::size_t>(1, dataset.size() / 6);
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_n));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(test_n), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  Split s{subset(dataset, train), subset(dataset, test)};
  s.train.name = dataset.name + "/train";
  s.test.name = dataset.name + "/test";
  return s;
}

Dataset resize(const Dataset& dataset, std::size_t side) {
  const auto& shape = dataset.images.shape();
  const std::size_t n = shape[0], c = shape[1], h = shape[2], w = shape[3];
  if (h == side && w == side) return dataset;
  Dataset out = dataset;
  out.images = Tensor({n, c, side, side});
  const double sy = static_cast<double>(h) / static_cast<double>(side);
  const double sx = static_cast<double>(w) / static_cast<double>(side);
  for (std::size_t p = 0; p < n * c; ++p) {
    const float* src = &dataset.images[p * h * w];
    float* dst = &out.images[p * side * side];
    for (std::size_t y = 0; y < side; ++y) {
      const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      const auto y0 = static_cast<std::size_t>(fy);
      const std::size_t y1 = std::min(y0 + 1, h - 1);
      const double ty = fy - static_cast<double>(y0);
      for (std::size_t x = 0; x < side; ++x) {
        const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
        const auto x0 = static_cast<std::size_t>(fx);
        const std::size_t x1 = std::min(x0 + 1, w - 1);
        const double tx = fx - static_cast<double>(x0);
        const double v = (1 - ty) * ((1 - tx) * src[y0 * w + x0] + tx * src[y0 * w + x1]) +
                         ty * ((1 - tx) * src[y1 * w + x0] + tx * src[y1 * w + x1]);
        dst[y * side + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

std::string fingerprint(const Dataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const void* p, std::size_t len) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (auto d : dataset.images.shape()) {
    const std::uint64_t v = d;
    feed(&v, sizeof v);
  }
  feed(dataset.images.values().data(), dataset.images.size() * sizeof(float));
  feed(dataset.labels.data(), dataset.labels.size() * sizeof(int));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lsc::data
