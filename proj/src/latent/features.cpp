#include "lsc/latent/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lsc/numerics/linalg.hpp"

namespace lsc::latent {

FeatureExtractor::FeatureExtractor(Classifier model, std::size_t tap, std::size_t pool)
    : model_(std::move(model)), tap_(tap), pool_(pool) {
  const auto& net = model_.network();
  if (tap_ >= net.depth()) {
    throw std::invalid_argument("extractor: tap layer " + std::to_string(tap_) + " does not exist (depth " +
                                std::to_string(net.depth()) + ")");
  }
  if (pool_ == 0) throw std::invalid_argument("extractor: pool must be positive");
  const Shape& s = net.shape_after(tap_);
  if (pool_ > 1) {
    if (s.size() != 3 || s[1] % pool_ != 0 || s[2] % pool_ != 0) {
      throw ShapeError("extractor: cannot pool " + to_string(s) + " by " + std::to_string(pool_));
    }
    dim_ = s[0] * (s[1] / pool_) * (s[2] / pool_);
  } else {
    dim_ = numel(s);
  }
}

FeatureExtractor make_extractor(const ExtractorConfig& config) {
  return FeatureExtractor(Classifier(config.arch, config.train.seed, "extractor"), config.tap, config.pool);
}

TrainedExtractor train_extractor(const data::Dataset& dataset, const ExtractorConfig& config) {
  TrainedExtractor out{make_extractor(config), {}};
  if (config.train.epochs == 0) return out;
  out.report = out.extractor.model().train(dataset, config.train);
  if (out.report.train_accuracy < config.min_accuracy) {
    throw ExtractorConvergenceError(out.report.train_accuracy, config.min_accuracy);
  }
  return out;
}

FeatureSet extract_features(const FeatureExtractor& extractor, const Tensor& images, std::size_t chunk) {
  const Tensor act = extractor.model().run(images, extractor.tap() + 1, chunk);
  const std::size_t n = act.dim(0), p = extractor.pool();
  FeatureSet out;
  if (p == 1) {
    out.features = act.reshaped({n, extractor.feature_dim()});
  } else {
    const std::size_t c = act.dim(1), h = act.dim(2), w = act.dim(3), oh = h / p, ow = w / p;
    out.features = Tensor({n, c * oh * ow});
    const float inv = 1.0f / static_cast<float>(p * p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t x = 0; x < ow; ++x) {
            float acc = 0.0f;
            for (std::size_t dy = 0; dy < p; ++dy)
              for (std::size_t dx = 0; dx < p; ++dx) acc += act[((i * c + ch) * h + y * p + dy) * w + x * p + dx];
            out.features[((i * c + ch) * oh + y) * ow + x] = acc * inv;
          }
  }
  out.features.check_finite("features");
  return out;
}

DistanceMatrix pairwise_l1(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("pairwise_l1: features must be [N,F], got " + to_string(features.shape()));
  const std::size_t n = features.dim(0), f = features.dim(1);
  DistanceMatrix d{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        acc += std::abs(static_cast<double>(features[i * f + k]) - static_cast<double>(features[j * f + k]));
      }
      d.values[i * n + j] = d.values[j * n + i] = acc;
    }
  return d;
}

namespace {

// For each row, the `depth` nearest other rows in (distance, index) order.
std::vector<std::vector<std::size_t>> nearest_lists(const Tensor& features, std::size_t depth) {
  if (features.rank() != 2) throw ShapeError("neighbors: features must be [N,F]");
  const std::size_t n = features.dim(0), f = features.dim(1);
  if (depth == 0 || depth >= n) {
    throw std::invalid_argument("neighbors: k=" + std::to_string(depth) + " must lie in [1, N-1] with N=" +
                                std::to_string(n));
  }
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::pair<double, std::size_t>> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double acc = 0.0;
      for (std::size_t k = 0; k < f; ++k) {
        acc += std::abs(static_cast<double>(features[i * f + k]) - static_cast<double>(features[j * f + k]));
      }
      row.emplace_back(acc, j);
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(depth), row.end());
    for (std::size_t r = 0; r < depth; ++r) out[i].push_back(row[r].second);
  }
  return out;
}

}  // namespace

std::vector<std::size_t> kth_neighbors(const Tensor& features, std::size_t k) {
  const auto lists = nearest_lists(features, k);
  std::vector<std::size_t> out;
  out.reserve(lists.size());
  for (const auto& l : lists) out.push_back(l[k - 1]);
  return out;
}

std::vector<double> neighbor_purity(const Tensor& features, std::span<const int> labels,
                                    std::span<const std::size_t> ks) {
  if (labels.size() != features.dim(0)) {
    throw ShapeError("neighbor_purity: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(features.dim(0)) + " feature rows");
  }
  if (ks.empty()) return {};
  const std::size_t depth = *std::max_element(ks.begin(), ks.end());
  if (*std::min_element(ks.begin(), ks.end()) == 0) throw std::invalid_argument("neighbor_purity: k must be >= 1");
  const auto lists = nearest_lists(features, depth);
  std::vector<double> out;
  for (auto k : ks) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < lists.size(); ++i) hit += labels[lists[i][k - 1]] == labels[i];
    out.push_back(static_cast<double>(hit) / static_cast<double>(lists.size()));
  }
  return out;
}

namespace {

// Top two eigenvectors of a symmetric PSD matrix by orthogonal iteration; used
// when the feature dimension is too large for a full Jacobi sweep.
std::pair<std::vector<double>, std::vector<double>> top_two(const linalg::Matrix& c) {
  const std::size_t f = c.rows;
  Rng rng(0x5eed);
  std::vector<double> q(2 * f);
  for (auto& v : q) v = rng.normal();
  std::vector<double> values(2, 0.0), next(2 * f);
  auto orthonormalize = [&](std::vector<double>& m) {
    for (std::size_t r = 0; r < 2; ++r) {
      double* row = &m[r * f];
      if (r == 1) {
        double dot = 0.0;
        for (std::size_t i = 0; i < f; ++i) dot += row[i] * m[i];
        for (std::size_t i = 0; i < f; ++i) row[i] -= dot * m[i];
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < f; ++i) norm += row[i] * row[i];
      norm = std::sqrt(norm);
      if (norm < 1e-300) {
        std::fill(row, row + f, 0.0);
        row[r] = 1.0;
        continue;
      }
      for (std::size_t i = 0; i < f; ++i) row[i] /= norm;
    }
  };
  orthonormalize(q);
  for (int it = 0; it < 2000; ++it) {
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t i = 0; i < f; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < f; ++j) acc += c(i, j) * q[r * f + j];
        next[r * f + i] = acc;
      }
    orthonormalize(next);
    double change = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < f; ++i) dot += next[r * f + i] * q[r * f + i];
      change = std::max(change, 1.0 - std::abs(dot));
    }
    q.swap(next);
    if (change < 1e-15) break;
  }
  for (std::size_t r = 0; r < 2; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = 0; j < f; ++j) acc += q[r * f + i] * c(i, j) * q[r * f + j];
    values[r] = acc;
  }
  if (values[1] > values[0]) {
    std::swap_ranges(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(f), q.begin() + static_cast<std::ptrdiff_t>(f));
    std::swap(values[0], values[1]);
  }
  return {q, values};
}

}  // namespace

Embedding export_embedding(const Tensor& features, std::span<const int> labels, const std::vector<bool>& flags) {
  if (features.rank() != 2) throw ShapeError("export_embedding: features must be [N,F]");
  const std::size_t n = features.dim(0), f = features.dim(1);
  if (n < 3) throw std::invalid_argument("export_embedding: need at least 3 samples");
  if (!labels.empty() && labels.size() != n) throw ShapeError("export_embedding: label count mismatch");
  if (!flags.empty() && flags.size() != n) throw ShapeError("export_embedding: flag count mismatch");

  linalg::Matrix x(n, f);
  for (std::size_t i = 0; i < n * f; ++i) x.data[i] = features[i];
  const auto mean = linalg::column_means(x);
  const auto cov = linalg::covariance(x);

  Embedding e;
  e.mean = mean;
  e.components.assign(2 * f, 0.0);
  if (linalg::trace(cov) < 1e-12) {
    e.fallback = true;
    e.warning = "zero-variance features; using raw axes";
    for (std::size_t r = 0; r < std::min<std::size_t>(2, f); ++r) e.components[r * f + r] = 1.0;
  } else {
    if (f <= 256) {
      const auto eig = linalg::symmetric_eigen(cov);
      for (std::size_t r = 0; r < std::min<std::size_t>(2, f); ++r)
        for (std::size_t i = 0; i < f; ++i) e.components[r * f + i] = eig.vectors(i, r);
    } else {
      e.components = top_two(cov).first;
    }
    for (std::size_t r = 0; r < std::min<std::size_t>(2, f); ++r) {
      double* comp = &e.components[r * f];
      const auto big = std::max_element(comp, comp + f, [](double a, double b) { return std::abs(a) < std::abs(b); });
      if (*big < 0) std::for_each(comp, comp + f, [](double& v) { v = -v; });
    }
  }

  e.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double c[2] = {0.0, 0.0};
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t k = 0; k < f; ++k) c[r] += (x(i, k) - mean[k]) * e.components[r * f + k];
    e.rows[i].x = c[0];
    e.rows[i].y = c[1];
    if (!labels.empty()) e.rows[i].label = labels[i];
    if (!flags.empty()) e.rows[i].flag = flags[i];
  }
  e.explained_variance.assign(2, 0.0);
  for (const auto& r : e.rows) {
    e.explained_variance[0] += r.x * r.x;
    e.explained_variance[1] += r.y * r.y;
  }
  for (auto& v : e.explained_variance) v /= static_cast<double>(n - 1);
  return e;
}

void write_embedding_csv(const std::filesystem::path& path, const Embedding& embedding) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "x,y,label,flag\n";
  for (const auto& r : embedding.rows) {
    out << r.x << ',' << r.y << ',';
    if (r.label) out << *r.label;
    out << ',';
    if (r.flag) out << (*r.flag ? 1 : 0);
    out << '\n';
  }
  if (!out) throw std::runtime_error("short write to " + path.string());
}

}  // namespace lsc::latent
