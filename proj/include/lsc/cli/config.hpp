#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsc/data/dataset.hpp"
#include "lsc/eval/oracle.hpp"
#include "lsc/latent/features.hpp"
#include "lsc/training/config.hpp"

namespace lsc::cli {

struct DataSpec {
  std::string source = "synthetic";  // "synthetic" or "idx"
  data::SyntheticSpec synthetic{.num_classes = 4, .per_class = 150, .image_side = 8, .seed = 1, .noise = 0.15, .jitter = 1};
  std::string images;   // idx source: image file (optionally gzipped)
  std::string labels;   // idx source: label file
  std::size_t limit = 0;   // keep the first `limit` samples (0: all)
  std::size_t resize = 0;  // resample to resize x resize (0: keep)
  std::uint64_t split_seed = 2;
};

/// Layer widths of a classifier; channels, side and class count come from the data.
struct ClassifierWidths {
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t hidden = 32;
};

struct ExtractorSpec {
  bool trained = true;  // false: seeded untrained network (unsupervised path)
  ClassifierWidths widths;
  std::size_t tap = 3;
  std::size_t pool = 2;
  latent::ClassifierTrainConfig train;
  double min_accuracy = 0.0;
};

struct OracleSpec {
  ClassifierWidths widths{.conv1 = 16, .conv2 = 32, .hidden = 64};
  latent::ClassifierTrainConfig train{.epochs = 10, .batch = 32, .adam = {.lr = 1e-3, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8}, .seed = 7};
  double floor = 0.95;
};

/// Full, resolved configuration of one run.
struct RunConfig {
  std::string name = "run";
  std::string runs_dir = "runs";
  DataSpec data;
  ExtractorSpec extractor;
  OracleSpec oracle;
  training::TrainConfig train;
  eval::AccuracyConfig accuracy;
  bool eval_during_training = true;
  std::uint64_t checkpoint_every = 0;
  std::vector<std::size_t> ks{1, 2, 5};
  std::vector<double> noise_levels{0.0, 0.5, 1.0};
  std::uint64_t noise_seed = 5;

  std::filesystem::path run_dir() const { return std::filesystem::path(runs_dir) / name; }
};

/// Every field with its resolved value.
nlohmann::json to_json(const RunConfig& c);
/// Starts from defaults; rejects unknown keys, wrong types and out-of-range
/// values with training::ConfigError carrying the field path. A run manifest
/// (an object with a "config" member) is accepted in place of a config.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Applies `a.b.c=value` overrides; value is parsed as JSON, or taken as a
/// string when it is not valid JSON.
void apply_override(nlohmann::json& j, const std::string& assignment);

latent::ExtractorConfig extractor_config(const RunConfig& c, const data::Dataset& d);
eval::OracleConfig oracle_config(const RunConfig& c, const data::Dataset& d);

}  // namespace lsc::cli
