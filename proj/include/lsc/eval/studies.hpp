#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lsc/eval/oracle.hpp"
#include "lsc/latent/features.hpp"
#include "lsc/training/config.hpp"
#include "lsc/training/history.hpp"

namespace lsc::eval {

/// Extractor + GAN settings of one full pipeline run.
struct PipelineConfig {
  latent::ExtractorConfig extractor;
  training::TrainConfig train;
  AccuracyConfig accuracy;
  std::uint64_t noise_seed = 5;
};

struct SweepPoint {
  double noise = 0.0;
  std::optional<double> accuracy;
  std::optional<double> extractor_train_accuracy;  // on the noisy labels
  std::string error;                               // non-empty when this level failed
};

/// For each level p: corrupt a fraction p of the labels, retrain the extractor
/// from scratch, train the GAN, and measure conditional accuracy against the
/// clean labels. A failing level is recorded and the sweep continues.
/// Levels must lie in [0, 1] and be strictly ascending.
std::vector<SweepPoint> robustness_sweep(const std::vector<double>& levels, const data::Dataset& dataset,
                                         const OracleClassifier& oracle, const PipelineConfig& config,
                                         const std::function<void(const SweepPoint&)>& on_point = {});

struct BorderSummary {
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::optional<double> success_margin;  // mean margin of successes
  std::optional<double> failure_margin;  // mean margin of failures
  bool degenerate = false;               // all successes or all failures
};

struct BorderReport {
  latent::Embedding embedding;  // one row per sample, flag = success
  std::vector<double> margins;  // NaN when a sample has no same-class or other-class peer
  BorderSummary summary;
};

/// Margin of sample i: L1 distance to the nearest other-class sample minus the
/// distance to the nearest same-class sample.
BorderReport border_effect_report(const Tensor& features, std::span<const int> labels,
                                  const std::vector<bool>& success);

/// CSV `iter,loss_adv,loss_same,loss_diff,loss_gen,frechet,accuracy`; absent
/// values are empty cells and doubles are printed round-trip exact.
std::string curves_csv(const training::RunHistory& history);
void emit_curves(const training::RunHistory& history, const std::filesystem::path& path);
/// Parses curves_csv output back into snapshots (counters are not stored).
training::RunHistory parse_curves(const std::string& text);
training::RunHistory read_curves(const std::filesystem::path& path);

}  // namespace lsc::eval
