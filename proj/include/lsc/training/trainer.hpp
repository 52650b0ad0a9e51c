#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsc/gan/models.hpp"
#include "lsc/latent/features.hpp"
#include "lsc/training/checkpoint.hpp"
#include "lsc/training/config.hpp"
#include "lsc/training/history.hpp"

namespace lsc::training {

/// Everything the GAN update path may read: images and their latent codes.
/// There is deliberately no label field.
struct GanData {
  Tensor images;    // [N, C, H, W]
  Tensor features;  // [N, F], row i = E(images[i])
};

GanData make_gan_data(const Tensor& images, const latent::FeatureExtractor& extractor);

/// Metrics reported at a snapshot; both are optional.
struct EvalPoint {
  std::optional<double> frechet;
  std::optional<double> accuracy;
};
using Evaluator = std::function<EvalPoint(const gan::Generator<float>&, std::uint64_t iter)>;

/// Complete resumable training state.
struct TrainState {
  TrainConfig config;
  gan::Generator<float> gen;
  gan::Discriminator<float> disc;
  AdamState<float> gen_opt;
  AdamState<float> disc_opt;
  Rng rng;
  std::uint64_t iteration = 0;  // completed iterations
  RunHistory history;
  // Most recent loss values, reported at the next snapshot.
  std::optional<double> last_adv, last_same, last_diff, last_gen;
};

/// Seeded models and optimizers for `data`; no iteration is run.
TrainState init_training(const TrainConfig& config, const GanData& data);

struct RunOptions {
  std::uint64_t stop_at = 0;               // stop after this many iterations (0: n_iter)
  std::filesystem::path checkpoint_dir;    // empty: no periodic checkpoints
  std::uint64_t checkpoint_every = 0;      // 0: only the final checkpoint
  std::filesystem::path diagnostic_path;   // where a non-finite abort is dumped (default: checkpoint_dir)
};

/// Raised when a loss or gradient becomes non-finite.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(std::uint64_t iteration, const std::string& cause, std::filesystem::path diagnostic)
      : std::runtime_error("training aborted at iteration " + std::to_string(iteration) + ": " + cause +
                           (diagnostic.empty() ? "" : " (diagnostic checkpoint " + diagnostic.string() + ")")),
        iteration_(iteration),
        diagnostic_(std::move(diagnostic)) {}
  std::uint64_t iteration() const noexcept { return iteration_; }
  const std::filesystem::path& diagnostic() const noexcept { return diagnostic_; }

 private:
  std::uint64_t iteration_;
  std::filesystem::path diagnostic_;
};

/// Runs iterations state.iteration .. stop (Alg. 2): every iteration samples a
/// triplet batch and updates G; D is updated when mod(i, n) = 0 (roles swap
/// with config.swap_schedule). Snapshots are taken every eval_every completed
/// iterations and after the last one.
void run_training(TrainState& state, const GanData& data, const Evaluator& evaluator = {},
                  const RunOptions& options = {});

/// init_training followed by run_training.
TrainState train(const TrainConfig& config, const GanData& data, const Evaluator& evaluator = {},
                 const RunOptions& options = {});

Archive to_archive(const TrainState& state);
TrainState from_archive(const Archive& archive);
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

struct AblationRow {
  Prototype prototype = Prototype::full;
  ConvergenceVerdict verdict;
  std::optional<double> accuracy;
  std::optional<double> best_frechet;
  RunHistory history;
  std::string error;  // non-empty when the run failed
};

struct AblationReport {
  std::vector<AblationRow> rows;  // baseline, A, B, C, full
  double reference_frechet = 0.0; // best Fréchet of the baseline
  const AblationRow& row(Prototype p) const;
};

/// Trains the five prototypes with identical seed and budget and judges each
/// against the baseline's best Fréchet distance. A failed run is recorded as
/// not converged.
AblationReport run_ablation(const TrainConfig& base, const GanData& data, const Evaluator& evaluator,
                            const std::function<void(const AblationRow&)>& on_row = {});

}  // namespace lsc::training
