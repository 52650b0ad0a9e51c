#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lsc::training {

/// One metric snapshot. `iter` counts completed iterations. Loss terms that a
/// prototype does not compute, and metrics without an evaluator, are absent.
struct Snapshot {
  std::uint64_t iter = 0;
  std::optional<double> loss_adv;
  std::optional<double> loss_same;
  std::optional<double> loss_diff;
  std::optional<double> loss_gen;
  std::optional<double> frechet;
  std::optional<double> accuracy;
  double wall_seconds = 0.0;  // since the start of the session that recorded it

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

/// Append-only snapshot log plus update counters.
class RunHistory {
 public:
  /// Throws unless `s.iter` is strictly greater than the last recorded one.
  void append(const Snapshot& s);

  const std::vector<Snapshot>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::uint64_t gen_updates = 0;
  std::uint64_t disc_updates = 0;
  bool losses_finite = true;

  friend bool operator==(const RunHistory&, const RunHistory&) = default;

 private:
  std::vector<Snapshot> records_;
};

/// Best (lowest) Fréchet distance in the history, if any was recorded.
std::optional<double> best_frechet(const RunHistory& h);

/// Last recorded accuracy, if any.
std::optional<double> final_accuracy(const RunHistory& h);

struct ConvergenceVerdict {
  bool converged = false;
  bool losses_finite = false;
  std::optional<double> window_frechet;  // mean over the final window
  double threshold = 0.0;               // factor x reference Fréchet
  std::size_t window = 0;               // snapshots in the final window
  std::string reason;
};

/// converged iff the mean Fréchet distance over the last `window_fraction` of
/// snapshots (at least one) is at most factor x `reference_frechet`, and every
/// loss stayed finite.
ConvergenceVerdict judge_convergence(const RunHistory& h, double reference_frechet, double window_fraction = 0.1,
                                     double factor = 2.0);

}  // namespace lsc::training
