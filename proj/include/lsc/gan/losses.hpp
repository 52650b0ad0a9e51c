#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsc/numerics/ops.hpp"

namespace lsc::gan {

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-7;

namespace detail {

template <typename T>
BasicVar<T> mean_log(BasicVar<T> x) {
  return ops::mean(ops::clamped_log(x, static_cast<T>(kProbFloor), static_cast<T>(1.0 - kProbFloor)));
}

template <typename T>
BasicVar<T> checked(BasicVar<T> loss, const char* what) {
  loss.value().check_finite(what);
  return loss;
}

}  // namespace detail

/// mean log(1 - D([real_correct, fake]))
template <typename T>
BasicVar<T> loss_adv(BasicVar<T> probs) {
  return detail::checked(detail::mean_log(ops::one_minus(probs)), "loss_adv");
}

/// mean log D([real_correct, real_correct'])
template <typename T>
BasicVar<T> loss_same(BasicVar<T> probs) {
  return detail::checked(detail::mean_log(probs), "loss_same");
}

/// mean log(1 - D([real_correct, real_wrong]))
template <typename T>
BasicVar<T> loss_diff(BasicVar<T> probs) {
  return detail::checked(detail::mean_log(ops::one_minus(probs)), "loss_diff");
}

/// Non-saturating generator loss: -mean log D([real_correct, fake]).
template <typename T>
BasicVar<T> loss_generator(BasicVar<T> probs) {
  return detail::checked(ops::scale_shift(detail::mean_log(probs), T{-1}, T{0}), "loss_generator");
}

template <typename T>
struct MinimaxTerms {
  BasicVar<T> disc;  // mean log D(real) + mean log(1 - D(fake)), ascended by D
  BasicVar<T> gen;   // -mean log D(fake), descended by G
};

/// Single-image baseline objective.
template <typename T>
MinimaxTerms<T> loss_minimax(BasicVar<T> probs_real, BasicVar<T> probs_fake) {
  auto disc = ops::add(detail::mean_log(probs_real), detail::mean_log(ops::one_minus(probs_fake)));
  auto gen = ops::scale_shift(detail::mean_log(probs_fake), T{-1}, T{0});
  return {detail::checked(disc, "loss_minimax disc"), detail::checked(gen, "loss_minimax gen")};
}

/// Weights of the triple coupled objective; a term is active when its flag is
/// set and its weight is positive.
struct LossWeights {
  double adv = 1.0;
  double same = 1.0;
  double diff = 1.0;
  bool use_adv = true;
  bool use_same = true;
  bool use_diff = true;

  bool adv_active() const { return use_adv && adv > 0.0; }
  bool same_active() const { return use_same && same > 0.0; }
  bool diff_active() const { return use_diff && diff > 0.0; }
  bool any_active() const { return adv_active() || same_active() || diff_active(); }

  void validate() const {
    if (adv < 0.0 || same < 0.0 || diff < 0.0) throw std::invalid_argument("loss weights must be non-negative");
    if (!any_active()) throw std::invalid_argument("loss weights: every term is disabled");
  }
};

template <typename T>
struct CoupledTerms {
  std::optional<BasicVar<T>> adv;
  std::optional<BasicVar<T>> same;
  std::optional<BasicVar<T>> diff;
};

/// λa·L_adv + λs·L_same + λd·L_diff over the active terms (ascended by D).
template <typename T>
BasicVar<T> loss_discriminator(const LossWeights& w, const CoupledTerms<T>& terms) {
  w.validate();
  std::vector<BasicVar<T>> parts;
  std::vector<T> weights;
  auto take = [&](bool active, const std::optional<BasicVar<T>>& term, double weight, const char* name) {
    if (!active) return;
    if (!term) throw std::invalid_argument(std::string("loss_discriminator: active term ") + name + " not supplied");
    parts.push_back(*term);
    weights.push_back(static_cast<T>(weight));
  };
  take(w.adv_active(), terms.adv, w.adv, "adv");
  take(w.same_active(), terms.same, w.same, "same");
  take(w.diff_active(), terms.diff, w.diff, "diff");
  return detail::checked(ops::weighted_sum(parts, weights), "loss_discriminator");
}

}  // namespace lsc::gan
