#include "lsc/training/history.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lsc::training {

void RunHistory::append(const Snapshot& s) {
  if (!records_.empty() && s.iter <= records_.back().iter) {
    throw std::invalid_argument("run history: snapshot iteration " + std::to_string(s.iter) +
                                " does not follow " + std::to_string(records_.back().iter));
  }
  records_.push_back(s);
}

std::optional<double> best_frechet(const RunHistory& h) {
  std::optional<double> best;
  for (const auto& r : h.records()) {
    if (r.frechet && (!best || *r.frechet < *best)) best = r.frechet;
  }
  return best;
}

std::optional<double> final_accuracy(const RunHistory& h) {
  for (auto it = h.records().rbegin(); it != h.records().rend(); ++it) {
    if (it->accuracy) return it->accuracy;
  }
  return std::nullopt;
}

ConvergenceVerdict judge_convergence(const RunHistory& h, double reference_frechet, double window_fraction,
                                     double factor) {
  ConvergenceVerdict v;
  v.losses_finite = h.losses_finite;
  v.threshold = factor * reference_frechet;

  std::vector<double> fd;
  for (const auto& r : h.records()) {
    if (r.frechet) fd.push_back(*r.frechet);
  }
  if (fd.empty()) {
    v.reason = "no Fréchet distance recorded";
    return v;
  }
  v.window = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(window_fraction * fd.size())));
  double sum = 0.0;
  for (std::size_t i = fd.size() - v.window; i < fd.size(); ++i) sum += fd[i];
  v.window_frechet = sum / static_cast<double>(v.window);

  std::ostringstream os;
  os << "final-window Fréchet " << *v.window_frechet << (*v.window_frechet <= v.threshold ? " <= " : " > ")
     << "threshold " << v.threshold;
  if (!v.losses_finite) os << "; non-finite loss";
  v.reason = os.str();
  v.converged = v.losses_finite && std::isfinite(*v.window_frechet) && *v.window_frechet <= v.threshold;
  return v;
}

}  // namespace lsc::training
