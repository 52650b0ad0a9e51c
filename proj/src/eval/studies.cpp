#include "lsc/eval/studies.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "lsc/training/trainer.hpp"

namespace lsc::eval {

std::vector<SweepPoint> robustness_sweep(const std::vector<double>& levels, const data::Dataset& dataset,
                                         const OracleClassifier& oracle, const PipelineConfig& config,
                                         const std::function<void(const SweepPoint&)>& on_point) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] >= 0.0 && levels[i] <= 1.0)) {
      throw std::invalid_argument("robustness_sweep: noise level " + std::to_string(levels[i]) + " outside [0, 1]");
    }
    if (i > 0 && !(levels[i] > levels[i - 1])) {
      throw std::invalid_argument("robustness_sweep: noise levels must be strictly ascending");
    }
  }
  oracle.require_usable();
  std::vector<SweepPoint> out;
  for (double p : levels) {
    SweepPoint pt;
    pt.noise = p;
    try {
      const auto noisy = data::inject_label_noise(dataset, {.fraction = p, .seed = config.noise_seed});
      const auto trained = latent::train_extractor(noisy, config.extractor);
      pt.extractor_train_accuracy = trained.report.train_accuracy;
      // Only images and codes reach the GAN; labels are used for scoring below.
      const auto gan_data = training::make_gan_data(dataset.images, trained.extractor);
      const auto state = training::train(config.train, gan_data);
      pt.accuracy = conditional_accuracy(generator_sampler(state.gen), gan_data.features, oracle, dataset,
                                         config.accuracy)
                        .accuracy;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    if (on_point) on_point(pt);
    out.push_back(std::move(pt));
  }
  return out;
}

BorderReport border_effect_report(const Tensor& features, std::span<const int> labels,
                                  const std::vector<bool>& success) {
  const std::size_t n = features.rank() == 2 ? features.dim(0) : 0;
  if (features.rank() != 2) throw ShapeError("border_effect_report: features must be [N, F]");
  if (labels.size() != n || success.size() != n) {
    throw std::invalid_argument("border_effect_report: " + std::to_string(labels.size()) + " labels and " +
                                std::to_string(success.size()) + " flags for " + std::to_string(n) + " samples");
  }
  BorderReport r;
  r.embedding = latent::export_embedding(features, labels, success);
  const auto d = latent::pairwise_l1(features);
  constexpr double inf = std::numeric_limits<double>::infinity();
  double sum_ok = 0.0, sum_bad = 0.0;
  std::size_t n_ok = 0, n_bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double same = inf, other = inf;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double& target = labels[j] == labels[i] ? same : other;
      target = std::min(target, d(i, j));
    }
    const double m = (same == inf || other == inf) ? std::numeric_limits<double>::quiet_NaN() : other - same;
    r.margins.push_back(m);
    if (success[i]) {
      ++r.summary.successes;
    } else {
      ++r.summary.failures;
    }
    if (std::isnan(m)) continue;
    if (success[i]) {
      sum_ok += m;
      ++n_ok;
    } else {
      sum_bad += m;
      ++n_bad;
    }
  }
  if (n_ok > 0) r.summary.success_margin = sum_ok / static_cast<double>(n_ok);
  if (n_bad > 0) r.summary.failure_margin = sum_bad / static_cast<double>(n_bad);
  r.summary.degenerate = r.summary.successes == 0 || r.summary.failures == 0;
  return r;
}

namespace {

constexpr const char* kCurvesHeader = "iter,loss_adv,loss_same,loss_diff,loss_gen,frechet,accuracy";

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

std::optional<double> parse_cell(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw std::invalid_argument("curves: bad number '" + s + "' on line " + std::to_string(line));
  return v;
}

}  // namespace

std::string curves_csv(const training::RunHistory& history) {
  std::ostringstream os;
  os << kCurvesHeader << "\n";
  for (const auto& r : history.records()) {
    os << r.iter << "," << cell(r.loss_adv) << "," << cell(r.loss_same) << "," << cell(r.loss_diff) << ","
       << cell(r.loss_gen) << "," << cell(r.frechet) << "," << cell(r.accuracy) << "\n";
  }
  return os.str();
}

void emit_curves(const training::RunHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("emit_curves: cannot write " + path.string());
  out << curves_csv(history);
  if (!out) throw std::runtime_error("emit_curves: write failed for " + path.string());
}

training::RunHistory parse_curves(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCurvesHeader) throw std::invalid_argument("curves: missing or wrong header");
  training::RunHistory h;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string c;
    std::istringstream ls(line);
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) throw std::invalid_argument("curves: line " + std::to_string(lineno) + " needs 7 cells");
    training::Snapshot s;
    const auto iter = parse_cell(cells[0], lineno);
    if (!iter || *iter < 0) throw std::invalid_argument("curves: missing iteration on line " + std::to_string(lineno));
    s.iter = static_cast<std::uint64_t>(*iter);
    s.loss_adv = parse_cell(cells[1], lineno);
    s.loss_same = parse_cell(cells[2], lineno);
    s.loss_diff = parse_cell(cells[3], lineno);
    s.loss_gen = parse_cell(cells[4], lineno);
    s.frechet = parse_cell(cells[5], lineno);
    s.accuracy = parse_cell(cells[6], lineno);
    h.append(s);
  }
  return h;
}

training::RunHistory read_curves(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("curves: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_curves(ss.str());
}

}  // namespace lsc::eval
