#include "lsc/eval/oracle.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace lsc::eval {

OracleClassifier::OracleClassifier(latent::Classifier model, double test_accuracy, double floor)
    : model_(std::move(model)), test_accuracy_(test_accuracy), floor_(floor) {}

void OracleClassifier::require_usable() const {
  if (!usable()) throw OracleBelowFloor(test_accuracy_, floor_);
}

OracleClassifier train_oracle(const data::Dataset& train, const data::Dataset& test, const OracleConfig& config) {
  latent::Classifier model(config.arch, config.seed, "oracle");
  auto tc = config.train;
  tc.seed = derive_seed(config.seed, 3);
  model.train(train, tc);
  const double acc = model.accuracy(test);
  return OracleClassifier(std::move(model), acc, config.floor);
}

ConditionalSampler generator_sampler(const gan::Generator<float>& generator) {
  return [&generator](const Tensor& codes, const Tensor&, Rng& rng) {
    Tensor z({codes.dim(0), generator.arch().noise_dim});
    for (auto& v : z.values()) v = static_cast<float>(rng.normal());
    return generator.generate(z, codes);
  };
}

std::vector<std::size_t> sample_sources(std::size_t n, std::size_t count, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample_sources: empty dataset");
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    const auto perm = rng.permutation(n);
    const std::size_t take = std::min(n, count - out.size());
    out.insert(out.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

AccuracyResult conditional_accuracy(const ConditionalSampler& sampler, const Tensor& features,
                                    const OracleClassifier& oracle, const data::Dataset& dataset,
                                    const AccuracyConfig& config) {
  oracle.require_usable();
  if (config.num_samples == 0) throw std::invalid_argument("conditional_accuracy: num_samples must be positive");
  if (features.rank() != 2 || features.dim(0) != dataset.size()) {
    throw ShapeError("conditional_accuracy: features " + to_string(features.shape()) + " do not match " +
                     std::to_string(dataset.size()) + " images");
  }
  Rng rng(config.seed);
  AccuracyResult r;
  r.sources = sample_sources(dataset.size(), config.num_samples, rng);
  std::vector<Tensor> parts;
  const std::size_t chunk = std::max<std::size_t>(1, config.chunk);
  for (std::size_t begin = 0; begin < r.sources.size(); begin += chunk) {
    const std::span<const std::size_t> idx(r.sources.data() + begin, std::min(chunk, r.sources.size() - begin));
    const auto codes = gather_rows(features, idx);
    const auto src = gather_rows(dataset.images, idx);
    auto gen = sampler(codes, src, rng);
    if (gen.rank() != 4 || gen.dim(0) != idx.size()) {
      throw ShapeError("conditional_accuracy: sampler returned " + to_string(gen.shape()));
    }
    const auto pred = oracle.predict(gen);
    r.predicted.insert(r.predicted.end(), pred.begin(), pred.end());
    parts.push_back(std::move(gen));
  }
  r.generated = concat_rows<float>(parts);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < r.sources.size(); ++i) {
    const bool ok = r.predicted[i] == dataset.labels[r.sources[i]];
    r.success.push_back(ok);
    hits += ok;
  }
  r.accuracy = static_cast<double>(hits) / static_cast<double>(r.sources.size());
  return r;
}

AccuracyResult conditional_accuracy(const ConditionalSampler& sampler, const latent::FeatureExtractor& extractor,
                                    const OracleClassifier& oracle, const data::Dataset& dataset,
                                    const AccuracyConfig& config) {
  oracle.require_usable();
  return conditional_accuracy(sampler, latent::extract_features(extractor, dataset.images).features, oracle, dataset,
                              config);
}

void MetricReport::validate() const {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw std::invalid_argument("metric report: accuracy outside [0, 1]");
  if (!(frechet >= 0.0)) throw std::invalid_argument("metric report: negative Fréchet distance");
  if (!(inception >= 1.0 - 1e-9)) throw std::invalid_argument("metric report: Inception Score below 1");
  if (num_classes > 0 && inception > num_classes + 1e-9) {
    throw std::invalid_argument("metric report: Inception Score above the class count");
  }
}

namespace {

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os << "accuracy=" << exact(accuracy) << "\n"
     << "frechet=" << exact(frechet) << "\n"
     << "inception=" << exact(inception) << "\n"
     << "samples=" << samples << "\n"
     << "num_classes=" << num_classes << "\n"
     << "fingerprint=" << fingerprint << "\n";
  return os.str();
}

MetricReport MetricReport::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("metric report: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::invalid_argument("metric report: missing key '" + k + "'");
    return it->second;
  };
  MetricReport r;
  r.accuracy = std::stod(need("accuracy"));
  r.frechet = std::stod(need("frechet"));
  r.inception = std::stod(need("inception"));
  r.samples = std::stoull(need("samples"));
  r.num_classes = std::stoi(need("num_classes"));
  r.fingerprint = need("fingerprint");
  return r;
}

GeneratorEvaluator::GeneratorEvaluator(const OracleClassifier& oracle, const data::Dataset& dataset, Tensor features,
                                       AccuracyConfig config)
    : oracle_(&oracle), dataset_(&dataset), features_(std::move(features)), config_(config) {
  oracle.require_usable();
  real_ = fit_gaussian(oracle.embed(dataset.images));
}

AccuracyResult GeneratorEvaluator::accuracy(const ConditionalSampler& sampler) const {
  return conditional_accuracy(sampler, features_, *oracle_, *dataset_, config_);
}

MetricReport GeneratorEvaluator::evaluate(const ConditionalSampler& sampler, const std::string& fingerprint) const {
  const auto acc = accuracy(sampler);
  MetricReport r;
  r.accuracy = acc.accuracy;
  r.frechet = frechet_distance(real_, fit_gaussian(oracle_->embed(acc.generated)));
  r.inception = inception_score(oracle_->probabilities(acc.generated));
  r.samples = acc.size();
  r.num_classes = oracle_->num_classes();
  r.fingerprint = fingerprint;
  return r;
}

training::EvalPoint GeneratorEvaluator::operator()(const gan::Generator<float>& generator, std::uint64_t) const {
  const auto r = evaluate(generator);
  return {r.frechet, r.accuracy};
}

}  // namespace lsc::eval
