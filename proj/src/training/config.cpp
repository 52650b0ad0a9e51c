#include "lsc/training/config.hpp"

namespace lsc::training {

using nlohmann::json;

std::string to_string(Prototype p) {
  switch (p) {
    case Prototype::baseline: return "baseline";
    case Prototype::A: return "A";
    case Prototype::B: return "B";
    case Prototype::C: return "C";
    case Prototype::full: return "full";
  }
  return "?";
}

Prototype parse_prototype(const std::string& s) {
  for (auto p : {Prototype::baseline, Prototype::A, Prototype::B, Prototype::C, Prototype::full}) {
    if (s == to_string(p)) return p;
  }
  throw std::invalid_argument("unknown prototype '" + s + "' (expected baseline, A, B, C or full)");
}

gan::LossWeights weights_for(Prototype p, const gan::LossWeights& base) {
  gan::LossWeights w = base;
  switch (p) {
    case Prototype::A: w.use_same = false; w.use_diff = false; break;
    case Prototype::B: w.use_diff = false; break;
    case Prototype::C: w.use_same = false; break;
    case Prototype::baseline:
    case Prototype::full: break;
  }
  return w;
}

namespace {

void validate_adam(const AdamConfig& a, const std::string& path) {
  if (!(a.lr > 0.0)) throw ConfigError(path + ".lr", "must be positive");
  if (!(a.beta1 >= 0.0 && a.beta1 < 1.0)) throw ConfigError(path + ".beta1", "must lie in [0, 1)");
  if (!(a.beta2 >= 0.0 && a.beta2 < 1.0)) throw ConfigError(path + ".beta2", "must lie in [0, 1)");
  if (!(a.eps > 0.0)) throw ConfigError(path + ".eps", "must be positive");
}

json adam_json(const AdamConfig& a) { return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}}; }

void read_adam(ObjectReader r, AdamConfig& a) {
  r.read("lr", a.lr);
  r.read("beta1", a.beta1);
  r.read("beta2", a.beta2);
  r.read("eps", a.eps);
  r.finish();
}

}  // namespace

void TrainConfig::validate() const {
  const std::string p = "train";
  if (n_iter < 1) throw ConfigError(p + ".n_iter", "must be at least 1");
  if (n < 1) throw ConfigError(p + ".n", "must be at least 1");
  if (batch < 2) throw ConfigError(p + ".batch", "must be at least 2");
  if (eval_every < 1) throw ConfigError(p + ".eval_every", "must be at least 1");
  if (weights.adv < 0.0) throw ConfigError(p + ".weights.adv", "must be non-negative");
  if (weights.same < 0.0) throw ConfigError(p + ".weights.same", "must be non-negative");
  if (weights.diff < 0.0) throw ConfigError(p + ".weights.diff", "must be non-negative");
  if (prototype != Prototype::baseline && !effective_weights().any_active()) {
    throw ConfigError(p + ".weights", "no active loss term for prototype " + to_string(prototype));
  }
  validate_adam(gen_adam, p + ".gen_adam");
  validate_adam(disc_adam, p + ".disc_adam");
  if (noise_dim < 1) throw ConfigError(p + ".generator.noise_dim", "must be at least 1");
  if (gen_hidden.empty()) throw ConfigError(p + ".generator.hidden", "needs at least one layer");
  for (std::size_t i = 0; i < gen_hidden.size(); ++i) {
    if (gen_hidden[i] < 1) throw ConfigError(p + ".generator.hidden[" + std::to_string(i) + "]", "must be positive");
  }
  if (disc_conv1 < 1) throw ConfigError(p + ".discriminator.conv1", "must be at least 1");
  if (disc_conv2 < 1) throw ConfigError(p + ".discriminator.conv2", "must be at least 1");
  if (disc_hidden < 1) throw ConfigError(p + ".discriminator.hidden", "must be at least 1");
}

gan::GeneratorArch TrainConfig::generator_arch(std::size_t code_dim, const Shape& image) const {
  return {.noise_dim = noise_dim,
          .code_dim = code_dim,
          .hidden = gen_hidden,
          .image = image,
          .use_codes = prototype != Prototype::baseline};
}

gan::DiscriminatorArch TrainConfig::discriminator_arch(const Shape& image) const {
  return {.image = image,
          .conv1 = disc_conv1,
          .conv2 = disc_conv2,
          .hidden = disc_hidden,
          .coupled = prototype != Prototype::baseline,
          .spectral_norm = spectral_norm};
}

json to_json(const TrainConfig& c) {
  return {{"n_iter", c.n_iter},
          {"n", c.n},
          {"batch", c.batch},
          {"prototype", to_string(c.prototype)},
          {"weights", {{"adv", c.weights.adv}, {"same", c.weights.same}, {"diff", c.weights.diff}}},
          {"seed", c.seed},
          {"gen_adam", adam_json(c.gen_adam)},
          {"disc_adam", adam_json(c.disc_adam)},
          {"eval_every", c.eval_every},
          {"swap_schedule", c.swap_schedule},
          {"neighborhood", c.neighborhood == sampler::Neighborhood::batch ? "batch" : "global"},
          {"generator", {{"noise_dim", c.noise_dim}, {"hidden", c.gen_hidden}}},
          {"discriminator",
           {{"conv1", c.disc_conv1},
            {"conv2", c.disc_conv2},
            {"hidden", c.disc_hidden},
            {"spectral_norm", c.spectral_norm}}}};
}

TrainConfig train_config_from_json(const json& j, const std::string& path) {
  TrainConfig c;
  ObjectReader r(j, path);
  r.read("n_iter", c.n_iter);
  r.read("n", c.n);
  r.read("batch", c.batch);
  std::string proto = to_string(c.prototype);
  r.read("prototype", proto);
  try {
    c.prototype = parse_prototype(proto);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.field("prototype"), e.what());
  }
  {
    auto w = r.child("weights");
    w.read("adv", c.weights.adv);
    w.read("same", c.weights.same);
    w.read("diff", c.weights.diff);
    w.finish();
  }
  r.read("seed", c.seed);
  read_adam(r.child("gen_adam"), c.gen_adam);
  read_adam(r.child("disc_adam"), c.disc_adam);
  r.read("eval_every", c.eval_every);
  r.read("swap_schedule", c.swap_schedule);
  std::string hood = c.neighborhood == sampler::Neighborhood::batch ? "batch" : "global";
  r.read("neighborhood", hood);
  if (hood == "batch") {
    c.neighborhood = sampler::Neighborhood::batch;
  } else if (hood == "global") {
    c.neighborhood = sampler::Neighborhood::global;
  } else {
    throw ConfigError(r.field("neighborhood"), "expected \"batch\" or \"global\"");
  }
  {
    auto g = r.child("generator");
    g.read("noise_dim", c.noise_dim);
    g.read("hidden", c.gen_hidden);
    g.finish();
  }
  {
    auto d = r.child("discriminator");
    d.read("conv1", c.disc_conv1);
    d.read("conv2", c.disc_conv2);
    d.read("hidden", c.disc_hidden);
    d.read("spectral_norm", c.spectral_norm);
    d.finish();
  }
  r.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    // validate() reports paths under "train"; re-root them at `path`.
    std::string p = e.path();
    if (p.rfind("train", 0) == 0) p = path + p.substr(5);
    throw ConfigError(p, std::string(e.what()).substr(e.path().size() + 2));
  }
  return c;
}

}  // namespace lsc::training
