#include "lsc/cli/config.hpp"

namespace lsc::cli {

using nlohmann::json;
using training::ConfigError;
using training::ObjectReader;

namespace {

json widths_json(const ClassifierWidths& w) { return {{"conv1", w.conv1}, {"conv2", w.conv2}, {"hidden", w.hidden}}; }

json classifier_train_json(const latent::ClassifierTrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch", t.batch},
          {"seed", t.seed},
          {"adam", {{"lr", t.adam.lr}, {"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}}};
}

void read_widths(ObjectReader r, ClassifierWidths& w) {
  r.read("conv1", w.conv1);
  r.read("conv2", w.conv2);
  r.read("hidden", w.hidden);
  r.finish();
  for (auto [key, v] : {std::pair{"conv1", w.conv1}, {"conv2", w.conv2}, {"hidden", w.hidden}}) {
    if (v < 1) throw ConfigError(r.field(key), "must be at least 1");
  }
}

void read_classifier_train(ObjectReader r, latent::ClassifierTrainConfig& t) {
  r.read("epochs", t.epochs);
  r.read("batch", t.batch);
  r.read("seed", t.seed);
  auto a = r.child("adam");
  a.read("lr", t.adam.lr);
  a.read("beta1", t.adam.beta1);
  a.read("beta2", t.adam.beta2);
  a.read("eps", t.adam.eps);
  a.finish();
  r.finish();
  if (t.batch < 1) throw ConfigError(r.field("batch"), "must be at least 1");
  if (!(t.adam.lr > 0.0)) throw ConfigError(a.field("lr"), "must be positive");
  if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0)) throw ConfigError(a.field("beta1"), "must lie in [0, 1)");
  if (!(t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0)) throw ConfigError(a.field("beta2"), "must lie in [0, 1)");
  if (!(t.adam.eps > 0.0)) throw ConfigError(a.field("eps"), "must be positive");
}

latent::ClassifierArch arch_for(const ClassifierWidths& w, const data::Dataset& d) {
  const auto s = d.image_shape();
  return {.channels = s[0], .side = s[1], .conv1 = w.conv1, .conv2 = w.conv2, .hidden = w.hidden,
          .num_classes = d.num_classes};
}

}  // namespace

json to_json(const RunConfig& c) {
  const auto& s = c.data.synthetic;
  return {
      {"name", c.name},
      {"runs_dir", c.runs_dir},
      {"data",
       {{"source", c.data.source},
        {"synthetic",
         {{"num_classes", s.num_classes},
          {"per_class", s.per_class},
          {"image_side", s.image_side},
          {"seed", s.seed},
          {"noise", s.noise},
          {"jitter", s.jitter}}},
        {"images", c.data.images},
        {"labels", c.data.labels},
        {"limit", c.data.limit},
        {"resize", c.data.resize},
        {"split_seed", c.data.split_seed}}},
      {"extractor",
       {{"trained", c.extractor.trained},
        {"widths", widths_json(c.extractor.widths)},
        {"tap", c.extractor.tap},
        {"pool", c.extractor.pool},
        {"train", classifier_train_json(c.extractor.train)},
        {"min_accuracy", c.extractor.min_accuracy}}},
      {"oracle",
       {{"widths", widths_json(c.oracle.widths)}, {"train", classifier_train_json(c.oracle.train)}, {"floor", c.oracle.floor}}},
      {"train", training::to_json(c.train)},
      {"eval",
       {{"num_samples", c.accuracy.num_samples},
        {"seed", c.accuracy.seed},
        {"during_training", c.eval_during_training}}},
      {"checkpoint_every", c.checkpoint_every},
      {"stats", {{"ks", c.ks}}},
      {"sweep", {{"levels", c.noise_levels}, {"noise_seed", c.noise_seed}}},
  };
}

RunConfig run_config_from_json(const json& input) {
  const json& j = (input.is_object() && input.contains("config") && input.contains("manifest_version"))
                      ? input.at("config")
                      : input;
  RunConfig c;
  ObjectReader r(j, "config");
  r.read("name", c.name);
  if (c.name.empty() || c.name.find('/') != std::string::npos || c.name == "." || c.name == "..") {
    throw ConfigError(r.field("name"), "must be a non-empty plain directory name");
  }
  r.read("runs_dir", c.runs_dir);
  if (c.runs_dir.empty()) throw ConfigError(r.field("runs_dir"), "must not be empty");
  {
    auto d = r.child("data");
    d.read("source", c.data.source);
    if (c.data.source != "synthetic" && c.data.source != "idx") {
      throw ConfigError(d.field("source"), "expected \"synthetic\" or \"idx\"");
    }
    auto s = d.child("synthetic");
    s.read("num_classes", c.data.synthetic.num_classes);
    s.read("per_class", c.data.synthetic.per_class);
    s.read("image_side", c.data.synthetic.image_side);
    s.read("seed", c.data.synthetic.seed);
    s.read("noise", c.data.synthetic.noise);
    s.read("jitter", c.data.synthetic.jitter);
    s.finish();
    if (c.data.synthetic.num_classes < 2) throw ConfigError(s.field("num_classes"), "must be at least 2");
    if (c.data.synthetic.per_class < 2) throw ConfigError(s.field("per_class"), "must be at least 2");
    if (c.data.synthetic.image_side < 4) throw ConfigError(s.field("image_side"), "must be at least 4");
    if (!(c.data.synthetic.noise >= 0.0 && c.data.synthetic.noise <= 1.0)) {
      throw ConfigError(s.field("noise"), "must lie in [0, 1]");
    }
    d.read("images", c.data.images);
    d.read("labels", c.data.labels);
    d.read("limit", c.data.limit);
    d.read("resize", c.data.resize);
    d.read("split_seed", c.data.split_seed);
    d.finish();
    if (c.data.source == "idx") {
      if (c.data.images.empty()) throw ConfigError(d.field("images"), "required when source is \"idx\"");
      if (c.data.labels.empty()) throw ConfigError(d.field("labels"), "required when source is \"idx\"");
    }
    if (c.data.resize != 0 && c.data.resize < 4) throw ConfigError(d.field("resize"), "must be 0 or at least 4");
  }
  {
    auto e = r.child("extractor");
    e.read("trained", c.extractor.trained);
    read_widths(e.child("widths"), c.extractor.widths);
    e.read("tap", c.extractor.tap);
    e.read("pool", c.extractor.pool);
    read_classifier_train(e.child("train"), c.extractor.train);
    e.read("min_accuracy", c.extractor.min_accuracy);
    e.finish();
    if (c.extractor.pool < 1) throw ConfigError(e.field("pool"), "must be at least 1");
  }
  {
    auto o = r.child("oracle");
    read_widths(o.child("widths"), c.oracle.widths);
    read_classifier_train(o.child("train"), c.oracle.train);
    o.read("floor", c.oracle.floor);
    o.finish();
    if (!(c.oracle.floor >= 0.0 && c.oracle.floor <= 1.0)) throw ConfigError(o.field("floor"), "must lie in [0, 1]");
  }
  c.train = training::train_config_from_json(r.has("train") ? j.at("train") : json::object(), "config.train");
  r.child("train");
  {
    auto e = r.child("eval");
    e.read("num_samples", c.accuracy.num_samples);
    e.read("seed", c.accuracy.seed);
    e.read("during_training", c.eval_during_training);
    e.finish();
    if (c.accuracy.num_samples < 2) throw ConfigError(e.field("num_samples"), "must be at least 2");
  }
  r.read("checkpoint_every", c.checkpoint_every);
  {
    auto s = r.child("stats");
    s.read("ks", c.ks);
    s.finish();
    if (c.ks.empty()) throw ConfigError(s.field("ks"), "needs at least one k");
    for (std::size_t i = 0; i < c.ks.size(); ++i) {
      if (c.ks[i] < 1) throw ConfigError(s.field("ks") + "[" + std::to_string(i) + "]", "must be at least 1");
    }
  }
  {
    auto s = r.child("sweep");
    s.read("levels", c.noise_levels);
    s.read("noise_seed", c.noise_seed);
    s.finish();
    for (std::size_t i = 0; i < c.noise_levels.size(); ++i) {
      const auto where = s.field("levels") + "[" + std::to_string(i) + "]";
      if (!(c.noise_levels[i] >= 0.0 && c.noise_levels[i] <= 1.0)) throw ConfigError(where, "must lie in [0, 1]");
      if (i > 0 && !(c.noise_levels[i] > c.noise_levels[i - 1])) throw ConfigError(where, "levels must be ascending");
    }
  }
  r.finish();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set", "expected key.path=value, got '" + assignment + "'");
  }
  const auto path = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("--set", "empty component in '" + path + "'");
    if (!node->is_object()) throw ConfigError(path, "cannot set a field inside a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

latent::ExtractorConfig extractor_config(const RunConfig& c, const data::Dataset& d) {
  latent::ExtractorConfig e;
  e.arch = arch_for(c.extractor.widths, d);
  e.tap = c.extractor.tap;
  e.pool = c.extractor.pool;
  e.train = c.extractor.train;
  if (!c.extractor.trained) e.train.epochs = 0;
  e.min_accuracy = c.extractor.trained ? c.extractor.min_accuracy : 0.0;
  return e;
}

eval::OracleConfig oracle_config(const RunConfig& c, const data::Dataset& d) {
  eval::OracleConfig o;
  o.arch = arch_for(c.oracle.widths, d);
  o.train = c.oracle.train;
  o.seed = c.oracle.train.seed;
  o.floor = c.oracle.floor;
  return o;
}

}  // namespace lsc::cli
