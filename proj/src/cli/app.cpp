#include "lsc/cli/app.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lsc/cli/config.hpp"
#include "lsc/eval/studies.hpp"
#include "lsc/training/trainer.hpp"

#ifndef LSC_VERSION
#define LSC_VERSION "0.0.0"
#endif

namespace lsc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version() { return LSC_VERSION; }

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string name;
  std::string runs_dir;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string opt_text(const std::optional<double>& v, const char* spec = "%.4f") { return v ? fmt(spec, *v) : "-"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
    if (!f.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError("config file '" + path.string() + "' is not valid JSON");
  return j;
}

json unwrap_manifest(json j) {
  if (j.is_object() && j.contains("manifest_version") && j.contains("config")) return j.at("config");
  return j;
}

/// Relative input paths in a config file are taken relative to the file.
void anchor_paths(json& j, const fs::path& config_file) {
  if (!j.is_object() || !j.contains("data") || !j["data"].is_object()) return;
  for (const auto* key : {"images", "labels"}) {
    auto& v = j["data"][key];
    if (!v.is_string() || v.get<std::string>().empty()) continue;
    const fs::path p = v.get<std::string>();
    if (p.is_relative()) v = (config_file.parent_path() / p).lexically_normal().string();
  }
}

RunConfig resolve(const Common& c, json base = json::object()) {
  json j = std::move(base);
  if (!c.config_path.empty()) {
    j = unwrap_manifest(read_json_file(c.config_path));
    anchor_paths(j, c.config_path);
  }
  for (const auto& s : c.sets) apply_override(j, s);
  if (!c.name.empty()) j["name"] = c.name;
  if (!c.runs_dir.empty()) j["runs_dir"] = c.runs_dir;
  return run_config_from_json(j);
}

data::Dataset load_dataset(const DataSpec& d) {
  data::Dataset ds;
  if (d.source == "synthetic") {
    ds = data::make_synthetic(d.synthetic);
  } else {
    for (const auto& p : {d.images, d.labels}) {
      if (!fs::exists(p)) throw UsageError("input file '" + p + "' does not exist");
    }
    ds = data::load_idx(d.images, d.labels);
  }
  if (d.limit != 0 && d.limit < ds.size()) ds = data::take(ds, d.limit);
  if (d.resize != 0 && d.resize != ds.image_shape().back()) ds = data::resize(ds, d.resize);
  ds.validate();
  return ds;
}

json seeds_json(const RunConfig& c) {
  return {{"data", c.data.synthetic.seed},    {"split", c.data.split_seed},   {"extractor", c.extractor.train.seed},
          {"oracle", c.oracle.train.seed},    {"train", c.train.seed},        {"eval", c.accuracy.seed},
          {"noise", c.noise_seed}};
}

/// Self-describing record of one command in a run directory.
class Manifest {
 public:
  Manifest(fs::path dir, const std::string& file, const RunConfig& cfg, const std::string& command,
           const data::Dataset& ds)
      : dir_(std::move(dir)), path_(dir_ / file) {
    j_ = {{"manifest_version", 1},
          {"command", command},
          {"version", version()},
          {"config", to_json(cfg)},
          {"seeds", seeds_json(cfg)},
          {"dataset",
           {{"name", ds.name},
            {"fingerprint", data::fingerprint(ds)},
            {"samples", ds.size()},
            {"image_shape", ds.image_shape()},
            {"classes", ds.num_classes}}},
          {"created", utc_now()},
          {"finished", nullptr},
          {"status", "running"},
          {"outputs", json::array()}};
    save();
  }

  void output(const fs::path& file) {
    const auto rel = fs::relative(file, dir_).generic_string();
    auto& o = j_["outputs"];
    if (std::find(o.begin(), o.end(), rel) == o.end()) o.push_back(rel);
  }
  void set(const std::string& key, json value) { j_[key] = std::move(value); }
  void finish(const std::string& status, const std::string& error = "") {
    j_["status"] = status;
    j_["finished"] = utc_now();
    if (!error.empty()) j_["error"] = error;
    save();
  }

 private:
  void save() { write_text(path_, j_.dump(2) + "\n"); }

  fs::path dir_;
  fs::path path_;
  json j_;
};

/// Runs `body`, marking the manifest failed if it throws.
template <typename F>
int guarded(Manifest& m, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    m.finish("failed", e.what());
    throw;
  }
  m.finish("ok");
  return kExitOk;
}

struct Prepared {
  RunConfig cfg;
  data::Dataset dataset;
  data::Split parts;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p{cfg, load_dataset(cfg.data), {}};
  p.parts = data::split(p.dataset, cfg.data.split_seed);
  return p;
}

std::string extractor_key(const RunConfig& cfg, const data::Dataset& train) {
  return json{{"extractor", to_json(cfg)["extractor"]}, {"train_fingerprint", data::fingerprint(train)}}.dump();
}

struct ObtainedExtractor {
  latent::FeatureExtractor extractor;
  double train_accuracy = 0.0;
  bool reused = false;
};

void save_extractor(const fs::path& path, const std::string& key, const latent::TrainedExtractor& te) {
  training::Archive a;
  a.put("key", key);
  a.put("tap", static_cast<std::uint64_t>(te.extractor.tap()));
  a.put("pool", static_cast<std::uint64_t>(te.extractor.pool()));
  a.put("report", std::vector<double>{te.report.train_accuracy, te.report.final_loss,
                                      static_cast<double>(te.report.steps)});
  for (const auto& [name, t] : te.extractor.model().params()) a.put("param/" + name, t);
  a.save(path);
}

/// Loads `path` when it was produced for the same extractor settings and
/// training data; otherwise trains afresh and writes it.
ObtainedExtractor obtain_extractor(const RunConfig& cfg, const data::Dataset& train, const fs::path& path,
                                   bool allow_reuse, std::ostream& out) {
  const auto ec = extractor_config(cfg, train);
  const auto key = extractor_key(cfg, train);
  if (allow_reuse && fs::exists(path)) {
    const auto a = training::Archive::load(path);
    if (a.contains("key") && a.str("key") == key) {
      auto fe = latent::make_extractor(ec);
      for (auto& [name, t] : fe.model().params()) {
        const auto& stored = a.tensor("param/" + name);
        if (stored.shape() != t.shape()) {
          throw training::CheckpointError("extractor checkpoint: parameter '" + name + "' has shape " +
                                          lsc::to_string(stored.shape()) + ", expected " + lsc::to_string(t.shape()));
        }
        t = stored;
      }
      out << "extractor: reused " << path.string() << "\n";
      return {std::move(fe), a.f64s("report").at(0), true};
    }
  }
  auto te = latent::train_extractor(train, ec);
  if (cfg.extractor.trained) {
    out << "extractor: trained, training accuracy " << fmt("%.4f", te.report.train_accuracy);
  } else {
    out << "extractor: untrained (seeded)";
  }
  out << ", feature dim " << te.extractor.feature_dim() << "\n";
  save_extractor(path, key, te);
  return {std::move(te.extractor), te.report.train_accuracy, false};
}

eval::OracleClassifier obtain_oracle(const Prepared& p, std::ostream& out) {
  auto oracle = eval::train_oracle(p.parts.train, p.parts.test, oracle_config(p.cfg, p.dataset));
  out << "oracle: test accuracy " << fmt("%.4f", oracle.test_accuracy()) << " (floor "
      << fmt("%.2f", oracle.floor()) << ")\n";
  oracle.require_usable();
  return oracle;
}

training::Evaluator progress_evaluator(const eval::GeneratorEvaluator& ev, std::ostream& out) {
  return [&ev, &out](const gan::Generator<float>& g, std::uint64_t iter) {
    auto point = ev(g, iter);
    out << "iter " << iter << " frechet " << opt_text(point.frechet) << " accuracy " << opt_text(point.accuracy)
        << "\n"
        << std::flush;
    return point;
  };
}

std::string border_text(const eval::BorderSummary& s) {
  std::ostringstream o;
  o << "successes=" << s.successes << "\n"
    << "failures=" << s.failures << "\n"
    << "success_margin=" << opt_text(s.success_margin, "%.17g") << "\n"
    << "failure_margin=" << opt_text(s.failure_margin, "%.17g") << "\n"
    << "degenerate=" << (s.degenerate ? "true" : "false") << "\n";
  return o.str();
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  std::vector<int> r(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) r[i] = labels.at(idx[i]);
  return r;
}

/// Final metrics plus the success-flagged embedding of the conditioning codes.
eval::MetricReport write_evaluation(const eval::GeneratorEvaluator& ev, const gan::Generator<float>& gen,
                                    const Tensor& features, const data::Dataset& train, const fs::path& report_path,
                                    const fs::path& embedding_path, const fs::path& border_path, std::ostream& out) {
  const auto report = ev.evaluate(gen, data::fingerprint(train));
  report.validate();
  write_text(report_path, report.to_text());
  out << "accuracy " << fmt("%.4f", report.accuracy) << " frechet " << fmt("%.4f", report.frechet)
      << " inception " << fmt("%.4f", report.inception) << "\n";
  if (!embedding_path.empty()) {
    const auto acc = ev.accuracy(eval::generator_sampler(gen));
    const auto codes = gather_rows(features, std::span<const std::size_t>(acc.sources));
    const auto labels = gather_labels(train.labels, acc.sources);
    const auto border = eval::border_effect_report(codes, labels, acc.success);
    latent::write_embedding_csv(embedding_path, border.embedding);
    write_text(border_path, border_text(border.summary));
    out << "border: success margin " << opt_text(border.summary.success_margin) << ", failure margin "
        << opt_text(border.summary.failure_margin) << "\n";
  }
  return report;
}

// Subcommands.

int cmd_ingest(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
  const auto ds = load_dataset(cfg.data);
  std::vector<std::size_t> counts(static_cast<std::size_t>(ds.num_classes), 0);
  for (int l : ds.labels) ++counts[static_cast<std::size_t>(l)];
  const auto [lo, hi] = std::minmax_element(ds.images.values().begin(), ds.images.values().end());
  out << "dataset " << ds.name << "\n"
      << "samples " << ds.size() << "\n"
      << "image " << lsc::to_string(ds.image_shape()) << "\n"
      << "classes " << ds.num_classes << "\n"
      << "class_counts";
  for (auto c : counts) out << " " << c;
  out << "\n"
      << "pixel_range " << *lo << " " << *hi << "\n"
      << "fingerprint " << data::fingerprint(ds) << "\n";
  if (!out_dir.empty()) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    data::write_bytes(dir / "images-idx3-ubyte.gz", data::encode_idx_images(ds.images), true);
    data::write_bytes(dir / "labels-idx1-ubyte.gz", data::encode_idx_labels(ds.labels), true);
    out << "wrote " << (dir / "images-idx3-ubyte.gz").string() << " and " << (dir / "labels-idx1-ubyte.gz").string()
        << "\n";
  }
  return kExitOk;
}

int cmd_stats(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const auto p = prepare(cfg);
  for (auto k : cfg.ks) {
    if (k >= p.dataset.size()) {
      throw UsageError("k=" + std::to_string(k) + " must be below the number of samples (" +
                       std::to_string(p.dataset.size()) + ")");
    }
  }
  const auto dir = cfg.run_dir();
  Manifest m(dir, "manifest-stats.json", cfg, "stats", p.dataset);
  return guarded(m, [&] {
    const auto ex = obtain_extractor(cfg, p.parts.train, dir / "extractor.ckpt", true, out);
    m.output(dir / "extractor.ckpt");
    const auto features = latent::extract_features(ex.extractor, p.dataset.images).features;
    const auto purity = latent::neighbor_purity(features, p.dataset.labels, cfg.ks);
    out << "neighbour purity (N=" << p.dataset.size() << ", " << p.dataset.num_classes << " classes)\n";
    json table = json::object();
    for (std::size_t i = 0; i < cfg.ks.size(); ++i) {
      out << "  k=" << cfg.ks[i] << "  " << fmt("%.2f", 100.0 * purity[i]) << "%\n";
      table[std::to_string(cfg.ks[i])] = purity[i];
    }
    m.set("purity", table);
    const fs::path csv = out_path.empty() ? dir / "stats-embedding.csv" : fs::path(out_path);
    const auto emb = latent::export_embedding(features, p.dataset.labels);
    if (!emb.warning.empty()) out << "warning: " << emb.warning << "\n";
    latent::write_embedding_csv(csv, emb);
    if (out_path.empty()) m.output(csv);
    out << "wrote " << csv.string() << "\n";
  });
}

int cmd_train_extractor(const RunConfig& cfg, std::ostream& out) {
  const auto p = prepare(cfg);
  const auto dir = cfg.run_dir();
  Manifest m(dir, "manifest-train-extractor.json", cfg, "train-extractor", p.dataset);
  return guarded(m, [&] {
    const auto ex = obtain_extractor(cfg, p.parts.train, dir / "extractor.ckpt", false, out);
    m.output(dir / "extractor.ckpt");
    m.set("extractor_train_accuracy", ex.train_accuracy);
    out << "wrote " << (dir / "extractor.ckpt").string() << "\n";
  });
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto p = prepare(cfg);
  const auto dir = cfg.run_dir();
  Manifest m(dir, "manifest.json", cfg, "train", p.dataset);
  return guarded(m, [&] {
    const auto ex = obtain_extractor(cfg, p.parts.train, dir / "extractor.ckpt", true, out);
    m.output(dir / "extractor.ckpt");
    const auto oracle = obtain_oracle(p, out);
    const auto gd = training::make_gan_data(p.parts.train.images, ex.extractor);
    const eval::GeneratorEvaluator ev(oracle, p.parts.train, gd.features, cfg.accuracy);

    training::RunOptions opts;
    opts.checkpoint_dir = dir / "checkpoints";
    opts.checkpoint_every = cfg.checkpoint_every;
    training::Evaluator evaluator;
    if (cfg.eval_during_training) evaluator = progress_evaluator(ev, out);
    out << "training " << training::to_string(cfg.train.prototype) << " for " << cfg.train.n_iter
        << " iterations\n";
    const auto state = training::train(cfg.train, gd, evaluator, opts);
    for (const auto& e : fs::directory_iterator(opts.checkpoint_dir)) m.output(e.path());

    eval::emit_curves(state.history, dir / "curves.csv");
    m.output(dir / "curves.csv");
    const auto report = write_evaluation(ev, state.gen, gd.features, p.parts.train, dir / "report.txt",
                                         dir / "embedding.csv", dir / "border.txt", out);
    for (const auto* f : {"report.txt", "embedding.csv", "border.txt"}) m.output(dir / f);
    m.set("metrics", {{"accuracy", report.accuracy}, {"frechet", report.frechet}, {"inception", report.inception}});
    m.set("updates", {{"generator", state.history.gen_updates}, {"discriminator", state.history.disc_updates}});
  });
}

int cmd_eval(const Common& common, const std::string& checkpoint, const std::string& out_path, std::ostream& out) {
  fs::path ckpt = checkpoint;
  RunConfig cfg;
  fs::path dir;
  const auto manifest = ckpt.empty() ? fs::path() : ckpt.parent_path().parent_path() / "manifest.json";
  if (common.config_path.empty() && !manifest.empty() && fs::exists(manifest)) {
    cfg = resolve(common, unwrap_manifest(read_json_file(manifest)));
    dir = manifest.parent_path();
  } else {
    cfg = resolve(common);
    dir = cfg.run_dir();
  }
  if (ckpt.empty()) ckpt = dir / "checkpoints" / "last.ckpt";
  if (!fs::exists(ckpt)) throw UsageError("checkpoint '" + ckpt.string() + "' does not exist");

  const auto state = training::load_checkpoint(ckpt);
  const auto p = prepare(cfg);
  const auto ex = obtain_extractor(cfg, p.parts.train, dir / "extractor.ckpt", true, out);
  if (ex.extractor.feature_dim() != state.gen.arch().code_dim) {
    throw std::runtime_error("checkpoint expects codes of dimension " + std::to_string(state.gen.arch().code_dim) +
                             " but the extractor produces " + std::to_string(ex.extractor.feature_dim()));
  }
  const auto oracle = obtain_oracle(p, out);
  const auto gd = training::make_gan_data(p.parts.train.images, ex.extractor);
  const eval::GeneratorEvaluator ev(oracle, p.parts.train, gd.features, cfg.accuracy);
  const fs::path report_path = out_path.empty() ? dir / "report.txt" : fs::path(out_path);
  out << "evaluating " << ckpt.string() << " (iteration " << state.iteration << ")\n";
  write_evaluation(ev, state.gen, gd.features, p.parts.train, report_path, {}, {}, out);
  out << "wrote " << report_path.string() << "\n";
  return kExitOk;
}

std::string ablation_table(const training::AblationReport& r) {
  std::ostringstream o;
  o << "# reference_frechet " << fmt("%.6g", r.reference_frechet) << "\n";
  o << "prototype converged accuracy best_frechet window_frechet gen_updates disc_updates\n";
  for (const auto& row : r.rows) {
    o << training::to_string(row.prototype) << " " << (row.verdict.converged ? "yes" : "no") << " "
      << opt_text(row.accuracy) << " " << opt_text(row.best_frechet, "%.6g") << " "
      << opt_text(row.verdict.window_frechet, "%.6g") << " " << row.history.gen_updates << " "
      << row.history.disc_updates << "\n";
  }
  for (const auto& row : r.rows) {
    if (!row.error.empty()) o << "# " << training::to_string(row.prototype) << " failed: " << row.error << "\n";
    else if (!row.verdict.reason.empty()) o << "# " << training::to_string(row.prototype) << ": " << row.verdict.reason << "\n";
  }
  return o.str();
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  const auto p = prepare(cfg);
  const auto dir = cfg.run_dir();
  Manifest m(dir, "manifest-ablate.json", cfg, "ablate", p.dataset);
  return guarded(m, [&] {
    const auto ex = obtain_extractor(cfg, p.parts.train, dir / "extractor.ckpt", true, out);
    m.output(dir / "extractor.ckpt");
    const auto oracle = obtain_oracle(p, out);
    const auto gd = training::make_gan_data(p.parts.train.images, ex.extractor);
    const eval::GeneratorEvaluator ev(oracle, p.parts.train, gd.features, cfg.accuracy);
    const auto report = training::run_ablation(cfg.train, gd, ev, [&](const training::AblationRow& row) {
      out << training::to_string(row.prototype) << ": converged " << (row.verdict.converged ? "yes" : "no")
          << ", accuracy " << opt_text(row.accuracy) << ", best frechet " << opt_text(row.best_frechet) << "\n"
          << std::flush;
      const auto csv = dir / ("curves-" + training::to_string(row.prototype) + ".csv");
      eval::emit_curves(row.history, csv);
      m.output(csv);
    });
    write_text(dir / "ablation.txt", ablation_table(report));
    m.output(dir / "ablation.txt");
    out << "wrote " << (dir / "ablation.txt").string() << "\n";
  });
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  if (cfg.noise_levels.empty()) throw UsageError("config.sweep.levels: needs at least one level");
  const auto p = prepare(cfg);
  const auto dir = cfg.run_dir();
  Manifest m(dir, "manifest-sweep.json", cfg, "sweep", p.dataset);
  return guarded(m, [&] {
    const auto oracle = obtain_oracle(p, out);
    eval::PipelineConfig pc{extractor_config(cfg, p.parts.train), cfg.train, cfg.accuracy, cfg.noise_seed};
    std::ostringstream csv;
    csv << "noise,accuracy,extractor_train_accuracy,error\n";
    auto cell = [](const std::optional<double>& v) { return v ? fmt("%.17g", *v) : std::string(); };
    const auto points = eval::robustness_sweep(cfg.noise_levels, p.parts.train, oracle, pc, [&](const eval::SweepPoint& s) {
      out << "noise " << fmt("%.2f", s.noise) << ": accuracy " << opt_text(s.accuracy) << ", extractor accuracy "
          << opt_text(s.extractor_train_accuracy) << (s.error.empty() ? "" : ", error: " + s.error) << "\n"
          << std::flush;
    });
    for (const auto& s : points) {
      std::string error = s.error;
      std::replace(error.begin(), error.end(), ',', ';');
      std::replace(error.begin(), error.end(), '\n', ' ');
      csv << fmt("%.17g", s.noise) << "," << cell(s.accuracy) << "," << cell(s.extractor_train_accuracy) << ","
          << error << "\n";
    }
    write_text(dir / "sweep.csv", csv.str());
    m.output(dir / "sweep.csv");
    out << "wrote " << (dir / "sweep.csv").string() << "\n";
  });
}

int cmd_export_embedding(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const auto p = prepare(cfg);
  const auto dir = cfg.run_dir();
  Manifest m(dir, "manifest-export-embedding.json", cfg, "export-embedding", p.dataset);
  return guarded(m, [&] {
    const auto ex = obtain_extractor(cfg, p.parts.train, dir / "extractor.ckpt", true, out);
    m.output(dir / "extractor.ckpt");
    const auto features = latent::extract_features(ex.extractor, p.dataset.images).features;
    const auto emb = latent::export_embedding(features, p.dataset.labels);
    if (!emb.warning.empty()) out << "warning: " << emb.warning << "\n";
    const fs::path csv = out_path.empty() ? dir / "latent-embedding.csv" : fs::path(out_path);
    latent::write_embedding_csv(csv, emb);
    if (out_path.empty()) m.output(csv);
    out << "explained variance " << fmt("%.6g", emb.explained_variance.at(0)) << " "
        << fmt("%.6g", emb.explained_variance.at(1)) << "\n"
        << "wrote " << csv.string() << "\n";
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-space conditioned GAN toolkit", "lsc"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  Common common;
  std::string out_path;
  std::string checkpoint;
  auto add_common = [&](CLI::App* s) {
    s->add_option("-c,--config", common.config_path, "JSON config file or run manifest");
    s->add_option("--set", common.sets, "Override a config field: key.path=value (repeatable)")->allow_extra_args(false);
    s->add_option("--name", common.name, "Run name (directory under the runs directory)");
    s->add_option("--runs-dir", common.runs_dir, "Parent directory of run directories");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate and summarize a dataset");
  add_common(ingest);
  ingest->add_option("--out", out_path, "Directory for gzipped IDX copies of the dataset");
  auto* stats = app.add_subcommand("stats", "Neighbour purity of the latent space and embedding export");
  add_common(stats);
  stats->add_option("--out", out_path, "Embedding CSV path");
  auto* train_ex = app.add_subcommand("train-extractor", "Train the feature extractor");
  add_common(train_ex);
  auto* train = app.add_subcommand("train", "Train the GAN and write checkpoints, curves and metrics");
  add_common(train);
  auto* evalc = app.add_subcommand("eval", "Score a generator checkpoint");
  add_common(evalc);
  evalc->add_option("--checkpoint", checkpoint, "Checkpoint file (default: <run>/checkpoints/last.ckpt)");
  evalc->add_option("--out", out_path, "Report path (default: <run>/report.txt)");
  auto* ablate = app.add_subcommand("ablate", "Train the baseline and prototypes A, B, C and full");
  add_common(ablate);
  auto* sweep = app.add_subcommand("sweep", "Label-noise robustness sweep");
  add_common(sweep);
  auto* export_emb = app.add_subcommand("export-embedding", "Two-dimensional projection of the latent codes");
  add_common(export_emb);
  export_emb->add_option("--out", out_path, "Embedding CSV path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (evalc->parsed()) return cmd_eval(common, checkpoint, out_path, out);
    const auto cfg = resolve(common);
    if (ingest->parsed()) return cmd_ingest(cfg, out_path, out);
    if (stats->parsed()) return cmd_stats(cfg, out_path, out);
    if (train_ex->parsed()) return cmd_train_extractor(cfg, out);
    if (train->parsed()) return cmd_train(cfg, out);
    if (ablate->parsed()) return cmd_ablate(cfg, out);
    if (sweep->parsed()) return cmd_sweep(cfg, out);
    if (export_emb->parsed()) return cmd_export_embedding(cfg, out_path, out);
    err << "error: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const training::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace lsc::cli
