#include "lsc/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "lsc/gan/losses.hpp"
#include "lsc/sampler/batch.hpp"

namespace lsc::training {

namespace {

using Var = BasicVar<float>;
constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

void check_data(const GanData& data, std::size_t batch) {
  if (data.images.rank() != 4) throw ShapeError("training: images must be [N,C,H,W], got " + lsc::to_string(data.images.shape()));
  if (data.features.rank() != 2 || data.features.dim(0) != data.images.dim(0)) {
    throw ShapeError("training: features " + lsc::to_string(data.features.shape()) + " do not match images " +
                     lsc::to_string(data.images.shape()));
  }
  if (batch > data.images.dim(0)) {
    throw std::invalid_argument("training: batch " + std::to_string(batch) + " exceeds dataset size " +
                                std::to_string(data.images.dim(0)));
  }
}

Shape image_shape(const Tensor& images) { return {images.dim(1), images.dim(2), images.dim(3)}; }

gan::Generator<float> make_generator(const TrainConfig& c, std::size_t code_dim, const Shape& image) {
  return gan::Generator<float>(c.generator_arch(code_dim, image), derive_seed(c.seed, 21));
}

gan::Discriminator<float> make_discriminator(const TrainConfig& c, const Shape& image) {
  return gan::Discriminator<float>(c.discriminator_arch(image), derive_seed(c.seed, 22));
}

double scalar(const Var& v) { return static_cast<double>(v.value()[0]); }

std::string snapshot_name(std::uint64_t iter) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "iter-%08llu.ckpt", static_cast<unsigned long long>(iter));
  return buf;
}

void generator_step(TrainState& s, const sampler::TripletBatch& b, const Tensor& z) {
  Tape<float> tape;
  tape.bind_constants(s.disc.params());
  auto fake = s.gen.forward(tape, tape.constant(z), tape.constant(b.codes));
  auto p = s.disc.arch().coupled ? s.disc.forward(tape, tape.constant(b.anchors), fake) : s.disc.forward(tape, fake);
  auto loss = gan::loss_generator(p);
  tape.backward(loss);
  adam_step(s.gen.params(), tape.param_grads(s.gen.params()), s.gen_opt);
  s.gen.params().check_finite("generator parameter");
  s.last_gen = scalar(loss);
  ++s.history.gen_updates;
}

void discriminator_step(TrainState& s, const sampler::TripletBatch& b, const Tensor& z) {
  const std::size_t n = b.size();
  const Tensor fake = s.gen.generate(z, b.codes);
  Tape<float> tape;
  Var objective;
  if (!s.disc.arch().coupled) {
    const std::vector<Tensor> rows{b.anchors, fake};
    auto p = s.disc.forward(tape, tape.constant(concat_rows<float>(rows)), std::nullopt, SpectralMode::update);
    auto real = ops::slice_rows(p, 0, n), fk = ops::slice_rows(p, n, 2 * n);
    objective = gan::loss_minimax(real, fk).disc;
    s.last_adv = scalar(gan::loss_adv(fk));
  } else {
    const std::vector<Tensor> first{b.anchors, b.anchors, b.anchors};
    const std::vector<Tensor> second{fake, b.positives, b.negatives};
    auto p = s.disc.forward(tape, tape.constant(concat_rows<float>(first)), tape.constant(concat_rows<float>(second)),
                            SpectralMode::update);
    gan::CoupledTerms<float> terms{gan::loss_adv(ops::slice_rows(p, 0, n)),
                                   gan::loss_same(ops::slice_rows(p, n, 2 * n)),
                                   gan::loss_diff(ops::slice_rows(p, 2 * n, 3 * n))};
    objective = gan::loss_discriminator(s.config.effective_weights(), terms);
    s.last_adv = scalar(*terms.adv);
    s.last_same = scalar(*terms.same);
    s.last_diff = scalar(*terms.diff);
  }
  // D ascends its objective.
  tape.backward(ops::scale_shift(objective, -1.0f, 0.0f));
  adam_step(s.disc.params(), tape.param_grads(s.disc.params()), s.disc_opt);
  s.disc.params().check_finite("discriminator parameter");
  ++s.history.disc_updates;
}

template <typename V>
void put_store(Archive& a, const std::string& prefix, const ParamStore<V>& store) {
  for (const auto& [name, t] : store) a.put(prefix + name, t);
}

void load_store(const Archive& a, const std::string& prefix, ParamStore<float>& store, bool create) {
  for (const auto& [key, entry] : a.entries()) {
    if (key.rfind(prefix, 0) != 0) continue;
    const auto name = key.substr(prefix.size());
    const auto& t = a.tensor(key);
    if (create) {
      store.add(name, t);
      continue;
    }
    if (!store.contains(name)) throw CheckpointError("checkpoint: unknown parameter '" + name + "'");
    if (store.at(name).shape() != t.shape()) {
      throw CheckpointError("checkpoint: parameter '" + name + "' has shape " + lsc::to_string(t.shape()) +
                            ", model expects " + lsc::to_string(store.at(name).shape()));
    }
    store.at(name) = t;
  }
}

void put_adam(Archive& a, const std::string& prefix, const AdamState<float>& st) {
  a.put(prefix + "step", st.step);
  put_store(a, prefix + "m/", st.m);
  put_store(a, prefix + "v/", st.v);
}

void load_adam(const Archive& a, const std::string& prefix, AdamState<float>& st) {
  st.step = a.u64(prefix + "step");
  st.m = {};
  st.v = {};
  load_store(a, prefix + "m/", st.m, true);
  load_store(a, prefix + "v/", st.v, true);
}

double opt(const std::optional<double>& v) { return v ? *v : kAbsent; }
std::optional<double> opt(double v) { return std::isnan(v) ? std::nullopt : std::optional<double>(v); }

}  // namespace

GanData make_gan_data(const Tensor& images, const latent::FeatureExtractor& extractor) {
  return {images, latent::extract_features(extractor, images).features};
}

TrainState init_training(const TrainConfig& config, const GanData& data) {
  config.validate();
  check_data(data, config.batch);
  const auto image = image_shape(data.images);
  TrainState s{.config = config,
               .gen = make_generator(config, data.features.dim(1), image),
               .disc = make_discriminator(config, image),
               .gen_opt = {},
               .disc_opt = {},
               .rng = Rng(derive_seed(config.seed, 23)),
               .iteration = 0,
               .history = {},
               .last_adv = {},
               .last_same = {},
               .last_diff = {},
               .last_gen = {}};
  s.gen_opt.config = config.gen_adam;
  s.disc_opt.config = config.disc_adam;
  return s;
}

void run_training(TrainState& s, const GanData& data, const Evaluator& evaluator, const RunOptions& options) {
  const auto& c = s.config;
  check_data(data, c.batch);
  if (data.features.dim(1) != s.gen.arch().code_dim || image_shape(data.images) != s.gen.arch().image) {
    throw ShapeError("training: data does not match the models of this state");
  }
  const std::uint64_t stop = options.stop_at == 0 ? c.n_iter : std::min<std::uint64_t>(options.stop_at, c.n_iter);
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);
  const auto started = std::chrono::steady_clock::now();

  while (s.iteration < stop) {
    const std::uint64_t i = s.iteration;
    try {
      const auto batch = sampler::build_batch_from_features(data.images, data.features, c.batch, s.rng, c.neighborhood);
      Tensor z({c.batch, c.noise_dim});
      for (auto& v : z.values()) v = static_cast<float>(s.rng.normal());
      const bool on_n = i % c.n == 0;
      if (!c.swap_schedule || on_n) generator_step(s, batch, z);
      if (c.swap_schedule || on_n) discriminator_step(s, batch, z);
    } catch (const NonFiniteError& e) {
      s.history.losses_finite = false;
      std::filesystem::path diag = options.diagnostic_path;
      if (diag.empty() && !options.checkpoint_dir.empty()) diag = options.checkpoint_dir / "diagnostic.ckpt";
      if (!diag.empty()) save_checkpoint(s, diag);
      throw TrainingAborted(i, e.what(), diag);
    }
    s.iteration = i + 1;

    if (s.iteration % c.eval_every == 0 || s.iteration == c.n_iter) {
      Snapshot snap;
      snap.iter = s.iteration;
      snap.loss_adv = s.last_adv;
      snap.loss_same = s.last_same;
      snap.loss_diff = s.last_diff;
      snap.loss_gen = s.last_gen;
      if (evaluator) {
        const auto m = evaluator(s.gen, s.iteration);
        snap.frechet = m.frechet;
        snap.accuracy = m.accuracy;
      }
      snap.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      s.history.append(snap);
    }
    if (!options.checkpoint_dir.empty() && options.checkpoint_every > 0 && s.iteration % options.checkpoint_every == 0) {
      save_checkpoint(s, options.checkpoint_dir / snapshot_name(s.iteration));
    }
  }
  if (!options.checkpoint_dir.empty()) save_checkpoint(s, options.checkpoint_dir / "last.ckpt");
}

TrainState train(const TrainConfig& config, const GanData& data, const Evaluator& evaluator,
                 const RunOptions& options) {
  auto s = init_training(config, data);
  run_training(s, data, evaluator, options);
  return s;
}

Archive to_archive(const TrainState& s) {
  Archive a;
  a.put("config", to_json(s.config).dump());
  a.put("meta/code_dim", static_cast<std::uint64_t>(s.gen.arch().code_dim));
  const auto& img = s.gen.arch().image;
  a.put("meta/image", std::vector<double>(img.begin(), img.end()));
  put_store(a, "gen/param/", s.gen.params());
  put_adam(a, "gen/adam/", s.gen_opt);
  put_store(a, "disc/param/", s.disc.params());
  put_adam(a, "disc/adam/", s.disc_opt);
  for (const auto& [name, u] : s.disc.spectral()) a.put("disc/spectral/" + name, Tensor({u.size()}, u));
  a.put("rng", s.rng.state());
  a.put("iteration", s.iteration);
  a.put("last_losses", std::vector<double>{opt(s.last_adv), opt(s.last_same), opt(s.last_diff), opt(s.last_gen)});

  const auto& h = s.history;
  a.put("history/gen_updates", h.gen_updates);
  a.put("history/disc_updates", h.disc_updates);
  a.put("history/losses_finite", static_cast<std::uint64_t>(h.losses_finite));
  std::vector<double> iter, adv, same, diff, gen, fd, acc;
  for (const auto& r : h.records()) {
    iter.push_back(static_cast<double>(r.iter));
    adv.push_back(opt(r.loss_adv));
    same.push_back(opt(r.loss_same));
    diff.push_back(opt(r.loss_diff));
    gen.push_back(opt(r.loss_gen));
    fd.push_back(opt(r.frechet));
    acc.push_back(opt(r.accuracy));
  }
  a.put("history/iter", iter);
  a.put("history/loss_adv", adv);
  a.put("history/loss_same", same);
  a.put("history/loss_diff", diff);
  a.put("history/loss_gen", gen);
  a.put("history/frechet", fd);
  a.put("history/accuracy", acc);
  return a;
}

TrainState from_archive(const Archive& a) {
  TrainConfig config;
  try {
    config = train_config_from_json(nlohmann::json::parse(a.str("config")));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed config: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint: invalid config: ") + e.what());
  }
  const auto& dims = a.f64s("meta/image");
  Shape image;
  for (double d : dims) image.push_back(static_cast<std::size_t>(d));
  const auto code_dim = static_cast<std::size_t>(a.u64("meta/code_dim"));

  TrainState s{.config = config,
               .gen = make_generator(config, code_dim, image),
               .disc = make_discriminator(config, image),
               .gen_opt = {},
               .disc_opt = {},
               .rng = Rng(0),
               .iteration = a.u64("iteration"),
               .history = {},
               .last_adv = {},
               .last_same = {},
               .last_diff = {},
               .last_gen = {}};
  s.gen_opt.config = config.gen_adam;
  s.disc_opt.config = config.disc_adam;
  load_store(a, "gen/param/", s.gen.params(), false);
  load_store(a, "disc/param/", s.disc.params(), false);
  load_adam(a, "gen/adam/", s.gen_opt);
  load_adam(a, "disc/adam/", s.disc_opt);
  s.disc.spectral().clear();
  const std::string sp = "disc/spectral/";
  for (const auto& [key, entry] : a.entries()) {
    if (key.rfind(sp, 0) != 0) continue;
    const auto& t = a.tensor(key);
    s.disc.spectral()[key.substr(sp.size())] = std::vector<float>(t.values().begin(), t.values().end());
  }
  s.rng.restore(a.str("rng"));
  const auto& last = a.f64s("last_losses");
  if (last.size() != 4) throw CheckpointError("checkpoint: last_losses must hold 4 values");
  s.last_adv = opt(last[0]);
  s.last_same = opt(last[1]);
  s.last_diff = opt(last[2]);
  s.last_gen = opt(last[3]);

  auto& h = s.history;
  h.gen_updates = a.u64("history/gen_updates");
  h.disc_updates = a.u64("history/disc_updates");
  h.losses_finite = a.u64("history/losses_finite") != 0;
  const auto& iter = a.f64s("history/iter");
  const auto& adv = a.f64s("history/loss_adv");
  const auto& same = a.f64s("history/loss_same");
  const auto& diff = a.f64s("history/loss_diff");
  const auto& gen = a.f64s("history/loss_gen");
  const auto& fd = a.f64s("history/frechet");
  const auto& acc = a.f64s("history/accuracy");
  for (const auto* col : {&adv, &same, &diff, &gen, &fd, &acc}) {
    if (col->size() != iter.size()) throw CheckpointError("checkpoint: history columns differ in length");
  }
  for (std::size_t r = 0; r < iter.size(); ++r) {
    h.append({.iter = static_cast<std::uint64_t>(iter[r]),
              .loss_adv = opt(adv[r]),
              .loss_same = opt(same[r]),
              .loss_diff = opt(diff[r]),
              .loss_gen = opt(gen[r]),
              .frechet = opt(fd[r]),
              .accuracy = opt(acc[r])});
  }
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) { to_archive(state).save(path); }

TrainState load_checkpoint(const std::filesystem::path& path) { return from_archive(Archive::load(path)); }

const AblationRow& AblationReport::row(Prototype p) const {
  for (const auto& r : rows) {
    if (r.prototype == p) return r;
  }
  throw std::out_of_range("ablation report: no row for prototype " + to_string(p));
}

AblationReport run_ablation(const TrainConfig& base, const GanData& data, const Evaluator& evaluator,
                            const std::function<void(const AblationRow&)>& on_row) {
  AblationReport report;
  for (auto p : {Prototype::baseline, Prototype::A, Prototype::B, Prototype::C, Prototype::full}) {
    AblationRow row;
    row.prototype = p;
    TrainConfig c = base;
    c.prototype = p;
    try {
      auto s = init_training(c, data);
      try {
        run_training(s, data, evaluator);
      } catch (...) {
        row.history = s.history;
        throw;
      }
      row.history = s.history;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.accuracy = final_accuracy(row.history);
    row.best_frechet = best_frechet(row.history);
    // The baseline runs first and fixes the reference for every row.
    if (p == Prototype::baseline) report.reference_frechet = row.best_frechet ? *row.best_frechet : kAbsent;
    row.verdict = judge_convergence(row.history, report.reference_frechet);
    if (!row.error.empty()) {
      row.verdict.converged = false;
      row.verdict.reason = "run failed: " + row.error;
    }
    if (on_row) on_row(row);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace lsc::training
