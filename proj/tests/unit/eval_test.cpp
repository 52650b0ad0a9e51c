#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "lsc/eval/metrics.hpp"
#include "lsc/eval/oracle.hpp"
#include "lsc/eval/studies.hpp"

using namespace lsc;
using namespace lsc::eval;
using linalg::Matrix;
namespace fs = std::filesystem;

namespace {

Matrix random_spd(std::size_t d, Rng& rng, double ridge = 0.1) {
  Matrix a(d, d);
  for (auto& v : a.data) v = rng.uniform(-1, 1);
  auto s = linalg::matmul(a, linalg::transpose(a));
  for (std::size_t i = 0; i < d; ++i) s(i, i) += ridge;
  return s;
}

std::vector<double> random_vec(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.uniform(-2, 2);
  return v;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) e(r, c) = m(r, c);
  return e;
}

// Independent oracle: eigenvalues of the non-symmetric product Σ1Σ2.
double oracle_frechet(const std::vector<double>& m1, const Matrix& s1, const std::vector<double>& m2, const Matrix& s2) {
  const auto a = to_eigen(s1), b = to_eigen(s2);
  Eigen::EigenSolver<Eigen::MatrixXd> es(a * b);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  double mean = 0.0;
  for (std::size_t i = 0; i < m1.size(); ++i) mean += (m1[i] - m2[i]) * (m1[i] - m2[i]);
  return mean + a.trace() + b.trace() - 2.0 * tr_sqrt;
}

Matrix random_probs(std::size_t n, std::size_t c, Rng& rng) {
  Matrix p(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (p(i, j) = rng.uniform(0.01, 1.0));
    for (std::size_t j = 0; j < c; ++j) p(i, j) /= s;
  }
  return p;
}

struct Fixture {
  data::Dataset train, test;
  OracleClassifier oracle;
};

const Fixture& fixture(int classes) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(classes);
  if (it != cache.end()) return it->second;
  const auto d = data::make_synthetic({.num_classes = classes, .per_class = 60, .image_side = 8, .seed = 9});
  auto sp = data::split(d, 3);
  OracleConfig oc;
  oc.arch.num_classes = classes;
  auto oracle = train_oracle(sp.train, sp.test, oc);
  return cache.emplace(classes, Fixture{sp.train, sp.test, std::move(oracle)}).first->second;
}

const ConditionalSampler pass_through = [](const Tensor&, const Tensor& sources, Rng&) { return sources; };

}  // namespace

TEST_CASE("Fréchet distance closed forms") {
  Rng rng(1);
  for (std::size_t d : {1u, 3u, 6u}) {
    const auto s = random_spd(d, rng);
    const auto m = random_vec(d, rng);
    CHECK(frechet_distance(m, s, m, s) <= 1e-8);
  }
  Matrix one(1, 1, 1.0);
  CHECK(frechet_distance({0.0}, one, {2.0}, one) == 4.0);
  CHECK(frechet_distance({0.0}, one, {0.0}, Matrix(1, 1, 4.0)) == doctest::Approx(1.0).epsilon(1e-14));
  // Zero covariances: only the mean term remains.
  CHECK(frechet_distance({1.0, 2.0}, Matrix(2, 2), {4.0, 6.0}, Matrix(2, 2)) == doctest::Approx(25.0));
}

TEST_CASE("Fréchet distance matches an eigen oracle and is a symmetric non-negative divergence") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial) % 5;
    const auto s1 = random_spd(d, rng), s2 = random_spd(d, rng);
    const auto m1 = random_vec(d, rng), m2 = random_vec(d, rng);
    const double ab = frechet_distance(m1, s1, m2, s2);
    const double ba = frechet_distance(m2, s2, m1, s1);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
    CHECK(std::abs(ab - oracle_frechet(m1, s1, m2, s2)) <= 1e-6 * std::max(1.0, ab));
  }
}

TEST_CASE("matrix square root matches an eigen oracle on 4D SPD matrices") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_spd(4, rng);
    const auto root = linalg::psd_sqrt(s).root;
    const Eigen::MatrixXd expected = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(to_eigen(s)).operatorSqrt();
    CHECK((to_eigen(root) - expected).cwiseAbs().maxCoeff() <= 1e-6);
    const auto s2 = random_spd(4, rng);
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(s) * to_eigen(s2));
    double tr = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) tr += std::sqrt(es.eigenvalues()(i).real());
    CHECK(trace_sqrt_product(s, s2) == doctest::Approx(tr).epsilon(1e-9));
  }
}

TEST_CASE("Fréchet input validation and Gaussian fit") {
  Matrix s(2, 2, 0.0);
  s(0, 0) = s(1, 1) = 1.0;
  Matrix asym = s;
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(frechet_distance({0, 0}, s, {0}, Matrix(1, 1, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(frechet_distance({0, 0}, asym, {0, 0}, s), std::invalid_argument);
  CHECK_THROWS_AS(frechet_distance({0, 0, 0}, s, {0, 0, 0}, s), std::invalid_argument);

  Tensor x({4, 2}, {1, 0, 3, 0, 1, 2, 3, 2});
  const auto g = fit_gaussian(x);
  CHECK(g.mean == std::vector<double>{2.0, 1.0});
  CHECK(g.cov(0, 0) == doctest::Approx(4.0 / 3.0));
  CHECK(g.cov(1, 1) == doctest::Approx(4.0 / 3.0));
  CHECK(g.cov(0, 1) == doctest::Approx(0.0));
  CHECK_THROWS(fit_gaussian(Tensor({1, 2})));
}

TEST_CASE("Inception Score analytics") {
  for (std::size_t c : {2u, 4u, 10u}) {
    CHECK(std::abs(inception_score(Matrix(7, c, 1.0 / static_cast<double>(c))) - 1.0) <= 1e-10);
    Matrix onehot(c, c);
    for (std::size_t i = 0; i < c; ++i) onehot(i, i) = 1.0;
    CHECK(std::abs(inception_score(onehot) - static_cast<double>(c)) <= 1e-10);
  }

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial), c = 3 + static_cast<std::size_t>(trial) % 4;
    const auto p = random_probs(n, c, rng);
    // Brute force: explicit marginal then explicit KL per row.
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        double marg = 0.0;
        for (std::size_t k = 0; k < n; ++k) marg += p(k, j);
        marg /= static_cast<double>(n);
        kl += p(i, j) * std::log(p(i, j) / marg);
      }
    }
    const double is = inception_score(p);
    CHECK(std::abs(is - std::exp(kl / static_cast<double>(n))) <= 1e-10);
    CHECK(is >= 1.0);
    CHECK(is <= static_cast<double>(c));
    // Row permutation invariance.
    Matrix q = p;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) q(i, j) = p(n - 1 - i, j);
    CHECK(inception_score(q) == doctest::Approx(is).epsilon(1e-12));
  }

  // Sharpening toward distinct one-hots with a fixed uniform marginal.
  const std::size_t c = 5;
  double last = 0.0;
  for (double t : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    Matrix p(c, c);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) p(i, j) = (1 - t) / static_cast<double>(c) + (i == j ? t : 0.0);
    const double is = inception_score(p);
    CHECK(is > last);
    last = is;
  }

  Matrix bad(2, 2, 0.5);
  bad(1, 1) = 0.6;
  CHECK_THROWS_AS(inception_score(bad), std::invalid_argument);
  bad(1, 0) = -0.1;
  bad(1, 1) = 1.1;
  CHECK_THROWS_AS(inception_score(bad), std::invalid_argument);
}

TEST_CASE("Spearman rank correlation") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 1, 0, -7}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-12));
  CHECK(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
  CHECK_THROWS(spearman({1, 2}, {1}));
  CHECK_THROWS(spearman({1}, {1}));
}

TEST_CASE("oracle floor gates every metric") {
  const auto& f = fixture(4);
  CHECK(f.oracle.test_accuracy() >= 0.95);
  CHECK(f.oracle.usable());
  CHECK_NOTHROW(f.oracle.require_usable());

  OracleClassifier weak(f.oracle.model(), 0.5, 0.95);
  CHECK_FALSE(weak.usable());
  CHECK_THROWS_AS(weak.require_usable(), OracleBelowFloor);
  const auto feats = Tensor({f.train.size(), 3});
  CHECK_THROWS_AS(conditional_accuracy(pass_through, feats, weak, f.train), OracleBelowFloor);
  CHECK_THROWS_AS(GeneratorEvaluator(weak, f.train, feats), OracleBelowFloor);
}

TEST_CASE("source sampling uses every image before repeating") {
  Rng rng(5);
  const auto s = sample_sources(10, 25, rng);
  CHECK(s.size() == 25);
  CHECK(std::set<std::size_t>(s.begin(), s.begin() + 10).size() == 10);
  CHECK(std::set<std::size_t>(s.begin() + 10, s.begin() + 20).size() == 10);
  Rng again(5);
  CHECK(sample_sources(10, 25, again) == s);
}

TEST_CASE("conditional accuracy: pass-through upper bound and random floor") {
  const auto& f = fixture(4);
  const Tensor feats({f.test.size(), 2});
  const auto r = conditional_accuracy(pass_through, feats, f.oracle, f.test, {.num_samples = 500, .seed = 2});
  CHECK(r.size() == 500);
  // Pass-through accuracy is exactly the oracle's accuracy on the drawn sources.
  const auto pred = f.oracle.predict(gather_rows(f.test.images, r.sources));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < r.size(); ++i) hits += pred[i] == f.test.labels[r.sources[i]];
  CHECK(r.accuracy == static_cast<double>(hits) / 500.0);
  CHECK(r.accuracy >= 0.95);
  CHECK(r.accuracy == doctest::Approx(f.oracle.test_accuracy()).epsilon(0.03));
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.success[i] == (r.predicted[i] == f.test.labels[r.sources[i]]));

  const auto& ten = fixture(10);
  latent::ExtractorConfig ec;
  ec.arch.num_classes = 10;
  const auto extractor = latent::make_extractor(ec);
  gan::Generator<float> g({.noise_dim = 8, .code_dim = extractor.feature_dim(), .hidden = {32}, .image = {1, 8, 8}}, 3);
  const auto u = conditional_accuracy(generator_sampler(g), extractor, ten.oracle, ten.train, {.num_samples = 2048});
  CHECK(u.accuracy == doctest::Approx(0.10).epsilon(0.5));  // 10% +- 5
  CHECK(std::abs(u.accuracy - 0.10) <= 0.05);

  const auto a = conditional_accuracy(generator_sampler(g), extractor, ten.oracle, ten.train, {.num_samples = 300, .seed = 8});
  const auto b = conditional_accuracy(generator_sampler(g), extractor, ten.oracle, ten.train, {.num_samples = 300, .seed = 8});
  CHECK(a.generated == b.generated);
}

TEST_CASE("generator evaluator and metric report") {
  const auto& f = fixture(4);
  latent::ExtractorConfig ec;
  ec.arch.num_classes = 4;
  const auto features = latent::extract_features(latent::make_extractor(ec), f.train.images).features;
  GeneratorEvaluator ev(f.oracle, f.train, features, {.num_samples = 400});
  const auto real = ev.evaluate(pass_through, "abc");
  CHECK(real.accuracy >= 0.95);
  CHECK(real.frechet < 0.05 * linalg::trace(ev.real_statistics().cov) + 1e-6);
  CHECK(real.inception >= 1.0);
  CHECK(real.inception <= 4.0);
  CHECK(real.samples == 400);
  CHECK_NOTHROW(real.validate());

  const auto parsed = MetricReport::parse(real.to_text());
  CHECK(parsed.accuracy == real.accuracy);
  CHECK(parsed.frechet == real.frechet);
  CHECK(parsed.inception == real.inception);
  CHECK(parsed.samples == real.samples);
  CHECK(parsed.num_classes == 4);
  CHECK(parsed.fingerprint == "abc");

  MetricReport bad = real;
  bad.accuracy = 1.5;
  CHECK_THROWS(bad.validate());
  bad = real;
  bad.inception = 0.5;
  CHECK_THROWS(bad.validate());
  bad = real;
  bad.frechet = -1.0;
  CHECK_THROWS(bad.validate());
  CHECK_THROWS(MetricReport::parse("accuracy=1\n"));

  gan::Generator<float> g({.noise_dim = 4, .code_dim = features.dim(1), .hidden = {16}, .image = {1, 8, 8}}, 1);
  const auto point = ev(g, 10);
  const auto direct = ev.evaluate(g);
  CHECK(point.accuracy == direct.accuracy);
  CHECK(point.frechet == direct.frechet);
  CHECK(direct.frechet > real.frechet);
}

TEST_CASE("border effect report") {
  // Two clusters on a line; failures planted at the midpoint.
  std::vector<float> xs;
  std::vector<int> labels;
  std::vector<bool> ok;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(static_cast<float>(i) * 0.1f);
    labels.push_back(0);
    ok.push_back(true);
    xs.push_back(10.0f + static_cast<float>(i) * 0.1f);
    labels.push_back(1);
    ok.push_back(true);
  }
  for (float x : {4.8f, 4.9f, 5.1f, 5.2f}) {
    xs.push_back(x);
    labels.push_back(x < 5.0f ? 0 : 1);
    ok.push_back(false);
  }
  Tensor features({xs.size(), 2});
  for (std::size_t i = 0; i < xs.size(); ++i) features[2 * i] = xs[i];
  const auto r = border_effect_report(features, labels, ok);
  CHECK(r.embedding.rows.size() == xs.size());
  CHECK(r.margins.size() == xs.size());
  CHECK(r.summary.failures == 4);
  CHECK(r.summary.successes == 20);
  REQUIRE(r.summary.failure_margin.has_value());
  REQUIRE(r.summary.success_margin.has_value());
  CHECK(*r.summary.failure_margin < *r.summary.success_margin);
  CHECK_FALSE(r.summary.degenerate);
  CHECK(r.embedding.rows[20].flag == std::optional<bool>(false));

  const auto all = border_effect_report(features, labels, std::vector<bool>(xs.size(), true));
  CHECK(all.summary.degenerate);
  CHECK_FALSE(all.summary.failure_margin.has_value());
  CHECK(all.embedding.rows.size() == xs.size());
  CHECK_THROWS(border_effect_report(features, labels, std::vector<bool>(3, true)));
}

TEST_CASE("curve export round trip") {
  const auto dir = fs::temp_directory_path() / "lsc_eval_curves";
  fs::create_directories(dir);
  training::RunHistory empty;
  emit_curves(empty, dir / "empty.csv");
  std::ifstream in(dir / "empty.csv");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "iter,loss_adv,loss_same,loss_diff,loss_gen,frechet,accuracy\n");

  training::RunHistory h;
  h.append({.iter = 10, .loss_adv = -0.5, .loss_same = 1.0 / 3.0, .loss_diff = -1e-300, .loss_gen = 0.7, .frechet = 12.25, .accuracy = 0.1});
  h.append({.iter = 20, .loss_adv = -0.25, .loss_gen = 2.0 / 7.0});
  h.append({.iter = 35, .loss_adv = -0.125, .loss_same = 0.0, .loss_diff = -0.0, .loss_gen = 1e10, .frechet = 0.0, .accuracy = 1.0});
  emit_curves(h, dir / "h.csv");
  const auto text = curves_csv(h);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  const auto back = read_curves(dir / "h.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.records()[i] == h.records()[i]);
  CHECK(curves_csv(back) == text);

  CHECK_THROWS(emit_curves(h, dir / "no" / "such" / "dir.csv"));
  CHECK_THROWS(parse_curves("bad header\n"));
  CHECK_THROWS(parse_curves("iter,loss_adv,loss_same,loss_diff,loss_gen,frechet,accuracy\n1,x,,,,,\n"));
  CHECK_THROWS(parse_curves("iter,loss_adv,loss_same,loss_diff,loss_gen,frechet,accuracy\n2,,,,,,\n1,,,,,,\n"));
  fs::remove_all(dir);
}

TEST_CASE("robustness sweep contract") {
  const auto& f = fixture(4);
  PipelineConfig pc;
  pc.extractor.arch.num_classes = 4;
  pc.extractor.train.epochs = 1;
  pc.train.n_iter = 3;
  pc.train.batch = 8;
  pc.train.gen_hidden = {16};
  pc.accuracy.num_samples = 64;
  std::vector<double> seen;
  const auto curve = robustness_sweep({0.0, 0.5, 1.0}, f.train, f.oracle, pc,
                                      [&](const SweepPoint& p) { seen.push_back(p.noise); });
  REQUIRE(curve.size() == 3);
  CHECK(seen == std::vector<double>{0.0, 0.5, 1.0});
  for (const auto& p : curve) {
    CHECK(p.error.empty());
    CHECK(p.accuracy.has_value());
  }
  // p = 0 is the plain pipeline.
  const auto ex = latent::train_extractor(f.train, pc.extractor);
  const auto gd = training::make_gan_data(f.train.images, ex.extractor);
  const auto st = training::train(pc.train, gd);
  CHECK(curve[0].accuracy == conditional_accuracy(generator_sampler(st.gen), gd.features, f.oracle, f.train, pc.accuracy).accuracy);

  CHECK_THROWS(robustness_sweep({0.5, 0.2}, f.train, f.oracle, pc));
  CHECK_THROWS(robustness_sweep({0.0, 1.5}, f.train, f.oracle, pc));
  auto failing = pc;
  failing.extractor.min_accuracy = 1.1;
  const auto failed = robustness_sweep({0.0, 1.0}, f.train, f.oracle, failing);
  REQUIRE(failed.size() == 2);
  for (const auto& p : failed) {
    CHECK_FALSE(p.error.empty());
    CHECK_FALSE(p.accuracy.has_value());
  }
}
