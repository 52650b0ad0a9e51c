#include <cmath>

#include "../support/gradcheck.hpp"
#include "doctest.h"
#include "lsc/gan/losses.hpp"
#include "lsc/gan/models.hpp"

using namespace lsc;
using namespace lsc::gan;
using lsc::testing::check_gradients;
using lsc::testing::adaptive;
using lsc::testing::check_param_gradients;
using lsc::testing::DTape;
using lsc::testing::DTensor;
using lsc::testing::DVar;

namespace {

constexpr double kLogHalf = -0.69314718055994530942;

DTensor uniform(Shape s, Rng& rng, double lo = 0.0, double hi = 1.0) {
  DTensor t(std::move(s));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

DiscriminatorArch small_disc(bool coupled, bool sn) {
  return {.image = {1, 4, 4}, .conv1 = 3, .conv2 = 4, .hidden = 5, .coupled = coupled, .spectral_norm = sn};
}

GeneratorArch small_gen() { return {.noise_dim = 3, .code_dim = 2, .hidden = {6}, .image = {1, 4, 4}}; }

void require_match(const lsc::testing::GradCheck& r) {
  INFO(r.worst);
  CHECK(r.smooth);
  CHECK(r.failures == 0);
}

}  // namespace

TEST_CASE("generator contracts") {
  Generator<float> g({.noise_dim = 4, .code_dim = 3, .hidden = {8, 8}, .image = {1, 8, 8}}, 1);
  Rng rng(2);
  for (std::size_t b : {1u, 5u}) {
    Tensor z({b, 4}), f({b, 3});
    for (auto& v : z.values()) v = static_cast<float>(rng.normal());
    const auto out = g.generate(z, f);
    CHECK(out.shape() == Shape{b, 1, 8, 8});
    for (auto v : out.values()) CHECK((v > 0.0f && v < 1.0f));
  }
  Tensor z({2, 4}, 0.3f), f({2, 3}, -0.2f);
  const auto out = g.generate(z, f);
  for (std::size_t i = 0; i < 64; ++i) CHECK(out[i] == out[64 + i]);
  CHECK_THROWS_AS(g.generate(Tensor({2, 5}), f), ShapeError);
  CHECK_THROWS_AS(g.generate(z, Tensor({3, 3})), ShapeError);
}

TEST_CASE("discriminator contracts") {
  Discriminator<float> d({.image = {1, 8, 8}}, 3);
  Rng rng(4);
  Tensor a({6, 1, 8, 8}), b({6, 1, 8, 8});
  for (auto& v : a.values()) v = static_cast<float>(rng.uniform());
  for (auto& v : b.values()) v = static_cast<float>(rng.uniform());
  for (auto p : d.discriminate(a, b)) CHECK((p > 0.0f && p < 1.0f));
  // Order of the pair matters.
  CHECK(d.discriminate(a, b) != d.discriminate(b, a));
  CHECK_THROWS(d.discriminate(a));
  CHECK_THROWS_AS(d.discriminate(a, Tensor({6, 1, 4, 4})), ShapeError);
  d.zero_final_layer();
  for (auto p : d.discriminate(a, b)) CHECK(p == 0.5f);

  Discriminator<float> single({.image = {1, 8, 8}, .coupled = false}, 3);
  CHECK(single.discriminate(a).size() == 6);
  CHECK_THROWS(single.discriminate(a, b));
}

TEST_CASE("loss values at reference points") {
  DTape tape;
  auto half = tape.constant(DTensor({4}, 0.5));
  CHECK(loss_adv(half).value()[0] == doctest::Approx(kLogHalf).epsilon(1e-12));
  CHECK(loss_same(half).value()[0] == doctest::Approx(kLogHalf).epsilon(1e-12));
  CHECK(loss_diff(half).value()[0] == doctest::Approx(kLogHalf).epsilon(1e-12));
  CHECK(loss_generator(half).value()[0] == doctest::Approx(-kLogHalf).epsilon(1e-12));
  const auto mm = loss_minimax(half, half);
  CHECK(mm.disc.value()[0] == doctest::Approx(2 * kLogHalf).epsilon(1e-12));
  CHECK(mm.gen.value()[0] == doctest::Approx(-kLogHalf).epsilon(1e-12));

  auto zero = tape.constant(DTensor({4}, 0.0));
  auto one = tape.constant(DTensor({4}, 1.0));
  CHECK(std::abs(loss_adv(zero).value()[0]) < 1e-6);
  CHECK(std::abs(loss_diff(zero).value()[0]) < 1e-6);
  CHECK(std::abs(loss_same(one).value()[0]) < 1e-6);
  CHECK(std::abs(loss_generator(one).value()[0]) < 1e-6);
  CHECK(std::abs(loss_minimax(one, zero).disc.value()[0]) < 1e-6);
  // Clamp keeps saturated inputs finite.
  CHECK(loss_same(zero).value()[0] == doctest::Approx(std::log(1e-7)));

  // Every term is non-positive.
  Rng rng(6);
  auto p = tape.constant(uniform({16}, rng));
  CHECK(loss_adv(p).value()[0] <= 0.0);
  CHECK(loss_same(p).value()[0] <= 0.0);
  CHECK(loss_minimax(p, p).disc.value()[0] <= 0.0);
}

TEST_CASE("weighted discriminator objective") {
  DTape tape;
  auto half = tape.constant(DTensor({3}, 0.5));
  CoupledTerms<double> t{loss_adv(half), loss_same(half), loss_diff(half)};
  CHECK(loss_discriminator(LossWeights{}, t).value()[0] == doctest::Approx(3 * kLogHalf).epsilon(1e-12));
  CHECK(loss_discriminator(LossWeights{}, t).value()[0] == doctest::Approx(-2.0794).epsilon(1e-4));

  LossWeights a_only{.adv = 1.5, .same = 0, .diff = 0};
  CHECK(loss_discriminator(a_only, t).value()[0] == doctest::Approx(1.5 * t.adv->value()[0]));
  CHECK_THROWS(loss_discriminator(LossWeights{.adv = 0, .same = 0, .diff = 0}, t));
  CHECK_THROWS(loss_discriminator(LossWeights{.use_adv = false, .use_same = false, .use_diff = false}, t));
  CHECK_THROWS(loss_discriminator(LossWeights{.adv = -1}, t));
  CHECK_THROWS(loss_discriminator(LossWeights{}, CoupledTerms<double>{t.adv, std::nullopt, t.diff}));

  Rng rng(8);
  auto p1 = tape.constant(uniform({5}, rng, 0.05, 0.95));
  auto p2 = tape.constant(uniform({5}, rng, 0.05, 0.95));
  auto p3 = tape.constant(uniform({5}, rng, 0.05, 0.95));
  CoupledTerms<double> r{loss_adv(p1), loss_same(p2), loss_diff(p3)};
  const double base = loss_discriminator(LossWeights{}, r).value()[0];
  const double doubled = loss_discriminator(LossWeights{.same = 2.0}, r).value()[0];
  CHECK(doubled - base == doctest::Approx(r.same->value()[0]).epsilon(1e-12));
}

TEST_CASE("finite-difference checks of every loss through small networks") {
  Rng rng(10);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Discriminator<double> d(small_disc(true, true), seed);
    auto a = uniform({3, 1, 4, 4}, rng), b = uniform({3, 1, 4, 4}, rng);
    // Gradients with respect to both images, spectral norm active.
    for (int which = 0; which < 4; ++which) {
      auto fn = [&](DTape& t, const std::vector<DVar>& in) {
        auto p = d.forward(t, in[0], in[1]);
        switch (which) {
          case 0: return loss_adv(p);
          case 1: return loss_same(p);
          case 2: return loss_diff(p);
          default: return loss_generator(p);
        }
      };
      require_match(adaptive([&](double eps) { return check_gradients(fn, {a, b}, eps); }));
    }
    // Gradients with respect to discriminator parameters (power iteration held out).
    Discriminator<double> plain(small_disc(true, false), seed);
    auto pfn = [&](DTape& t, const ParamStore<double>& ps) {
      auto p = plain.network().forward(t, ps, t.constant(a), nullptr, SpectralMode::frozen, t.constant(b));
      auto q = ops::reshape(p, Shape{3});
      return loss_discriminator(LossWeights{.adv = 0.7, .same = 1.3, .diff = 0.4},
                                CoupledTerms<double>{loss_adv(q), loss_same(q), loss_diff(q)});
    };
    require_match(adaptive([&](double eps) { return check_param_gradients(pfn, plain.params(), eps); }));

    Discriminator<double> single(small_disc(false, false), seed);
    auto mfn = [&](DTape& t, const ParamStore<double>& ps) {
      auto real = ops::reshape(single.network().forward(t, ps, t.constant(a)), Shape{3});
      auto fake = ops::reshape(single.network().forward(t, ps, t.constant(b)), Shape{3});
      return loss_minimax(real, fake).disc;
    };
    require_match(adaptive([&](double eps) { return check_param_gradients(mfn, single.params(), eps); }));

    // Generator parameters through the frozen coupled discriminator.
    Generator<double> g(small_gen(), seed);
    auto z = uniform({3, 3}, rng, -1, 1), f = uniform({3, 2}, rng);
    auto gfn = [&](DTape& t, const ParamStore<double>& ps) {
      auto fake = g.network().forward(t, ps, ops::concat_channels(t.constant(z), t.constant(f)));
      t.bind_constants(d.params());
      return loss_generator(d.forward(t, t.constant(a), fake));
    };
    require_match(adaptive([&](double eps) { return check_param_gradients(gfn, g.params(), eps); }));
  }
}

TEST_CASE("player gradients are isolated") {
  Generator<float> g({.noise_dim = 3, .code_dim = 2, .hidden = {6}, .image = {1, 4, 4}}, 1);
  Discriminator<float> d({.image = {1, 4, 4}, .conv1 = 3, .conv2 = 4, .hidden = 5}, 1);
  Tensor z({2, 3}, 0.5f), f({2, 2}, 0.1f), real({2, 1, 4, 4}, 0.3f);

  Tape<float> gt;
  gt.bind_constants(d.params());
  auto fake = g.forward(gt, gt.constant(z), gt.constant(f));
  auto lg = loss_generator(d.forward(gt, gt.constant(real), fake));
  gt.backward(lg);
  for (const auto& [name, grad] : gt.param_grads(d.params()))
    for (auto v : grad.values()) CHECK(v == 0.0f);
  bool moved = false;
  for (const auto& [name, grad] : gt.param_grads(g.params()))
    for (auto v : grad.values()) moved = moved || v != 0.0f;
  CHECK(moved);

  Tape<float> dt;
  auto fake_const = dt.constant(g.generate(z, f));
  auto p = d.forward(dt, dt.constant(real), fake_const, SpectralMode::update);
  auto ld = loss_discriminator(LossWeights{.same = 0, .diff = 0}, CoupledTerms<float>{loss_adv(p), {}, {}});
  dt.backward(ld);
  for (const auto& [name, grad] : dt.param_grads(g.params()))
    for (auto v : grad.values()) CHECK(v == 0.0f);
}
