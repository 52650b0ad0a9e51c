#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "../support/gradcheck.hpp"
#include "doctest.h"
#include "lsc/numerics/adam.hpp"
#include "lsc/numerics/layers.hpp"
#include "lsc/numerics/linalg.hpp"
#include "lsc/numerics/spectral.hpp"

using namespace lsc;
using lsc::testing::check_gradients;
using lsc::testing::DTape;
using lsc::testing::DTensor;
using lsc::testing::DVar;

namespace {

DTensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  DTensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Uniform magnitude in [0.05, 1] with random sign, keeping inputs off the leaky-relu kink.
DTensor off_kink(Shape shape, Rng& rng) {
  DTensor t(std::move(shape));
  for (auto& v : t.values()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 1.0);
  return t;
}

Eigen::MatrixXd to_eigen(const BasicTensor<double>& w) {
  const auto [rows, cols] = matrix_view(w.shape());
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = w[r * cols + c];
  return m;
}

double largest_singular(const BasicTensor<double>& w) {
  const auto m = to_eigen(w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.transpose() * m);
  return std::sqrt(es.eigenvalues().maxCoeff());
}

}  // namespace

TEST_CASE("layer_forward reference values") {
  Tape<float> tape;
  SUBCASE("affine identity") {
    ParamStore<float> p;
    p.add("w", Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    p.add("b", Tensor({3}));
    auto x = tape.constant(Tensor({1, 3}, {1, 2, 3}));
    auto y = layer_forward<float>(layers::Affine{3, 3}, x,
                                  LayerParams<float>{tape.param(p, "w"), tape.param(p, "b")});
    CHECK(y.value() == Tensor({1, 3}, {1, 2, 3}));
  }
  SUBCASE("leaky relu") {
    auto y = layer_forward<float>(layers::LeakyRelu{0.2}, tape.constant(Tensor({1, 2}, {-1, 2})));
    CHECK(y.value()[0] == doctest::Approx(-0.2f));
    CHECK(y.value()[1] == 2.0f);
  }
  SUBCASE("3x3 conv of all-ones is the window sum") {
    ParamStore<float> p;
    p.add("k", Tensor({1, 1, 3, 3}, 1.0f));
    p.add("b", Tensor({1}));
    auto y = layer_forward<float>(layers::Conv2d{1, 1, 3, 1, 0}, tape.constant(Tensor({1, 1, 3, 3}, 1.0f)),
                                  LayerParams<float>{tape.param(p, "k"), tape.param(p, "b")});
    REQUIRE(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.value()[0] == 9.0f);
  }
  SUBCASE("upsample and concat shapes") {
    auto a = tape.constant(Tensor({2, 1, 2, 2}, 1.0f));
    auto up = layer_forward<float>(layers::Upsample{2}, a);
    CHECK(up.shape() == Shape{2, 1, 4, 4});
    auto cat = layer_forward<float>(layers::ChannelConcat{1}, a, a);
    CHECK(cat.shape() == Shape{2, 2, 2, 2});
  }
  SUBCASE("shape mismatch is reported with extents") {
    auto x = tape.constant(Tensor({1, 4}));
    ParamStore<float> p;
    p.add("w", Tensor({3, 3}));
    p.add("b", Tensor({3}));
    CHECK_THROWS_AS(layer_forward<float>(layers::Affine{3, 3}, x,
                                         LayerParams<float>{tape.param(p, "w"), tape.param(p, "b")}),
                    ShapeError);
    CHECK_THROWS_WITH_AS(Network<float>("net", {4}, {layers::Affine{3, 2}}), doctest::Contains("[4]"),
                         ShapeError);
  }
}

TEST_CASE("backward reference values") {
  SUBCASE("sum(w * x) has gradient x") {
    Tape<float> tape;
    ParamStore<float> p;
    p.add("w", Tensor({3}, {0.5f, -1.0f, 2.0f}));
    auto x = tape.constant(Tensor({3}, {1, 2, 3}));
    auto loss = ops::sum(ops::mul(tape.param(p, "w"), x));
    tape.backward(loss);
    auto g = tape.param_grads(p);
    CHECK(g.at("w") == Tensor({3}, {1, 2, 3}));
  }
  SUBCASE("sigmoid slope at zero is a quarter") {
    Tape<float> tape;
    ParamStore<float> p;
    p.add("w", Tensor({1}, {0.0f}));
    tape.backward(ops::sum(ops::sigmoid(tape.param(p, "w"))));
    CHECK(tape.param_grads(p).at("w")[0] == doctest::Approx(0.25f));
  }
  SUBCASE("parameters off the loss path get zeros") {
    Tape<float> tape;
    ParamStore<float> p;
    p.add("used", Tensor({2}, 1.0f));
    p.add("unused", Tensor({2}, 1.0f));
    tape.backward(ops::sum(tape.param(p, "used")));
    auto g = tape.param_grads(p);
    CHECK(g.at("unused") == Tensor({2}, 0.0f));
    CHECK(g.at("used") == Tensor({2}, 1.0f));
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape<float> tape;
    auto v = tape.variable(Tensor({2}, 1.0f));
    CHECK_THROWS_AS(tape.backward(ops::sigmoid(v)), ShapeError);
  }
  SUBCASE("detached loss is rejected") {
    Tape<float> tape;
    auto c = tape.constant(Tensor({2}, 1.0f));
    CHECK_THROWS_AS(tape.backward(ops::sum(c)), std::logic_error);
  }
}

TEST_CASE("layer gradients match central differences") {
  Rng rng(7);
  auto expect_ok = [](const lsc::testing::GradCheck& r) {
    INFO(r.worst);
    CHECK(r.smooth);
    CHECK(r.failures == 0);
    CHECK(r.checked > 0);
  };
  for (int trial = 0; trial < 3; ++trial) {
    expect_ok(check_gradients(
        [](DTape&, const std::vector<DVar>& in) {
          return ops::sum(ops::mul(ops::affine(in[0], in[1], in[2]), ops::affine(in[0], in[1], in[2])));
        },
        {random_tensor({3, 4}, rng), random_tensor({2, 4}, rng), random_tensor({2}, rng)}));
    expect_ok(check_gradients(
        [](DTape&, const std::vector<DVar>& in) {
          auto y = ops::conv2d(in[0], in[1], in[2], 2, 1);
          return ops::sum(ops::mul(y, y));
        },
        {random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)}));
    expect_ok(check_gradients(
        [](DTape& t, const std::vector<DVar>& in) {
          auto y = ops::leaky_relu(in[0], 0.2);
          return ops::sum(ops::mul(y, t.constant(DTensor(y.shape(), 1.5))));
        },
        {off_kink({3, 4}, rng)}));
    expect_ok(check_gradients(
        [](DTape&, const std::vector<DVar>& in) {
          auto s = ops::sigmoid(in[0]);
          return ops::sum(ops::mul(s, s));
        },
        {random_tensor({4, 3}, rng, -3, 3)}));
    expect_ok(check_gradients(
        [](DTape&, const std::vector<DVar>& in) {
          return ops::sum(ops::mul(ops::softmax(in[0]), in[1]));
        },
        {random_tensor({3, 5}, rng, -2, 2), random_tensor({3, 5}, rng)}));
    expect_ok(check_gradients(
        [](DTape&, const std::vector<DVar>& in) {
          auto up = ops::upsample_nearest(in[0], 2);
          auto cat = ops::concat_channels(up, in[1]);
          auto f = ops::flatten(cat);
          return ops::sum(ops::mul(f, f));
        },
        {random_tensor({2, 1, 2, 3}, rng), random_tensor({2, 2, 4, 6}, rng)}));
    std::vector<int> labels{0, 2, 1};
    expect_ok(check_gradients(
        [labels](DTape&, const std::vector<DVar>& in) { return ops::cross_entropy(in[0], labels); },
        {random_tensor({3, 3}, rng, -2, 2)}));
    expect_ok(check_gradients(
        [](DTape&, const std::vector<DVar>& in) {
          return ops::mean(ops::clamped_log(ops::one_minus(ops::sigmoid(in[0])), 1e-7, 1.0 - 1e-7));
        },
        {random_tensor({5}, rng, -2, 2)}));
  }
}

TEST_CASE("spectral-normalized weight gradient matches central differences") {
  Rng rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    // sigma(W) is only smooth with a spectral gap; near-ties make the FD quotient meaningless.
    DTensor w;
    for (;;) {
      w = random_tensor({3, 4}, rng);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(w));
      if (svd.singularValues()[1] < 0.8 * svd.singularValues()[0]) break;
    }
    std::vector<double> u0{0.3, -0.5, 0.8};
    auto r = check_gradients(
        [u0](DTape&, const std::vector<DVar>& in) {
          auto u = u0;
          auto wn = ops::spectral_normalized(in[0], u, 5000, false);
          auto y = ops::affine(in[1], wn, in[2]);
          return ops::sum(ops::mul(y, y));
        },
        {w, random_tensor({2, 4}, rng), random_tensor({3}, rng)});
    INFO(r.worst);
    CHECK(r.failures == 0);
  }
}

TEST_CASE("random two-layer network gradient matches finite differences") {
  Rng rng(3);
  Network<double> net("mlp", {4}, {layers::Affine{4, 6}, layers::LeakyRelu{0.2}, layers::Affine{6, 1},
                                   layers::Sigmoid{}});
  ParamStore<double> params;
  net.init_params(params, rng);
  auto x = random_tensor({3, 4}, rng);
  std::vector<std::string> names;
  std::vector<DTensor> values;
  for (const auto& [name, t] : params) {
    names.push_back(name);
    values.push_back(t);
  }
  auto r = check_gradients(
      [&](DTape& tape, const std::vector<DVar>& in) {
        // Parameters in name order: 0.bias, 0.weight, 2.bias, 2.weight.
        DVar h = tape.constant(x);
        h = ops::affine(h, in[1], in[0]);
        h = ops::leaky_relu(h, 0.2);
        h = ops::affine(h, in[3], in[2]);
        return ops::sum(ops::sigmoid(h));
      },
      values);
  INFO(r.worst);
  CHECK(r.failures == 0);

  // The same net through Network::forward yields the same parameter gradients.
  DTape tape;
  auto out = net.forward(tape, params, tape.constant(x));
  tape.backward(ops::sum(out));
  auto g = tape.param_grads(params);
  DTape tape2;
  std::vector<DVar> leaves;
  for (auto& v : values) leaves.push_back(tape2.variable(v));
  DVar h = ops::affine(tape2.constant(x), leaves[1], leaves[0]);
  h = ops::affine(ops::leaky_relu(h, 0.2), leaves[3], leaves[2]);
  tape2.backward(ops::sum(ops::sigmoid(h)));
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(g.at(names[i]) == tape2.grad_tensor(leaves[i]));
  }
}

TEST_CASE("forward and backward are bit-deterministic for a fixed seed") {
  auto run = [] {
    Rng rng(42);
    Network<float> net("n", {1, 6, 6},
                       {layers::Conv2d{1, 4, 3, 1, 1}, layers::LeakyRelu{0.2}, layers::Flatten{},
                        layers::Affine{144, 3}});
    ParamStore<float> params;
    net.init_params(params, rng);
    Tensor x({2, 1, 6, 6});
    for (auto& v : x.values()) v = static_cast<float>(rng.uniform());
    Tape<float> tape;
    auto y = net.forward(tape, params, tape.constant(x));
    tape.backward(ops::sum(ops::mul(y, y)));
    return std::pair{y.value(), tape.param_grads(params)};
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("adam update rule") {
  ParamStore<float> p;
  p.add("w", Tensor({2}, {1.0f, -2.0f}));
  SUBCASE("zero gradient leaves parameters unchanged and decays moments") {
    AdamState<float> s;
    ParamStore<float> g;
    g.add("w", Tensor({2}, {0.5f, 0.5f}));
    adam_step(p, g, s);
    const auto before = p.at("w");
    const auto v_before = s.v.at("w");
    ParamStore<float> zero;
    zero.add("w", Tensor({2}));
    adam_step(p, zero, s);
    CHECK(p.at("w") == before);
    CHECK(s.v.at("w")[0] < v_before[0]);
    CHECK(s.step == 2);
  }
  SUBCASE("first step moves by lr * sign(g)") {
    AdamState<float> s;
    s.config = {0.001, 0.0, 0.9, 0.0};
    ParamStore<float> g;
    g.add("w", Tensor({2}, {1.0f, 1.0f}));
    adam_step(p, g, s);
    CHECK(p.at("w")[0] == doctest::Approx(0.999f));
    CHECK(p.at("w")[1] == doctest::Approx(-2.001f));
    CHECK(s.step == 1);
  }
  SUBCASE("two identical steps match a hand evaluation") {
    AdamState<float> s;
    s.config = {0.01, 0.5, 0.9, 1e-8};
    ParamStore<float> g;
    g.add("w", Tensor({2}, {2.0f, 2.0f}));
    adam_step(p, g, s);
    adam_step(p, g, s);
    // t=1: m=1, v=0.4, mhat=2, vhat=4 -> step 0.01. t=2: m=1.5, v=0.76,
    // mhat=1.5/0.75=2, vhat=0.76/0.19=4 -> step 0.01.
    CHECK(p.at("w")[0] == doctest::Approx(0.98f).epsilon(1e-6));
    CHECK(s.m.at("w")[0] == doctest::Approx(1.5f));
    CHECK(s.v.at("w")[0] == doctest::Approx(0.76f));
  }
  SUBCASE("errors") {
    AdamState<float> s;
    ParamStore<float> bad;
    bad.add("w", Tensor({3}));
    CHECK_THROWS_AS(adam_step(p, bad, s), ShapeError);
    ParamStore<float> nan;
    nan.add("w", Tensor({2}, {std::nanf(""), 0.0f}));
    CHECK_THROWS_AS(adam_step(p, nan, s), NonFiniteError);
  }
}

TEST_CASE("adam with zero gradients is the identity for arbitrary states") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore<float> p, g;
    p.add("a", Tensor({3}, {static_cast<float>(rng.normal()), 1.0f, -1.0f}));
    g.add("a", Tensor({3}, {static_cast<float>(rng.normal()), static_cast<float>(rng.normal()), 0.3f}));
    AdamState<float> s;  // default beta1 = 0
    for (int k = 0; k < 1 + trial % 4; ++k) adam_step(p, g, s);
    const auto before = p;
    ParamStore<float> zero;
    zero.add("a", Tensor({3}));
    adam_step(p, zero, s);
    CHECK(p == before);
  }
}

TEST_CASE("spectral_normalize") {
  SUBCASE("identity") {
    BasicTensor<double> eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    auto r = spectral_normalize(eye, {0.2, 0.5, -0.1}, 20);
    CHECK(r.sigma == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < eye.size(); ++i) CHECK(r.normalized[i] == doctest::Approx(eye[i]).epsilon(1e-12));
  }
  SUBCASE("diag(3,1)") {
    BasicTensor<double> d({2, 2}, {3, 0, 0, 1});
    auto r = spectral_normalize(d, {1.0, 1.0}, 5);
    CHECK(std::abs(r.sigma - 3.0) < 1e-3);
  }
  SUBCASE("random 4x3 against eigen-decomposition of W^T W") {
    Rng rng(9);
    for (int i = 0; i < 10; ++i) {
      auto w = random_tensor({4, 3}, rng);
      std::vector<double> u(4);
      for (auto& v : u) v = rng.normal();
      auto r = spectral_normalize(w, u, 50);
      CHECK(std::abs(r.sigma - largest_singular(w)) < 1e-3);
      CHECK(largest_singular(r.normalized) <= 1.0 + 1e-2);
    }
  }
  SUBCASE("u persists and conv kernels are viewed as [out, rest]") {
    Rng rng(1);
    auto k = random_tensor({2, 3, 2, 2}, rng);
    auto r1 = spectral_normalize(k, {1.0, 0.0}, 1);
    auto r2 = spectral_normalize(k, r1.u, 1);
    auto r50 = spectral_normalize(k, {1.0, 0.0}, 50);
    CHECK(std::abs(r2.sigma - r50.sigma) <= std::abs(r1.sigma - r50.sigma) + 1e-12);
  }
  SUBCASE("zero matrix") {
    CHECK_THROWS_AS(spectral_normalize(BasicTensor<double>({2, 2}), {1.0, 0.0}, 5), DegenerateMatrixError);
  }
}

TEST_CASE("jacobi eigen-decomposition agrees with Eigen") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + trial % 6;
    linalg::Matrix a(n, n);
    Eigen::MatrixXd e(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double v = rng.normal();
        a(i, j) = a(j, i) = v;
        e(i, j) = e(j, i) = v;
      }
    auto mine = linalg::symmetric_eigen(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(e);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(mine.values[k] == doctest::Approx(ref.eigenvalues()[static_cast<Eigen::Index>(n - 1 - k)]).epsilon(1e-10));
    }
    // A v = lambda v for every returned pair.
    auto av = linalg::matmul(a, mine.vectors);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t r = 0; r < n; ++r)
        CHECK(std::abs(av(r, k) - mine.values[k] * mine.vectors(r, k)) < 1e-9);
  }
}

TEST_CASE("psd_sqrt squares back to the input") {
  Rng rng(2);
  linalg::Matrix b(4, 4);
  for (auto& v : b.data) v = rng.normal();
  auto spd = linalg::matmul(b, linalg::transpose(b));
  auto root = linalg::psd_sqrt(spd);
  auto back = linalg::matmul(root.root, root.root);
  for (std::size_t i = 0; i < spd.data.size(); ++i) CHECK(std::abs(back.data[i] - spd.data[i]) < 1e-9);
  CHECK(root.clipped == 0.0);
}
