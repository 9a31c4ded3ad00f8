// Built against the double-precision core so central differences are tight.

#include "doctest.h"
#include "oracles.hpp"
#include "qcseis/objectives.hpp"
#include "qcseis/ops.hpp"
#include "qcseis/qlayer.hpp"

#include <numeric>

using namespace qcseis;

namespace {

Tensor rand_tensor(Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<real> v(shape_numel(s));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(s), std::move(v), grad);
}

// Largest norm-wise relative error between reverse-mode and central
// differences of <w, f(inputs)> over all inputs.
double grad_error(const std::function<Tensor(std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                  std::uint64_t seed = 1) {
  const Tensor y = f(inputs);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<real> w(y.numel());
  for (auto& x : w) x = u(rng);
  const Tensor wt(y.shape(), w);
  for (auto& t : inputs) t.zero_grad();
  sum(mul(f(inputs), wt)).backward();

  auto project = [&] {
    NoGradGuard ng;
    const Tensor out = f(inputs);
    double acc = 0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * out.data()[i];
    return acc;
  };
  double num = 0, a2 = 0, f2 = 0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    const std::vector<real> g(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const real orig = t.data()[i];
      t.data()[i] = orig + 1e-6;
      const double fp = project();
      t.data()[i] = orig - 1e-6;
      const double fm = project();
      t.data()[i] = orig;
      const double fd = (fp - fm) / 2e-6;
      num += (g[i] - fd) * (g[i] - fd);
      a2 += g[i] * g[i];
      f2 += fd * fd;
    }
  }
  return std::sqrt(num) / std::max({std::sqrt(a2), std::sqrt(f2), 1e-300});
}

const std::vector<Shape> kShapes = {{1, 1, 4, 4}, {2, 2, 4, 6}, {1, 3, 6, 4}, {2, 1, 8, 8}, {3, 2, 4, 4}};

}  // namespace

TEST_CASE("conv2d forward matches a direct loop") {
  std::mt19937_64 rng(1);
  const Tensor x = rand_tensor({2, 3, 5, 6}, rng), w = rand_tensor({4, 3, 3, 3}, rng), b = rand_tensor({4}, rng);
  for (int stride : {1, 2}) {
    const Tensor y = conv2d(x, w, b, stride, 1);
    const std::size_t ho = (5 + 2 - 3) / stride + 1, wo = (6 + 2 - 3) / stride + 1;
    REQUIRE(y.shape() == Shape{2, 4, ho, wo});
    double worst = 0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t o = 0; o < 4; ++o)
        for (std::size_t i = 0; i < ho; ++i)
          for (std::size_t j = 0; j < wo; ++j) {
            double acc = b.data()[o];
            for (std::size_t c = 0; c < 3; ++c)
              for (int ki = 0; ki < 3; ++ki)
                for (int kj = 0; kj < 3; ++kj) {
                  const long r = static_cast<long>(i * stride) + ki - 1, s = static_cast<long>(j * stride) + kj - 1;
                  if (r < 0 || s < 0 || r >= 5 || s >= 6) continue;
                  acc += x.data()[((n * 3 + c) * 5 + r) * 6 + s] * w.data()[((o * 3 + c) * 3 + ki) * 3 + kj];
                }
            worst = std::max(worst, std::abs(acc - y.data()[((n * 4 + o) * ho + i) * wo + j]));
          }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("conv2d identity kernel returns the input") {
  std::mt19937_64 rng(2);
  const Tensor x = rand_tensor({1, 1, 4, 5}, rng);
  std::vector<real> k(9, 0);
  k[4] = 1;
  const Tensor y = conv2d(x, Tensor({1, 1, 3, 3}, k), Tensor(), 1, 1);
  CHECK(std::equal(y.data().begin(), y.data().end(), x.data().begin()));
}

TEST_CASE("batchnorm edge behaviour") {
  auto stats = BatchNormStats::for_channels(2);
  const Tensor gamma = Tensor::full({2}, 1), beta({2}, {0.5, -0.25});
  std::vector<real> v(2 * 2 * 3 * 3, 2.0);
  const Tensor constant({2, 2, 3, 3}, v);
  const Tensor y = batchnorm2d(constant, gamma, beta, stats, Mode::Train);
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx((i / 9) % 2 ? -0.25 : 0.5));
  CHECK(stats.running_mean.data()[0] == doctest::Approx(0.2));

  // Already standardized input passes through.
  std::mt19937_64 rng(3);
  Tensor x = rand_tensor({4, 1, 4, 4}, rng);
  double m = 0, s2 = 0;
  for (real a : x.data()) m += a;
  m /= x.numel();
  for (real a : x.data()) s2 += (a - m) * (a - m);
  const double sd = std::sqrt(s2 / x.numel());
  for (auto& a : x.data()) a = (a - m) / sd;
  auto st1 = BatchNormStats::for_channels(1);
  const Tensor z = batchnorm2d(x, Tensor::full({1}, 1), Tensor::zeros({1}), st1, Mode::Train);
  for (std::size_t i = 0; i < z.numel(); ++i) CHECK(z.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));

  CHECK_THROWS_AS(batchnorm2d(rand_tensor({1, 1, 2, 2}, rng), Tensor::full({1}, 1), Tensor::zeros({1}), st1,
                              Mode::Train),
                  ShapeError);
}

TEST_CASE("pixel shuffle, split and concat round trips are exact") {
  std::mt19937_64 rng(4);
  const Tensor x = rand_tensor({2, 8, 3, 5}, rng);
  const Tensor y = pixel_shuffle(x, 2);
  CHECK(y.shape() == Shape{2, 2, 6, 10});
  const Tensor back = pixel_unshuffle(y, 2);
  CHECK(std::equal(back.data().begin(), back.data().end(), x.data().begin()));
  // Channel group c*r*r + i*r + j lands on pixel (h*r + i, w*r + j).
  CHECK(y.data()[((0 * 2 + 1) * 6 + 1) * 10 + 0] == x.data()[((0 * 8 + 4 + 2) * 3 + 0) * 5 + 0]);

  const auto [a, b] = split_channels(x, 3);
  CHECK(a.dim(1) == 3);
  CHECK(b.dim(1) == 5);
  const Tensor c = concat_channels(a, b);
  CHECK(std::equal(c.data().begin(), c.data().end(), x.data().begin()));
  CHECK_THROWS_AS(pixel_shuffle(rand_tensor({1, 3, 2, 2}, rng), 2), ShapeError);
}

TEST_CASE("every op passes a double-precision gradient check on five shapes") {
  std::mt19937_64 rng(99);
  struct Case {
    const char* name;
    std::function<std::vector<Tensor>(const Shape&)> make;
    std::function<Tensor(std::vector<Tensor>&)> f;
  };
  auto signed_away = [&](const Shape& s) {
    Tensor t = rand_tensor(s, rng, 0.05, 1.0);
    std::bernoulli_distribution flip(0.5);
    for (auto& v : t.data()) v = flip(rng) ? -v : v;
    return t;
  };
  QuantumLayerConfig qcfg;
  qcfg.seed = 17;
  const auto circuits = make_circuits(qcfg);
  BatchNormStats bn_stats = BatchNormStats::for_channels(3);

  const std::vector<Case> cases = {
      {"conv3x3", [&](const Shape& s) { return std::vector{rand_tensor(s, rng), rand_tensor({2, s[1], 3, 3}, rng), rand_tensor({2}, rng)}; },
       [](std::vector<Tensor>& t) { return conv2d(t[0], t[1], t[2], 1, 1); }},
      {"conv3x3_s2", [&](const Shape& s) { return std::vector{rand_tensor(s, rng), rand_tensor({2, s[1], 3, 3}, rng), rand_tensor({2}, rng)}; },
       [](std::vector<Tensor>& t) { return conv2d(t[0], t[1], t[2], 2, 1); }},
      {"prelu", [&](const Shape& s) { return std::vector{signed_away(s), rand_tensor({s[1]}, rng, 0.1, 0.4)}; },
       [](std::vector<Tensor>& t) { return prelu(t[0], t[1]); }},
      {"batchnorm_train",
       [&](const Shape& s) {
         Shape b = s;
         b[0] = std::max<std::size_t>(b[0], 2);
         b[1] = 3;
         return std::vector{rand_tensor(b, rng), rand_tensor({3}, rng, 0.5, 1.5), rand_tensor({3}, rng)};
       },
       [&](std::vector<Tensor>& t) { return batchnorm2d(t[0], t[1], t[2], bn_stats, Mode::Train); }},
      {"pixel_shuffle", [&](const Shape& s) { return std::vector{rand_tensor({s[0], 4 * s[1], s[2], s[3]}, rng)}; },
       [](std::vector<Tensor>& t) { return pixel_shuffle(t[0], 2); }},
      {"concat", [&](const Shape& s) { return std::vector{rand_tensor(s, rng), rand_tensor(s, rng)}; },
       [](std::vector<Tensor>& t) { return concat_channels(t[0], t[1]); }},
      {"linear", [&](const Shape& s) { return std::vector{rand_tensor({s[0], s[2] * s[3]}, rng), rand_tensor({3, s[2] * s[3]}, rng), rand_tensor({3}, rng)}; },
       [](std::vector<Tensor>& t) { return linear(t[0], t[1], t[2]); }},
      {"sigmoid", [&](const Shape& s) { return std::vector{rand_tensor(s, rng, -3, 3)}; },
       [](std::vector<Tensor>& t) { return sigmoid(t[0]); }},
      {"mul_add", [&](const Shape& s) { return std::vector{rand_tensor(s, rng), rand_tensor(s, rng)}; },
       [](std::vector<Tensor>& t) { return add(mul(t[0], t[1]), scale(t[0], 0.5)); }},
      {"mean", [&](const Shape& s) { return std::vector{rand_tensor(s, rng)}; },
       [](std::vector<Tensor>& t) { return mean(t[0]); }},
      {"avg_pool", [&](const Shape& s) { return std::vector{rand_tensor(s, rng)}; },
       [](std::vector<Tensor>& t) { return avg_pool2d(t[0], 2); }},
      {"upsample", [&](const Shape& s) { return std::vector{rand_tensor(s, rng)}; },
       [](std::vector<Tensor>& t) { return nearest_upsample(t[0], 2, 2); }},
      {"quantum", [&](const Shape& s) { return std::vector{rand_tensor(s, rng, -2, 2)}; },
       [&](std::vector<Tensor>& t) { return quantum_forward(t[0], circuits, qcfg); }},
      {"l1", [&](const Shape& s) {
         Tensor a = rand_tensor(s, rng), b = a.detach();
         for (auto& v : b.data()) v += (rng() % 2 ? 0.3 : -0.3);
         return std::vector{a, b};
       },
       [](std::vector<Tensor>& t) { return l1_loss(t[0], t[1]); }},
      {"abs_cosine", [&](const Shape& s) { return std::vector{rand_tensor(s, rng), rand_tensor(s, rng)}; },
       [](std::vector<Tensor>& t) { return abs_cosine(t[0], t[1]); }},
      {"neg_log", [&](const Shape& s) { return std::vector{rand_tensor({s[0], 1}, rng, 0.1, 0.9)}; },
       [](std::vector<Tensor>& t) { return add(neg_log_score(t[0]), neg_log_one_minus_score(t[0])); }},
  };
  for (const auto& c : cases) {
    for (const auto& s : kShapes) {
      auto inputs = c.make(s);
      const double err = grad_error(c.f, inputs);
      INFO(c.name << " " << shape_str(s));
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("max_pool routes gradient to the arg max") {
  const Tensor x({1, 1, 2, 2}, {0.1, 0.9, -0.3, 0.2}, true);
  const Tensor y = max_pool2d(x, 2);
  CHECK(y.item() == doctest::Approx(0.9));
  y.backward();
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("no-grad guard records nothing and grads accumulate") {
  Tensor a = Tensor::full({3}, 2.0, true);
  {
    NoGradGuard ng;
    const Tensor b = mul(a, a);
    CHECK_FALSE(b.requires_grad());
  }
  sum(mul(a, a)).backward();
  sum(a).backward();
  for (real g : a.grad()) CHECK(g == doctest::Approx(5.0));
  a.zero_grad();
  for (real g : a.grad()) CHECK(g == 0.0);
}
