// Built against the double-precision core so the scalar oracle comparison is
// not limited by float storage.

#include "doctest.h"
#include "oracles.hpp"
#include "qcseis/trainer.hpp"

#include <limits>

using namespace qcseis;

TEST_CASE("zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::full({4}, 0.7, true);
  Adam opt({{"p", p}}, AdamConfig{0.1});
  p.zero_grad();
  CHECK(opt.step());
  for (real v : p.data()) CHECK(v == 0.7);
}

TEST_CASE("first step with unit gradient moves by lr") {
  Tensor p = Tensor::full({1}, 1.0, true);
  Adam opt({{"p", p}}, AdamConfig{0.1});
  p.grad()[0] = 1.0;
  opt.step();
  CHECK(p.data()[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("matches a scalar Adam over ten steps") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Tensor p({5}, {0.1, -0.4, 2.0, 0.0, -1.5}, true);
  std::vector<oracle::ScalarAdam> ref(5, oracle::ScalarAdam{0.01});
  std::vector<double> theta(p.data().begin(), p.data().end());
  Adam opt({{"p", p}}, AdamConfig{0.01});
  for (int step = 0; step < 10; ++step) {
    opt.zero_grad();
    for (std::size_t i = 0; i < 5; ++i) {
      const double gi = g(rng);
      p.grad()[i] = gi;
      theta[i] = ref[i].step(theta[i], gi);
    }
    opt.step();
  }
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(p.data()[i] - theta[i]) < 1e-7);
  CHECK(opt.steps() == 10);
}

TEST_CASE("non-finite gradients skip the step and are counted") {
  Tensor p = Tensor::full({2}, 1.0, true);
  Adam opt({{"p", p}}, AdamConfig{0.1});
  p.grad()[0] = 1.0;
  p.grad()[1] = std::numeric_limits<real>::quiet_NaN();
  CHECK_FALSE(opt.step());
  CHECK(opt.skipped() == 1);
  CHECK(opt.steps() == 0);
  CHECK(p.data()[0] == 1.0);
}

TEST_CASE("frozen parameters are excluded and clipping bounds the norm") {
  Tensor a = Tensor::full({2}, 1.0, true), frozen = Tensor::full({2}, 1.0, false);
  Adam opt({{"a", a}, {"stat", frozen, false}}, AdamConfig{0.1});
  CHECK(opt.params().size() == 1);
  a.grad()[0] = 3;
  a.grad()[1] = 4;
  CHECK(opt.clip_grad_norm(1.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(a.grad()[1] == doctest::Approx(0.8));
  CHECK(opt.clip_grad_norm(10.0) == doctest::Approx(1.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
}
