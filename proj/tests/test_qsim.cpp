#include "doctest.h"
#include "oracles.hpp"
#include "qcseis/qsim.hpp"

#include <numbers>
#include <stdexcept>

using namespace qcseis;
using namespace qcseis::qsim;

namespace {

std::vector<oracle::cplx> to_vec(const QuantumState& s) { return {s.amplitudes().begin(), s.amplitudes().end()}; }

QuantumState random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<amplitude> a(std::size_t{1} << n);
  double nrm = 0;
  for (auto& x : a) {
    x = {g(rng), g(rng)};
    nrm += std::norm(x);
  }
  for (auto& x : a) x /= std::sqrt(nrm);
  return QuantumState::from_amplitudes(n, a);
}

std::vector<std::vector<double>> angle_table(const RandomCircuit& c) {
  std::vector<std::vector<double>> t(c.depth(), std::vector<double>(c.n_qubits()));
  for (int l = 0; l < c.depth(); ++l)
    for (int q = 0; q < c.n_qubits(); ++q) t[l][q] = c.angle(l, q);
  return t;
}

}  // namespace

TEST_CASE("zero state and basic gates") {
  const auto s = zero_state(3);
  CHECK(s.dim() == 8);
  CHECK(s.amplitudes()[0] == amplitude(1.0));
  CHECK(s.norm() == doctest::Approx(1.0));

  // Ry(pi) on qubit 1 moves |000> to |010> (index 2).
  const auto r = apply_ry(s, 1, std::numbers::pi);
  CHECK(std::abs(r.amplitudes()[2] - amplitude(1.0)) < 1e-12);

  // CNOT 0->1 maps |01> (index 1) to |11> (index 3).
  auto one = apply_ry(zero_state(2), 0, std::numbers::pi);
  const auto c = apply_cnot(one, 0, 1);
  CHECK(std::abs(c.amplitudes()[3] - amplitude(1.0)) < 1e-12);
}

TEST_CASE("invalid arguments are rejected") {
  CHECK_THROWS_AS(QuantumState(0), std::out_of_range);
  CHECK_THROWS_AS(QuantumState(kMaxQubits + 1), std::out_of_range);
  CHECK_THROWS(apply_ry(zero_state(2), 2, 0.1));
  CHECK_THROWS(apply_cnot(zero_state(2), 1, 1));
  const std::vector<double> bad{0.1, std::nan("")};
  CHECK_THROWS(encode(bad));
}

TEST_CASE("random gates preserve norm and inner products") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-4, 4);
  double worst_norm = 0, worst_ip = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + trial % 5;
    const auto a = random_state(n, rng);
    const auto b = random_state(n, rng);
    const int q = static_cast<int>(rng() % n);
    QuantumState a2 = a, b2 = b;
    if (n > 1 && trial % 2) {
      const int t = (q + 1 + static_cast<int>(rng() % (n - 1))) % n;
      a2 = apply_cnot(a, q, t);
      b2 = apply_cnot(b, q, t);
    } else {
      const double th = ang(rng);
      a2 = apply_ry(a, q, th);
      b2 = apply_ry(b, q, th);
    }
    amplitude ip0 = 0, ip1 = 0;
    for (std::size_t k = 0; k < a.dim(); ++k) {
      ip0 += std::conj(a.amplitudes()[k]) * b.amplitudes()[k];
      ip1 += std::conj(a2.amplitudes()[k]) * b2.amplitudes()[k];
    }
    worst_norm = std::max(worst_norm, std::abs(a2.norm() - 1.0));
    worst_ip = std::max(worst_ip, std::abs(ip0 - ip1));
  }
  CHECK(worst_norm < 1e-12);
  CHECK(worst_ip < 1e-10);
}

TEST_CASE("run_circuit matches the dense Kronecker unitary") {
  std::mt19937_64 rng(5);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const RandomCircuit c(i % 7, 2, 4, 1000 + i);
    const auto u = oracle::circuit_unitary(4, angle_table(c), c.entanglers());
    const auto in = random_state(4, rng);
    const auto got = to_vec(run_circuit(in, c));
    const auto want = oracle::matvec(u, to_vec(in));
    for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("circuits entangle adjacent qubits in a chain and are seed keyed") {
  const RandomCircuit c(3, 2, 4, 42);
  REQUIRE(c.entanglers().size() == 2);
  for (const auto& layer : c.entanglers()) {
    REQUIRE(layer.size() == 3);
    for (std::size_t k = 0; k < layer.size(); ++k) {
      CHECK(layer[k].first == static_cast<int>(k));
      CHECK(layer[k].second == static_cast<int>(k) + 1);
    }
  }
  const RandomCircuit same(3, 2, 4, 42), other(4, 2, 4, 42);
  CHECK(std::equal(c.angles().begin(), c.angles().end(), same.angles().begin()));
  CHECK_FALSE(std::equal(c.angles().begin(), c.angles().end(), other.angles().begin()));
  CHECK(c.angle(1, 2) == circuit_angle(42, 3, 1, 2));
  for (double a : c.angles()) {
    CHECK(a >= 0.0);
    CHECK(a < 2 * std::numbers::pi);
  }
}

TEST_CASE("from_angles reproduces a seeded circuit") {
  const RandomCircuit c(2, 2, 4, 9);
  const auto r = RandomCircuit::from_angles(2, 4, 9, {c.angles().begin(), c.angles().end()}, c.entanglers());
  const std::vector<double> x{0.3, -0.2, 1.1, 0.7};
  CHECK(expectation(x, r, Observable::pauli_z(0)) == expectation(x, c, Observable::pauli_z(0)));
  CHECK_THROWS(RandomCircuit::from_angles(2, 4, 9, {0.1, 0.2}, c.entanglers()));
}

TEST_CASE("encoded first qubit gives cos theta") {
  const RandomCircuit identity(0, 0, 4, 0);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double th = -std::numbers::pi + 2 * std::numbers::pi * i / 99.0;
    const std::vector<double> x{th, 0, 0, 0};
    worst = std::max(worst, std::abs(expect(encode(x), Observable::pauli_z(0)) - std::cos(th)));
    worst = std::max(worst, std::abs(expectation(x, identity, Observable::pauli_z(0)) - std::cos(th)));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("expectation matches dense oracle and real fast path") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<double> scratch(16);
  for (int i = 0; i < 50; ++i) {
    const RandomCircuit c(i, 2, 4, 77);
    std::vector<double> x(4);
    for (auto& v : x) v = u(rng);
    const auto want =
        oracle::z_expect(oracle::matvec(oracle::circuit_unitary(4, angle_table(c), c.entanglers()), oracle::encoded(x)), 0);
    CHECK(expectation(x, c, Observable::pauli_z(0)) == doctest::Approx(want).epsilon(1e-12));
    CHECK(expectation_real(x, c, 0, scratch) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("parameter-shift gradient matches central differences") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<double> scratch(16), grad(4);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const RandomCircuit c(i % 4, 2, 4, 500 + i);
    std::vector<double> x(4);
    for (auto& v : x) v = u(rng);
    const auto ps = grad_expect_wrt_encoding(x, c, Observable::pauli_z(0));
    const auto fd = oracle::central_diff(
        [&](const std::vector<double>& p) { return expectation(p, c, Observable::pauli_z(0)); }, x, 1e-4);
    const double e = expectation_and_grad_real(x, c, 0, grad, scratch);
    CHECK(e == doctest::Approx(expectation(x, c, Observable::pauli_z(0))).epsilon(1e-12));
    for (int q = 0; q < 4; ++q) {
      worst = std::max(worst, std::abs(ps[q] - fd[q]));
      worst = std::max(worst, std::abs(grad[q] - ps[q]));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("non-target observables and amplitude constructor") {
  // Ry(pi/2) on qubit 2 only: <Z2> = 0, <Z0> = 1.
  const auto s = apply_ry(zero_state(3), 2, std::numbers::pi / 2);
  CHECK(expect(s, Observable::pauli_z(2)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(expect(s, Observable::pauli_z(0)) == doctest::Approx(1.0));
  CHECK_THROWS(QuantumState::from_amplitudes(2, {1.0, 0.0}));
}
