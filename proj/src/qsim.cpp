#include "qcseis/qsim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qcseis::qsim {

namespace {

void check_qubit_count(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw std::out_of_range("qubit count " + std::to_string(n_qubits) +
                            " outside the simulator limit [1, " +
                            std::to_string(kMaxQubits) + "]");
  }
}

void check_qubit(const QuantumState& state, int qubit) {
  if (qubit < 0 || qubit >= state.n_qubits()) {
    throw std::out_of_range("qubit index " + std::to_string(qubit) + " out of range for a " +
                            std::to_string(state.n_qubits()) + "-qubit register");
  }
}

std::vector<RandomCircuit::Entanglers> chain_layout(int depth, int n_qubits) {
  RandomCircuit::Entanglers chain;
  for (int q = 0; q + 1 < n_qubits; ++q) chain.emplace_back(q, q + 1);
  return std::vector<RandomCircuit::Entanglers>(depth, chain);
}

// In-place kernels shared by the complex and real paths.
template <class T>
void ry_inplace(std::span<T> amps, int qubit, const Matrix2& m) {
  const std::size_t bit = std::size_t{1} << qubit;
  for (std::size_t k = 0; k < amps.size(); ++k) {
    if (k & bit) continue;
    const T a0 = amps[k];
    const T a1 = amps[k | bit];
    amps[k] = m[0][0] * a0 + m[0][1] * a1;
    amps[k | bit] = m[1][0] * a0 + m[1][1] * a1;
  }
}

template <class T>
void cnot_inplace(std::span<T> amps, int control, int target) {
  const std::size_t cbit = std::size_t{1} << control;
  const std::size_t tbit = std::size_t{1} << target;
  for (std::size_t k = 0; k < amps.size(); ++k) {
    if ((k & cbit) && !(k & tbit)) std::swap(amps[k], amps[k | tbit]);
  }
}

template <class T>
void product_state(std::span<T> amps, std::span<const double> x) {
  const std::size_t n = x.size();
  std::array<double, kMaxQubits> c{}, s{};
  for (std::size_t j = 0; j < n; ++j) {
    c[j] = std::cos(0.5 * x[j]);
    s[j] = std::sin(0.5 * x[j]);
  }
  for (std::size_t b = 0; b < amps.size(); ++b) {
    double a = 1.0;
    for (std::size_t j = 0; j < n; ++j) a *= ((b >> j) & 1U) ? s[j] : c[j];
    amps[b] = a;
  }
}

template <class T>
void evolve_inplace(std::span<T> amps, const RandomCircuit& circuit) {
  for (int layer = 0; layer < circuit.depth(); ++layer) {
    for (int q = 0; q < circuit.n_qubits(); ++q) {
      ry_inplace(amps, q, ry_matrix(circuit.angle(layer, q)));
    }
    for (const auto& [control, target] : circuit.entanglers()[layer]) {
      cnot_inplace(amps, control, target);
    }
  }
}

double z_expectation_real(std::span<const double> amps, int target) {
  const std::size_t bit = std::size_t{1} << target;
  double acc = 0.0;
  for (std::size_t k = 0; k < amps.size(); ++k) {
    const double p = amps[k] * amps[k];
    acc += (k & bit) ? -p : p;
  }
  return acc;
}

}  // namespace

QuantumState::QuantumState(int n_qubits) : n_qubits_(n_qubits) {
  check_qubit_count(n_qubits);
  amps_.assign(std::size_t{1} << n_qubits, amplitude{0.0, 0.0});
  amps_[0] = 1.0;
}

QuantumState QuantumState::from_amplitudes(int n_qubits, std::vector<amplitude> amps) {
  check_qubit_count(n_qubits);
  if (amps.size() != (std::size_t{1} << n_qubits)) {
    throw ShapeError("amplitude vector length does not match 2^n_qubits");
  }
  QuantumState st(n_qubits, std::move(amps));
  if (std::abs(st.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("amplitude vector is not normalized");
  }
  return st;
}

double QuantumState::norm() const {
  double acc = 0.0;
  for (const auto& a : amps_) acc += std::norm(a);
  return std::sqrt(acc);
}

double circuit_angle(std::uint64_t seed, int index, int layer, int qubit) {
  const std::uint64_t u = derive_seed(seed, static_cast<std::uint64_t>(index),
                                      static_cast<std::uint64_t>(layer),
                                      static_cast<std::uint64_t>(qubit));
  const double unit = static_cast<double>(u >> 11) * 0x1.0p-53;
  return unit * 2.0 * std::numbers::pi;
}

RandomCircuit::RandomCircuit(int index, int depth, int n_qubits, std::uint64_t seed)
    : index_(index), depth_(depth), n_qubits_(n_qubits), seed_(seed) {
  check_qubit_count(n_qubits);
  if (depth < 0) throw std::invalid_argument("circuit depth must be non-negative");
  angles_.resize(static_cast<std::size_t>(depth) * n_qubits);
  for (int l = 0; l < depth; ++l) {
    for (int q = 0; q < n_qubits; ++q) angles_[l * n_qubits + q] = circuit_angle(seed, index, l, q);
  }
  layout_ = chain_layout(depth, n_qubits);
}

RandomCircuit RandomCircuit::from_angles(int index, int n_qubits, std::uint64_t seed,
                                         std::vector<double> angles,
                                         std::vector<Entanglers> layout) {
  check_qubit_count(n_qubits);
  RandomCircuit c;
  c.index_ = index;
  c.n_qubits_ = n_qubits;
  c.seed_ = seed;
  c.depth_ = static_cast<int>(layout.size());
  c.angles_ = std::move(angles);
  c.layout_ = std::move(layout);
  if (c.angles_.size() != static_cast<std::size_t>(c.depth_) * n_qubits) {
    throw ShapeError("circuit angle matrix does not match depth x n_qubits");
  }
  c.validate();
  return c;
}

void RandomCircuit::validate() const {
  for (const auto& layer : layout_) {
    for (const auto& [a, b] : layer) {
      if (a < 0 || b < 0 || a >= n_qubits_ || b >= n_qubits_ || std::abs(a - b) != 1) {
        throw std::invalid_argument("entangler (" + std::to_string(a) + ", " + std::to_string(b) +
                                    ") is not an adjacent qubit pair");
      }
    }
  }
}

QuantumState zero_state(int n_qubits) { return QuantumState(n_qubits); }

Matrix2 ry_matrix(double theta) {
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  return {{{c, -s}, {s, c}}};
}

QuantumState apply_single_qubit(const QuantumState& state, int qubit, const Matrix2& m) {
  check_qubit(state, qubit);
  QuantumState out = state;
  ry_inplace(out.mutable_amplitudes(), qubit, m);
  return out;
}

QuantumState apply_ry(const QuantumState& state, int qubit, double theta) {
  return apply_single_qubit(state, qubit, ry_matrix(theta));
}

QuantumState apply_cnot(const QuantumState& state, int control, int target) {
  check_qubit(state, control);
  check_qubit(state, target);
  if (control == target) throw std::invalid_argument("CNOT control and target coincide");
  QuantumState out = state;
  cnot_inplace(out.mutable_amplitudes(), control, target);
  return out;
}

QuantumState encode(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  check_qubit_count(n);
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite encoding angle");
  }
  QuantumState st(n);
  product_state(st.mutable_amplitudes(), x);
  return st;
}

QuantumState run_circuit(const QuantumState& state, const RandomCircuit& circuit) {
  if (state.n_qubits() != circuit.n_qubits()) {
    throw ShapeError("circuit has " + std::to_string(circuit.n_qubits()) +
                     " qubits, state has " + std::to_string(state.n_qubits()));
  }
  QuantumState out = state;
  evolve_inplace(out.mutable_amplitudes(), circuit);
  return out;
}

double expect(const QuantumState& state, const Observable& obs) {
  check_qubit(state, obs.target_qubit);
  const std::size_t bit = std::size_t{1} << obs.target_qubit;
  double acc = 0.0;
  const auto amps = state.amplitudes();
  for (std::size_t k = 0; k < amps.size(); ++k) {
    const double p = std::norm(amps[k]);
    acc += (k & bit) ? -p : p;
  }
  return acc;
}

double expectation(std::span<const double> x, const RandomCircuit& circuit, const Observable& obs) {
  return expect(run_circuit(encode(x), circuit), obs);
}

std::vector<double> grad_expect_wrt_encoding(std::span<const double> x,
                                             const RandomCircuit& circuit,
                                             const Observable& obs) {
  std::vector<double> shifted(x.begin(), x.end());
  std::vector<double> grad(x.size());
  const double half_pi = 0.5 * std::numbers::pi;
  for (std::size_t j = 0; j < x.size(); ++j) {
    shifted[j] = x[j] + half_pi;
    const double plus = expectation(shifted, circuit, obs);
    shifted[j] = x[j] - half_pi;
    const double minus = expectation(shifted, circuit, obs);
    shifted[j] = x[j];
    grad[j] = 0.5 * (plus - minus);
  }
  return grad;
}

double expectation_real(std::span<const double> x, const RandomCircuit& circuit,
                        int target_qubit, std::span<double> scratch) {
  const auto amps = scratch.first(std::size_t{1} << circuit.n_qubits());
  product_state(amps, x);
  evolve_inplace(amps, circuit);
  return z_expectation_real(amps, target_qubit);
}

double expectation_and_grad_real(std::span<const double> x, const RandomCircuit& circuit,
                                 int target_qubit, std::span<double> grad,
                                 std::span<double> scratch) {
  std::array<double, kMaxQubits> shifted{};
  const std::size_t n = x.size();
  std::copy(x.begin(), x.end(), shifted.begin());
  const std::span<const double> sx(shifted.data(), n);
  const double value = expectation_real(sx, circuit, target_qubit, scratch);
  const double half_pi = 0.5 * std::numbers::pi;
  for (std::size_t j = 0; j < n; ++j) {
    shifted[j] = x[j] + half_pi;
    const double plus = expectation_real(sx, circuit, target_qubit, scratch);
    shifted[j] = x[j] - half_pi;
    const double minus = expectation_real(sx, circuit, target_qubit, scratch);
    shifted[j] = x[j];
    grad[j] = 0.5 * (plus - minus);
  }
  return value;
}

}  // namespace qcseis::qsim
