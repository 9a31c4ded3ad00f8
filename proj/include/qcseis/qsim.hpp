#pragma once

// Exact state-vector simulation of small qubit registers restricted to the
// gate set the quantum pathway needs: Ry rotations and adjacent CNOTs.
//
// Qubit 0 is the least significant bit of the basis-state index.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "qcseis/common.hpp"

namespace qcseis::qsim {

inline constexpr int kMaxQubits = 12;

using amplitude = std::complex<double>;
using Matrix2 = std::array<std::array<double, 2>, 2>;

class QuantumState {
 public:
  /// |0...0> on n_qubits qubits.
  explicit QuantumState(int n_qubits);

  /// Takes ownership of an amplitude vector; its length must be 2^n and its
  /// norm 1 within 1e-9.
  static QuantumState from_amplitudes(int n_qubits, std::vector<amplitude> amps);

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }
  std::span<const amplitude> amplitudes() const { return amps_; }
  std::span<amplitude> mutable_amplitudes() { return amps_; }
  double norm() const;

 private:
  QuantumState(int n_qubits, std::vector<amplitude> amps)
      : n_qubits_(n_qubits), amps_(std::move(amps)) {}

  int n_qubits_;
  std::vector<amplitude> amps_;
};

/// Immutable Ry + CNOT program with fixed angles.
class RandomCircuit {
 public:
  using Entanglers = std::vector<std::pair<int, int>>;

  /// Seeded layout: `depth` layers, each one Ry per qubit with an angle in
  /// [0, 2pi) keyed by (seed, index, layer, qubit), followed by the CNOT chain
  /// 0->1, 1->2, ..., (n-2)->(n-1).
  RandomCircuit(int index, int depth, int n_qubits, std::uint64_t seed);

  /// Restores a circuit from stored angles and layout (no reseeding).
  static RandomCircuit from_angles(int index, int n_qubits, std::uint64_t seed,
                                   std::vector<double> angles,
                                   std::vector<Entanglers> layout);

  int index() const { return index_; }
  int depth() const { return depth_; }
  int n_qubits() const { return n_qubits_; }
  std::uint64_t seed() const { return seed_; }
  double angle(int layer, int qubit) const { return angles_[layer * n_qubits_ + qubit]; }
  /// Row-major [depth x n_qubits].
  std::span<const double> angles() const { return angles_; }
  const std::vector<Entanglers>& entanglers() const { return layout_; }

 private:
  RandomCircuit() = default;
  void validate() const;

  int index_ = 0;
  int depth_ = 0;
  int n_qubits_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> angles_;
  std::vector<Entanglers> layout_;
};

struct Observable {
  enum class Kind { PauliZ };
  Kind kind = Kind::PauliZ;
  int target_qubit = 0;

  static Observable pauli_z(int qubit) { return {Kind::PauliZ, qubit}; }
};

/// Deterministic uniform [0, 2pi) angle for the counter (seed, index, layer, qubit).
double circuit_angle(std::uint64_t seed, int index, int layer, int qubit);

QuantumState zero_state(int n_qubits);

Matrix2 ry_matrix(double theta);

/// Applies an arbitrary real 2x2 matrix; apply_ry routes through this.
QuantumState apply_single_qubit(const QuantumState& state, int qubit, const Matrix2& m);
QuantumState apply_ry(const QuantumState& state, int qubit, double theta);
QuantumState apply_cnot(const QuantumState& state, int control, int target);

/// Product state (prod_j Ry(x_j)) |0...0>; x.size() is the register size.
QuantumState encode(std::span<const double> x);

QuantumState run_circuit(const QuantumState& state, const RandomCircuit& circuit);

double expect(const QuantumState& state, const Observable& obs);

/// <O> of the circuit applied to encode(x).
double expectation(std::span<const double> x, const RandomCircuit& circuit, const Observable& obs);

/// d<O>/dx_j by the parameter-shift rule, (E(x_j + pi/2) - E(x_j - pi/2)) / 2.
std::vector<double> grad_expect_wrt_encoding(std::span<const double> x,
                                             const RandomCircuit& circuit,
                                             const Observable& obs);

/// Real-amplitude fast path used by the quantum layer. Ry and CNOT keep a
/// real state real, so this evaluates the same pipeline as `expectation`
/// without complex arithmetic. `scratch` must hold at least 2^n doubles.
double expectation_real(std::span<const double> x, const RandomCircuit& circuit,
                        int target_qubit, std::span<double> scratch);

/// Fast path value plus parameter-shift gradient written into `grad`.
double expectation_and_grad_real(std::span<const double> x, const RandomCircuit& circuit,
                                 int target_qubit, std::span<double> grad,
                                 std::span<double> scratch);

}  // namespace qcseis::qsim
