#pragma once

// Quantum convolution layer: windows of n_qubits consecutive traces are
// angle-encoded, evolved through N fixed random circuits and measured with
// Pauli-Z on qubit 0. One output channel per circuit.

#include <span>
#include <vector>

#include "qcseis/qsim.hpp"
#include "qcseis/tensor.hpp"

namespace qcseis {

struct QuantumLayerConfig {
  int n_qubits = 4;
  int n_circuits = 4;
  int window = 4;
  int stride = 4;
  int depth = 2;
  std::uint64_t seed = 0;
  double input_scale = 1.0;

  void validate() const;
  bool operator==(const QuantumLayerConfig&) const = default;
};

/// Row-major [rows x n_qubits] windows in (b, c, t, s') order.
struct PatchMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t windows_per_row = 0;  // S'
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// Trace-axis windows; a ragged last window is replicate-padded on the right.
PatchMatrix unfold(const Tensor& input, const QuantumLayerConfig& cfg);

std::vector<qsim::RandomCircuit> make_circuits(const QuantumLayerConfig& cfg);

/// Input values kept from the forward pass for the parameter-shift backward.
struct QuantumSavedContext {
  Shape input_shape;
  std::vector<real> input;
  bool valid() const { return input_shape.size() == 4 && shape_numel(input_shape) == input.size(); }
};

/// [B, C, T, S] -> [B, K, T, S]. Patch expectations are averaged over C and
/// repeated `stride` times along the trace axis, then cropped to S.
Tensor quantum_forward(const Tensor& input, std::span<const qsim::RandomCircuit> circuits,
                       const QuantumLayerConfig& cfg, int workers = 1);

/// Input gradient for an upstream gradient of shape [B, K, T, S].
std::vector<real> quantum_backward(std::span<const real> upstream, const QuantumSavedContext& saved,
                                   std::span<const qsim::RandomCircuit> circuits,
                                   const QuantumLayerConfig& cfg, int workers = 1);

class QuantumConv {
 public:
  explicit QuantumConv(QuantumLayerConfig cfg);
  QuantumConv(QuantumLayerConfig cfg, std::vector<qsim::RandomCircuit> circuits);

  Tensor forward(const Tensor& input) const;

  const QuantumLayerConfig& config() const { return cfg_; }
  const std::vector<qsim::RandomCircuit>& circuits() const { return circuits_; }
  void set_circuits(std::vector<qsim::RandomCircuit> circuits);
  int out_channels() const { return cfg_.n_circuits; }

  void set_workers(int workers) { workers_ = workers < 1 ? 1 : workers; }
  int workers() const { return workers_; }

 private:
  QuantumLayerConfig cfg_;
  std::vector<qsim::RandomCircuit> circuits_;
  int workers_ = 1;
};

/// Default worker count for patch parallelism (hardware concurrency).
int default_workers();

}  // namespace qcseis
