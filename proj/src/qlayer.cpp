#include "qcseis/qlayer.hpp"

#include <algorithm>
#include <thread>

namespace qcseis {

namespace {

// Contiguous chunking; each index is processed by exactly one worker and
// results land in disjoint slots, so output does not depend on `workers`.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1,
                                                std::max<std::size_t>(n, 1));
  if (w == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(w);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t begin = k * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

void check_circuits(std::span<const qsim::RandomCircuit> circuits, const QuantumLayerConfig& cfg) {
  if (circuits.size() != static_cast<std::size_t>(cfg.n_circuits)) {
    throw ShapeError("quantum layer expects " + std::to_string(cfg.n_circuits) + " circuits, got " +
                     std::to_string(circuits.size()));
  }
  for (const auto& c : circuits) {
    if (c.n_qubits() != cfg.n_qubits) {
      throw ShapeError("circuit qubit count " + std::to_string(c.n_qubits()) +
                       " does not match layer n_qubits " + std::to_string(cfg.n_qubits));
    }
  }
}

struct Geometry {
  std::size_t batch, channels, t, s, s_out, stride, nq, k;
};

Geometry geometry(const Shape& shape, const QuantumLayerConfig& cfg) {
  if (shape.size() != 4) throw ShapeError("quantum layer input must be [B, C, T, S]");
  const std::size_t s = shape[3];
  const auto nq = static_cast<std::size_t>(cfg.n_qubits);
  if (s < nq) {
    throw ShapeError("trace axis " + std::to_string(s) + " shorter than window " +
                     std::to_string(nq));
  }
  const auto stride = static_cast<std::size_t>(cfg.stride);
  return {shape[0], shape[1], shape[2], s, (s + stride - 1) / stride, stride, nq,
          static_cast<std::size_t>(cfg.n_circuits)};
}

// Source trace for window position j of window w (replicate padding).
std::size_t trace_index(const Geometry& g, std::size_t w, std::size_t j) {
  return std::min(w * g.stride + j, g.s - 1);
}

void load_row(const real* x, const Geometry& g, std::size_t r, double scale, double* row) {
  const std::size_t w = r % g.s_out;
  const std::size_t line = r / g.s_out;  // flat (b, c, t)
  const real* base = x + line * g.s;
  for (std::size_t j = 0; j < g.nq; ++j) row[j] = scale * base[trace_index(g, w, j)];
}

}  // namespace

void QuantumLayerConfig::validate() const {
  if (n_qubits < 1 || n_qubits > qsim::kMaxQubits) throw std::invalid_argument("n_qubits out of range");
  if (window != n_qubits || stride != n_qubits) {
    throw std::invalid_argument("quantum layer window and stride must equal n_qubits");
  }
  if (n_circuits < 1) throw std::invalid_argument("n_circuits must be at least 1");
  if (depth < 0) throw std::invalid_argument("circuit depth must be non-negative");
}

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

PatchMatrix unfold(const Tensor& input, const QuantumLayerConfig& cfg) {
  cfg.validate();
  const Geometry g = geometry(input.shape(), cfg);
  PatchMatrix pm;
  pm.rows = g.batch * g.channels * g.t * g.s_out;
  pm.cols = g.nq;
  pm.windows_per_row = g.s_out;
  pm.values.resize(pm.rows * pm.cols);
  for (std::size_t r = 0; r < pm.rows; ++r) {
    load_row(input.data().data(), g, r, 1.0, pm.values.data() + r * pm.cols);
  }
  return pm;
}

std::vector<qsim::RandomCircuit> make_circuits(const QuantumLayerConfig& cfg) {
  cfg.validate();
  std::vector<qsim::RandomCircuit> out;
  for (int i = 0; i < cfg.n_circuits; ++i) out.emplace_back(i, cfg.depth, cfg.n_qubits, cfg.seed);
  return out;
}

namespace {

std::vector<real> forward_values(std::span<const real> input, const Geometry& g,
                                 std::span<const qsim::RandomCircuit> circuits, double scale,
                                 int workers) {
  const std::size_t rows = g.batch * g.channels * g.t * g.s_out;
  std::vector<double> patch(rows * g.k);
  parallel_for(rows, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> scratch(std::size_t{1} << g.nq);
    std::vector<double> row(g.nq);
    for (std::size_t r = begin; r < end; ++r) {
      load_row(input.data(), g, r, scale, row.data());
      for (std::size_t i = 0; i < g.k; ++i) {
        patch[r * g.k + i] = qsim::expectation_real(row, circuits[i], 0, scratch);
      }
    }
  });

  // Channel mean in fixed order, then repeat along traces and crop.
  std::vector<real> out(g.batch * g.k * g.t * g.s);
  const double inv_c = 1.0 / static_cast<double>(g.channels);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t i = 0; i < g.k; ++i)
      for (std::size_t t = 0; t < g.t; ++t)
        for (std::size_t w = 0; w < g.s_out; ++w) {
          double acc = 0.0;
          for (std::size_t c = 0; c < g.channels; ++c) {
            const std::size_t r = ((b * g.channels + c) * g.t + t) * g.s_out + w;
            acc += patch[r * g.k + i];
          }
          const real v = static_cast<real>(acc * inv_c);
          real* line = out.data() + ((b * g.k + i) * g.t + t) * g.s;
          for (std::size_t s = w * g.stride; s < std::min(g.s, (w + 1) * g.stride); ++s) line[s] = v;
        }
  return out;
}

}  // namespace

Tensor quantum_forward(const Tensor& input, std::span<const qsim::RandomCircuit> circuits,
                       const QuantumLayerConfig& cfg, int workers) {
  cfg.validate();
  check_circuits(circuits, cfg);
  const Geometry g = geometry(input.shape(), cfg);
  auto out = forward_values(input.data(), g, circuits, cfg.input_scale, workers);

  Tensor xt = input;
  std::vector<qsim::RandomCircuit> kept(circuits.begin(), circuits.end());
  return make_result({g.batch, g.k, g.t, g.s}, std::move(out), {xt},
                     [xt, kept = std::move(kept), cfg, workers](TensorImpl& o) mutable {
                       if (!xt.requires_grad()) return;
                       QuantumSavedContext saved{xt.shape(),
                                                 {xt.data().begin(), xt.data().end()}};
                       const auto gin = quantum_backward(o.grad, saved, kept, cfg, workers);
                       auto gx = xt.grad();
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gin[i];
                     });
}

std::vector<real> quantum_backward(std::span<const real> upstream, const QuantumSavedContext& saved,
                                   std::span<const qsim::RandomCircuit> circuits,
                                   const QuantumLayerConfig& cfg, int workers) {
  if (!saved.valid()) throw ContractError("quantum_backward: missing saved forward context");
  cfg.validate();
  check_circuits(circuits, cfg);
  const Geometry g = geometry(saved.input_shape, cfg);
  if (upstream.size() != g.batch * g.k * g.t * g.s) {
    throw ShapeError("quantum_backward: upstream gradient has the wrong size");
  }

  // Adjoint of repeat+crop: sum the repeated positions per window.
  std::vector<double> pooled(g.batch * g.k * g.t * g.s_out, 0.0);
  for (std::size_t line = 0; line < g.batch * g.k * g.t; ++line)
    for (std::size_t w = 0; w < g.s_out; ++w) {
      double acc = 0.0;
      for (std::size_t s = w * g.stride; s < std::min(g.s, (w + 1) * g.stride); ++s) {
        acc += upstream[line * g.s + s];
      }
      pooled[line * g.s_out + w] = acc;
    }

  const std::size_t rows = g.batch * g.channels * g.t * g.s_out;
  const double scale = cfg.input_scale;
  const double inv_c = 1.0 / static_cast<double>(g.channels);
  std::vector<real> gin(saved.input.size(), real{0});
  parallel_for(rows, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> scratch(std::size_t{1} << g.nq);
    std::vector<double> row(g.nq), grad(g.nq), acc(g.nq);
    for (std::size_t r = begin; r < end; ++r) {
      const std::size_t w = r % g.s_out;
      const std::size_t t = (r / g.s_out) % g.t;
      const std::size_t b = r / (g.s_out * g.t * g.channels);
      load_row(saved.input.data(), g, r, scale, row.data());
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < g.k; ++i) {
        const double up = pooled[((b * g.k + i) * g.t + t) * g.s_out + w];
        if (up == 0.0) continue;
        qsim::expectation_and_grad_real(row, circuits[i], 0, grad, scratch);
        for (std::size_t j = 0; j < g.nq; ++j) acc[j] += up * grad[j];
      }
      real* line = gin.data() + (r / g.s_out) * g.s;
      for (std::size_t j = 0; j < g.nq; ++j) {
        line[trace_index(g, w, j)] += static_cast<real>(acc[j] * inv_c * scale);
      }
    }
  });
  return gin;
}

QuantumConv::QuantumConv(QuantumLayerConfig cfg)
    : cfg_(cfg), circuits_(make_circuits(cfg)), workers_(default_workers()) {}

QuantumConv::QuantumConv(QuantumLayerConfig cfg, std::vector<qsim::RandomCircuit> circuits)
    : cfg_(cfg), workers_(default_workers()) {
  cfg_.validate();
  set_circuits(std::move(circuits));
}

void QuantumConv::set_circuits(std::vector<qsim::RandomCircuit> circuits) {
  check_circuits(circuits, cfg_);
  circuits_ = std::move(circuits);
}

Tensor QuantumConv::forward(const Tensor& input) const {
  return quantum_forward(input, circuits_, cfg_, workers_);
}

}  // namespace qcseis
