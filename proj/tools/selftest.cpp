#include "selftest.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "qcseis/gradcheck.hpp"
#include "qcseis/objectives.hpp"
#include "qcseis/qlayer.hpp"
#include "qcseis/qsim.hpp"

namespace qcseis::cli {

namespace {

using qsim::Matrix2;
using cplx = std::complex<double>;
using RyProvider = std::function<Matrix2(double)>;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

qsim::QuantumState random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<cplx> a(std::size_t{1} << n);
  double norm = 0;
  for (auto& z : a) {
    z = {g(rng), g(rng)};
    norm += std::norm(z);
  }
  for (auto& z : a) z /= std::sqrt(norm);
  return qsim::QuantumState::from_amplitudes(n, std::move(a));
}

CheckOutcome ry_unitarity(const RyProvider& ry) {
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double th = -2 * std::numbers::pi + 4 * std::numbers::pi * i / 99.0;
    const Matrix2 m = ry(th);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        const double dot = m[0][r] * m[0][c] + m[1][r] * m[1][c];
        worst = std::max(worst, std::abs(dot - (r == c ? 1.0 : 0.0)));
      }
  }
  return {"qsim.ry_unitarity", worst < 1e-12, "max |M^T M - I| = " + fmt(worst)};
}

CheckOutcome norm_preservation(const RyProvider& ry, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_int_distribution<int> qubit(0, 3);
  double worst = 0;
  for (int i = 0; i < 500; ++i) {
    auto s = random_state(4, rng);
    if (i % 2 == 0) {
      s = qsim::apply_single_qubit(s, qubit(rng), ry(angle(rng)));
    } else {
      const int c = qubit(rng) % 3;
      s = qsim::apply_cnot(s, c, c + 1);
    }
    worst = std::max(worst, std::abs(s.norm() - 1.0));
  }
  return {"qsim.norm_preservation", worst < 1e-12, "max |norm - 1| = " + fmt(worst)};
}

CheckOutcome analytic_expectation(const RyProvider& ry) {
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double th = -std::numbers::pi + 2 * std::numbers::pi * i / 99.0;
    auto s = qsim::apply_single_qubit(qsim::zero_state(4), 0, ry(th));
    worst = std::max(worst, std::abs(qsim::expect(s, qsim::Observable::pauli_z(0)) - std::cos(th)));
  }
  return {"qsim.analytic_expectation", worst < 1e-12, "max |<Z0> - cos(theta)| = " + fmt(worst)};
}

// Dense 2^n unitary of one circuit, assembled from Kronecker products.
std::vector<cplx> dense_unitary(const qsim::RandomCircuit& c) {
  const int n = c.n_qubits();
  const std::size_t d = std::size_t{1} << n;
  std::vector<cplx> u(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) u[i * d + i] = 1.0;
  auto matmul = [d](const std::vector<cplx>& a, const std::vector<cplx>& b) {
    std::vector<cplx> out(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] += a[i * d + k] * b[k * d + j];
    return out;
  };
  for (int l = 0; l < c.depth(); ++l) {
    // Layer rotation: kron over qubits, qubit 0 as least significant bit.
    std::vector<cplx> layer(d * d, 0.0);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t col = 0; col < d; ++col) {
        double v = 1;
        for (int q = 0; q < n; ++q) {
          const int br = (r >> q) & 1, bc = (col >> q) & 1;
          const double h = 0.5 * c.angle(l, q);
          const double e = br == bc ? std::cos(h) : (br == 1 ? std::sin(h) : -std::sin(h));
          v *= e;
        }
        layer[r * d + col] = v;
      }
    u = matmul(layer, u);
    for (const auto& [ctl, tgt] : c.entanglers()[static_cast<std::size_t>(l)]) {
      std::vector<cplx> cx(d * d, 0.0);
      for (std::size_t k = 0; k < d; ++k) {
        const std::size_t to = ((k >> ctl) & 1) ? (k ^ (std::size_t{1} << tgt)) : k;
        cx[to * d + k] = 1.0;
      }
      u = matmul(cx, u);
    }
  }
  return u;
}

CheckOutcome dense_oracle(std::mt19937_64& rng) {
  double worst = 0;
  for (int i = 0; i < 25; ++i) {
    const qsim::RandomCircuit c(i, 2, 4, rng());
    const auto u = dense_unitary(c);
    const auto s = random_state(4, rng);
    const auto out = qsim::run_circuit(s, c);
    for (std::size_t r = 0; r < 16; ++r) {
      cplx ref = 0;
      for (std::size_t k = 0; k < 16; ++k) ref += u[r * 16 + k] * s.amplitudes()[k];
      worst = std::max(worst, std::abs(ref - out.amplitudes()[r]));
    }
  }
  return {"qsim.dense_unitary_oracle", worst < 1e-10, "max amplitude error = " + fmt(worst)};
}

CheckOutcome parameter_shift(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  const auto z0 = qsim::Observable::pauli_z(0);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const qsim::RandomCircuit c(i, 2, 4, rng());
    std::vector<double> x(4);
    for (auto& v : x) v = u(rng);
    const auto g = qsim::grad_expect_wrt_encoding(x, c, z0);
    for (std::size_t j = 0; j < 4; ++j) {
      auto xp = x, xm = x;
      xp[j] += 1e-4;
      xm[j] -= 1e-4;
      const double fd = (qsim::expectation(xp, c, z0) - qsim::expectation(xm, c, z0)) / 2e-4;
      worst = std::max(worst, std::abs(fd - g[j]));
    }
  }
  return {"qsim.parameter_shift_vs_fd", worst < 1e-6, "max |shift - fd| = " + fmt(worst)};
}

std::vector<CheckOutcome> autograd_checks(std::uint64_t seed) {
  std::vector<CheckOutcome> out;
  const auto results = check_all_ops(seed);
  std::string current;
  CheckOutcome agg;
  double worst = 0;
  int shapes = 0;
  auto flush = [&] {
    if (current.empty()) return;
    agg.detail = std::to_string(shapes) + " shapes, max rel err " + fmt(worst);
    out.push_back(agg);
  };
  for (const auto& r : results) {
    if (r.name != current) {
      flush();
      current = r.name;
      agg = {"autograd." + r.name, true, ""};
      worst = 0;
      shapes = 0;
    }
    agg.passed = agg.passed && r.passed;
    worst = std::max(worst, r.rel_error);
    ++shapes;
  }
  flush();
  return out;
}

CheckOutcome qlayer_oracle(std::mt19937_64& rng) {
  QuantumLayerConfig cfg;
  cfg.seed = rng();
  const auto circuits = make_circuits(cfg);
  const Shape shape{2, 3, 4, 10};
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>(u(rng));
  const Tensor in(shape, v);
  const Tensor y1 = quantum_forward(in, circuits, cfg, 1);
  const Tensor y2 = quantum_forward(in, circuits, cfg, 2);
  const Tensor y8 = quantum_forward(in, circuits, cfg, 8);
  bool identical = std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()) &&
                   std::equal(y1.data().begin(), y1.data().end(), y8.data().begin());

  // Scalar loop: one simulator call per (sample, channel, time, window, circuit).
  const std::size_t B = shape[0], C = shape[1], T = shape[2], S = shape[3], K = circuits.size();
  double worst = 0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t s = 0; s < S; ++s) {
        const std::size_t w = s / 4;
        for (std::size_t k = 0; k < K; ++k) {
          double acc = 0;
          for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> row(4);
            for (std::size_t j = 0; j < 4; ++j) {
              const std::size_t sj = std::min(w * 4 + j, S - 1);
              row[j] = v[((b * C + c) * T + t) * S + sj];
            }
            acc += qsim::expectation(row, circuits[k], qsim::Observable::pauli_z(0));
          }
          const double ref = acc / static_cast<double>(C);
          worst = std::max(worst, std::abs(ref - y1.data()[((b * K + k) * T + t) * S + s]));
        }
      }
  return {"qlayer.scalar_oracle", worst < 1e-6 && identical,
          "max err " + fmt(worst) + (identical ? ", identical for 1/2/8 workers" : ", worker outputs differ")};
}

CheckOutcome hand_values() {
  auto near = [](double a, double b) { return std::abs(a - b) < 1e-4; };
  bool ok = true;
  std::ostringstream why;
  {
    const Shape s{1, 1, 2, 2};
    const Tensor target(s, {0, 0, 0, 0});
    const Tensor pred(s, {0.01f, 0.01f, 0.01f, 0.01f});
    const Tensor score({1, 1}, {0.5f});
    const double lg = loss_generator(pred, target, score, LossWeights{}).item();
    if (!near(lg, 1.6931)) ok = false, why << " L_G=" << lg;
  }
  {
    const double ld = loss_discriminator(Tensor({1, 1}, {0.5f}), Tensor({1, 1}, {0.5f})).item();
    if (!near(ld, 1.3863)) ok = false, why << " L_adv=" << ld;
  }
  {
    const double cs = abs_cosine(Tensor({1, 1, 1, 2}, {1, 0}), Tensor({1, 1, 1, 2}, {1, 1})).item();
    if (!near(cs, 1 / std::sqrt(2.0))) ok = false, why << " cos=" << cs;
  }
  {
    const std::vector<real> y{0, 0}, yh{0, 1};
    if (!near(mae(y, yh), 0.5) || !near(rmse(y, yh), std::sqrt(0.5))) ok = false, why << " mae/rmse";
  }
  if (!near(psnr_from(1.0, 0.01), 40.0)) ok = false, why << " psnr";
  {
    const std::vector<real> y{0.1f, -0.4f, 0.9f, 0.3f, -0.7f};
    if (!near(ssim(y, y), 1.0)) ok = false, why << " ssim";
  }
  return {"metrics.hand_values", ok, ok ? "L_G, L_adv, L_com, MAE, RMSE, PSNR, SSIM" : why.str()};
}

CheckOutcome psnr_convention(std::ostream& out) {
  const double r = 0.0101, p = 42.0782;
  const double max20 = r * std::pow(10.0, p / 20.0);
  const double max10 = r * std::pow(10.0, p / 10.0);
  const double max_ln = r * std::exp(p / 10.0);
  out << "  PSNR readings for RMSE " << r << ", PSNR " << p << " dB:\n"
      << "    20*log10(MAX/RMSE)  -> MAX = " << fmt(max20) << "\n"
      << "    10*log10(MAX/RMSE)  -> MAX = " << fmt(max10) << "\n"
      << "    10*ln(MAX/RMSE)     -> MAX = " << fmt(max_ln) << "\n";
  const bool ok = max20 >= 1.23 && max20 <= 1.34 && max10 > 10.0 &&
                  std::abs(psnr_from(max20, r) - p) < 1e-9 && psnr_literal_from(10.0, r) < p;
  return {"metrics.psnr_convention", ok,
          "20log10 gives MAX " + fmt(max20) + "; literal 10log10 needs MAX " + fmt(max10) + " > 10"};
}

}  // namespace

std::vector<CheckOutcome> run_selftest(const SelftestOptions& opts, std::ostream& out) {
  RyProvider ry = qsim::ry_matrix;
  if (opts.inject_fault == "ry") {
    ry = [](double th) {
      Matrix2 m = qsim::ry_matrix(th);
      m[0][0] += 1e-3;
      return m;
    };
    out << "  fault injected: Ry(0,0) entry perturbed by 1e-3\n";
  } else if (!opts.inject_fault.empty()) {
    throw std::invalid_argument("unknown fault '" + opts.inject_fault + "' (supported: ry)");
  }

  std::mt19937_64 rng(opts.seed);
  std::vector<CheckOutcome> all;
  all.push_back(ry_unitarity(ry));
  all.push_back(norm_preservation(ry, rng));
  all.push_back(analytic_expectation(ry));
  all.push_back(dense_oracle(rng));
  all.push_back(parameter_shift(rng));
  for (auto& c : autograd_checks(opts.seed)) all.push_back(std::move(c));
  all.push_back(qlayer_oracle(rng));
  all.push_back(hand_values());
  all.push_back(psnr_convention(out));
  for (const auto& c : all) out << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
  return all;
}

}  // namespace qcseis::cli
