#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the library's numerical kernels.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

// Dense row-major complex matrix.
struct Dense {
  std::size_t n = 0;
  std::vector<cplx> a;
  explicit Dense(std::size_t n_ = 0) : n(n_), a(n_ * n_) {}
  static Dense identity(std::size_t n) {
    Dense d(n);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = 1.0;
    return d;
  }
  cplx& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
  cplx operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }
};

inline Dense matmul(const Dense& x, const Dense& y) {
  Dense z(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k) {
      const cplx v = x(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < x.n; ++j) z(i, j) += v * y(k, j);
    }
  return z;
}

inline Dense kron(const Dense& x, const Dense& y) {
  Dense z(x.n * y.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.n; ++j)
      for (std::size_t k = 0; k < y.n; ++k)
        for (std::size_t l = 0; l < y.n; ++l) z(i * y.n + k, j * y.n + l) = x(i, j) * y(k, l);
  return z;
}

inline Dense ry(double theta) {
  Dense m(2);
  m(0, 0) = std::cos(theta / 2);
  m(0, 1) = -std::sin(theta / 2);
  m(1, 0) = std::sin(theta / 2);
  m(1, 1) = std::cos(theta / 2);
  return m;
}

// Embeds a one-qubit gate on qubit q of an n-qubit register where qubit 0 is
// the least significant bit: the full operator is I (x) ... (x) G (x) ... (x) I
// with qubit n-1 leftmost.
inline Dense embed(const Dense& g, int q, int n) {
  Dense full = Dense::identity(1);
  for (int k = n - 1; k >= 0; --k) full = kron(full, k == q ? g : Dense::identity(2));
  return full;
}

inline Dense cnot(int control, int target, int n) {
  const std::size_t dim = std::size_t{1} << n;
  Dense m(dim);
  for (std::size_t b = 0; b < dim; ++b) {
    const std::size_t out = (b >> control & 1u) ? b ^ (std::size_t{1} << target) : b;
    m(out, b) = 1.0;
  }
  return m;
}

inline std::vector<cplx> matvec(const Dense& m, const std::vector<cplx>& v) {
  std::vector<cplx> out(m.n);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.n; ++j) out[i] += m(i, j) * v[j];
  return out;
}

// Full unitary of `depth` layers: Ry on every qubit, then CNOTs in order.
inline Dense circuit_unitary(int n, const std::vector<std::vector<double>>& angles,
                             const std::vector<std::vector<std::pair<int, int>>>& cnots) {
  Dense u = Dense::identity(std::size_t{1} << n);
  for (std::size_t l = 0; l < angles.size(); ++l) {
    for (int q = 0; q < n; ++q) u = matmul(embed(ry(angles[l][q]), q, n), u);
    for (const auto& [c, t] : cnots[l]) u = matmul(cnot(c, t, n), u);
  }
  return u;
}

inline std::vector<cplx> encoded(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<cplx> v(std::size_t{1} << n);
  v[0] = 1.0;
  for (int q = 0; q < n; ++q) v = matvec(embed(ry(x[q]), q, n), v);
  return v;
}

inline double z_expect(const std::vector<cplx>& v, int q) {
  double acc = 0;
  for (std::size_t k = 0; k < v.size(); ++k) acc += ((k >> q) & 1u ? -1.0 : 1.0) * std::norm(v[k]);
  return acc;
}

// Two-point central difference of a scalar function of a vector.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// Textbook Adam on one scalar.
struct ScalarAdam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace oracle
