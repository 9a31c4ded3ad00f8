#include "qcseis/objectives.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace qcseis {

namespace {

void require_same(std::span<const real> a, std::span<const real> b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": length mismatch");
  if (a.empty()) throw ShapeError(std::string(what) + ": empty input");
}

double clamp_score(double s) { return std::clamp(s, kScoreClamp, 1.0 - kScoreClamp); }

// -mean log(f(s)) where f is s or 1 - s, clamped.
Tensor neg_log_mean(const Tensor& score, bool complement) {
  const auto s = score.data();
  const double n = static_cast<double>(s.size());
  if (s.empty()) throw ShapeError("score tensor is empty");
  double acc = 0.0;
  for (real v : s) {
    const double c = clamp_score(v);
    acc += std::log(complement ? 1.0 - c : c);
  }
  Tensor st = score;
  return make_result({1}, {static_cast<real>(-acc / n)}, {st},
                     [st, complement, n](TensorImpl& o) mutable {
                       if (!st.requires_grad()) return;
                       const auto s = st.data();
                       auto g = st.grad();
                       for (std::size_t i = 0; i < s.size(); ++i) {
                         const double v = s[i];
                         if (v < kScoreClamp || v > 1.0 - kScoreClamp) continue;
                         const double d = complement ? 1.0 / (n * (1.0 - v)) : -1.0 / (n * v);
                         g[i] += static_cast<real>(o.grad[0] * d);
                       }
                     });
}

std::vector<double> channel_mean(const Tensor& t, std::size_t b) {
  const std::size_t c = t.dim(1), p = t.dim(2) * t.dim(3);
  std::vector<double> m(p, 0.0);
  const real* base = t.data().data() + b * c * p;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < p; ++i) m[i] += base[ch * p + i];
  for (auto& v : m) v /= static_cast<double>(c);
  return m;
}

double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

void LossWeights::validate() const {
  if (!(std::isfinite(lambda_rec) && lambda_rec >= 0 && std::isfinite(lambda_com) && lambda_com >= 0)) {
    throw std::invalid_argument("loss weights must be finite and non-negative");
  }
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  const auto p = pred.data();
  const auto t = target.data();
  const double n = static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(static_cast<double>(p[i]) - t[i]);
  Tensor pt = pred, tt = target;
  return make_result({1}, {static_cast<real>(acc / n)}, {pt, tt}, [pt, tt, n](TensorImpl& o) mutable {
    const auto p = pt.data();
    const auto t = tt.data();
    const double g = o.grad[0] / n;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = static_cast<double>(p[i]) - t[i];
      const double s = d > 0 ? g : (d < 0 ? -g : 0.0);
      if (pt.requires_grad()) pt.grad()[i] += static_cast<real>(s);
      if (tt.requires_grad()) tt.grad()[i] -= static_cast<real>(s);
    }
  });
}

Tensor neg_log_score(const Tensor& score) { return neg_log_mean(score, false); }
Tensor neg_log_one_minus_score(const Tensor& score) { return neg_log_mean(score, true); }

Tensor loss_generator(const Tensor& pred, const Tensor& target, const Tensor& d_score,
                      const LossWeights& w) {
  w.validate();
  Tensor adv = neg_log_score(d_score);
  if (w.lambda_rec == 0.0) return adv;
  return add(adv, scale(l1_loss(pred, target), static_cast<real>(w.lambda_rec)));
}

Tensor loss_discriminator(const Tensor& d_real, const Tensor& d_fake) {
  return add(neg_log_score(d_real), neg_log_one_minus_score(d_fake));
}

Tensor abs_cosine(const Tensor& classical, const Tensor& quantum) {
  if (classical.rank() != 4 || quantum.rank() != 4 || classical.dim(0) != quantum.dim(0) ||
      classical.dim(2) != quantum.dim(2) || classical.dim(3) != quantum.dim(3)) {
    throw ShapeError("abs_cosine: maps must agree on batch and spatial dims: " +
                     shape_str(classical.shape()) + " vs " + shape_str(quantum.shape()));
  }
  const std::size_t batch = classical.dim(0);
  struct PerSample {
    std::vector<double> x, q;
    double dot, nx, nq;
  };
  auto per = std::make_shared<std::vector<PerSample>>(batch);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    auto& s = (*per)[b];
    s.x = channel_mean(classical, b);
    s.q = channel_mean(quantum, b);
    s.dot = std::inner_product(s.x.begin(), s.x.end(), s.q.begin(), 0.0);
    s.nx = norm2(s.x);
    s.nq = norm2(s.q);
    total += std::abs(s.dot) / (std::max(s.nx, kCosineEps) * std::max(s.nq, kCosineEps));
  }
  Tensor xt = classical, qt = quantum;
  return make_result(
      {1}, {static_cast<real>(total / static_cast<double>(batch))}, {xt, qt},
      [xt, qt, per, batch](TensorImpl& o) mutable {
        const std::size_t p = xt.dim(2) * xt.dim(3);
        const std::size_t cx = xt.dim(1), cq = qt.dim(1);
        for (std::size_t b = 0; b < batch; ++b) {
          const auto& s = (*per)[b];
          if (s.dot == 0.0) continue;
          const double sign = s.dot > 0 ? 1.0 : -1.0;
          const double ex = std::max(s.nx, kCosineEps), eq = std::max(s.nq, kCosineEps);
          const double g = o.grad[0] / static_cast<double>(batch) * sign / (ex * eq);
          // d|cos|/dx = sign * (q / (ex eq) - dot x / (nx^3 nq)) when nx > eps.
          const double kx = s.nx > kCosineEps ? s.dot / (s.nx * s.nx) : 0.0;
          const double kq = s.nq > kCosineEps ? s.dot / (s.nq * s.nq) : 0.0;
          if (xt.requires_grad()) {
            real* gx = xt.grad().data() + b * cx * p;
            for (std::size_t i = 0; i < p; ++i) {
              const real d = static_cast<real>(g * (s.q[i] - kx * s.x[i]) / static_cast<double>(cx));
              for (std::size_t c = 0; c < cx; ++c) gx[c * p + i] += d;
            }
          }
          if (qt.requires_grad()) {
            real* gq = qt.grad().data() + b * cq * p;
            for (std::size_t i = 0; i < p; ++i) {
              const real d = static_cast<real>(g * (s.x[i] - kq * s.q[i]) / static_cast<double>(cq));
              for (std::size_t c = 0; c < cq; ++c) gq[c * p + i] += d;
            }
          }
        }
      });
}

Tensor loss_complementarity(const std::vector<FeaturePair>& pairs) {
  if (pairs.empty()) return Tensor::scalar(0);
  Tensor total = abs_cosine(pairs[0].classical, pairs[0].quantum);
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    total = add(total, abs_cosine(pairs[i].classical, pairs[i].quantum));
  }
  return scale(total, static_cast<real>(1.0 / static_cast<double>(pairs.size())));
}

double mae(std::span<const real> y, std::span<const real> y_hat) {
  require_same(y, y_hat, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(static_cast<double>(y[i]) - y_hat[i]);
  return acc / static_cast<double>(y.size());
}

double rmse(std::span<const real> y, std::span<const real> y_hat) {
  require_same(y, y_hat, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(y[i]) - y_hat[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

double psnr_from(double max_amplitude, double rmse_value) {
  if (rmse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(max_amplitude / rmse_value);
}

double psnr_literal_from(double max_amplitude, double rmse_value) {
  if (rmse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_amplitude / rmse_value);
}

double psnr(std::span<const real> y, std::span<const real> y_hat) {
  const double e = rmse(y, y_hat);
  double peak = 0.0;
  for (real v : y) peak = std::max(peak, std::abs(static_cast<double>(v)));
  return psnr_from(peak, e);
}

double ssim(std::span<const real> y, std::span<const real> y_hat) {
  require_same(y, y_hat, "ssim");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double range = static_cast<double>(*hi) - *lo;
  if (!(range > 0.0)) throw std::domain_error("ssim: reference has zero dynamic range");
  const double n = static_cast<double>(y.size());
  double my = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mh += y_hat[i];
  }
  my /= n;
  mh /= n;
  double vy = 0.0, vh = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dy = y[i] - my, dh = y_hat[i] - mh;
    vy += dy * dy;
    vh += dh * dh;
    cov += dy * dh;
  }
  vy /= n;
  vh /= n;
  cov /= n;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  return ((2 * my * mh + c1) * (2 * cov + c2)) / ((my * my + mh * mh + c1) * (vy + vh + c2));
}

SampleMetrics evaluate_sample(std::span<const real> y, std::span<const real> y_hat) {
  SampleMetrics m;
  m.mae = mae(y, y_hat);
  m.rmse = rmse(y, y_hat);
  m.psnr_db = psnr(y, y_hat);
  m.ssim = std::clamp(ssim(y, y_hat), 0.0, 1.0);
  return m;
}

SampleMetrics EvalReport::aggregate() const {
  SampleMetrics a;
  if (samples.empty()) return a;
  for (const auto& s : samples) {
    a.mae += s.mae;
    a.rmse += s.rmse;
    a.psnr_db += s.psnr_db;
    a.ssim += s.ssim;
  }
  const double n = static_cast<double>(samples.size());
  a.mae /= n;
  a.rmse /= n;
  a.psnr_db /= n;
  a.ssim /= n;
  return a;
}

void EvalReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path);
  out << "sample_id,mae,rmse,psnr_db,ssim\n" << std::setprecision(10);
  auto row = [&out](const std::string& id, const SampleMetrics& m) {
    out << id << ',' << m.mae << ',' << m.rmse << ',';
    if (std::isinf(m.psnr_db)) {
      out << "inf";
    } else {
      out << m.psnr_db;
    }
    out << ',' << m.ssim << '\n';
  };
  for (std::size_t i = 0; i < samples.size(); ++i) row(std::to_string(i), samples[i]);
  row("aggregate", aggregate());
  if (!out) throw IoError("failed writing report " + path);
}

std::vector<std::complex<double>> dft(std::span<const double> x) {
  Eigen::FFT<double> fft;
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  return out;
}

std::vector<double> inverse_dft_real(std::span<const std::complex<double>> spectrum) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(spectrum.begin(), spectrum.end());
  std::vector<std::complex<double>> out;
  fft.inv(out, in);
  std::vector<double> re(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) re[i] = out[i].real();
  return re;
}

Spectrum amplitude_spectrum(std::span<const double> trace, double dt) {
  if (trace.size() < 2 || !(dt > 0)) throw std::invalid_argument("amplitude_spectrum: need N >= 2, dt > 0");
  const auto full = dft(trace);
  const std::size_t n = trace.size();
  Spectrum s;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    s.frequency_hz.push_back(static_cast<double>(k) / (static_cast<double>(n) * dt));
    s.magnitude.push_back(std::abs(full[k]));
  }
  return s;
}

double band_energy(const Spectrum& spectrum, double f_lo, double f_hi) {
  double e = 0.0;
  for (std::size_t k = 0; k < spectrum.frequency_hz.size(); ++k) {
    const double f = spectrum.frequency_hz[k];
    if (f >= f_lo && f <= f_hi) e += spectrum.magnitude[k] * spectrum.magnitude[k];
  }
  return e;
}

FkSpectrum fk_spectrum(std::span<const real> patch, std::size_t t, std::size_t s, double dt, double dx) {
  if (patch.size() != t * s || t < 2 || s < 2) throw ShapeError("fk_spectrum: bad patch dims");
  Eigen::FFT<double> fft;
  const std::size_t rows = t / 2 + 1;
  // Time transform per trace, then trace transform per kept frequency.
  std::vector<std::complex<double>> tf(rows * s);
  std::vector<double> col(t);
  std::vector<std::complex<double>> colf;
  for (std::size_t j = 0; j < s; ++j) {
    for (std::size_t i = 0; i < t; ++i) col[i] = patch[i * s + j];
    fft.fwd(colf, col);
    for (std::size_t r = 0; r < rows; ++r) tf[r * s + j] = colf[r];
  }
  FkSpectrum out;
  out.magnitude.resize(rows * s);
  std::vector<std::complex<double>> row(s), rowf;
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(tf.begin() + static_cast<long>(r * s), s, row.begin());
    fft.fwd(rowf, row);
    for (std::size_t j = 0; j < s; ++j) {
      // Centre zero wavenumber: column c holds bin (c - s/2) mod s.
      const std::size_t src = (j + s - s / 2) % s;
      out.magnitude[r * s + j] = std::abs(rowf[src]);
    }
    out.frequency_hz.push_back(static_cast<double>(r) / (static_cast<double>(t) * dt));
  }
  for (std::size_t j = 0; j < s; ++j) {
    const double k = static_cast<double>(static_cast<long>(j) - static_cast<long>(s / 2));
    out.wavenumber_per_m.push_back(k / (static_cast<double>(s) * dx));
  }
  const double peak = *std::max_element(out.magnitude.begin(), out.magnitude.end());
  out.db.resize(out.magnitude.size());
  for (std::size_t i = 0; i < out.db.size(); ++i) {
    out.db[i] = peak > 0 ? 20.0 * std::log10(std::max(out.magnitude[i] / peak, 1e-12)) : -240.0;
  }
  return out;
}

}  // namespace qcseis
