#include "doctest.h"
#include "qcseis/objectives.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace qcseis;

namespace {

Tensor filled(Shape s, real v, bool grad = false) { return Tensor::full(std::move(s), v, grad); }

Tensor rand_tensor(Shape s, std::mt19937_64& rng, bool grad = false) {
  std::normal_distribution<double> g;
  std::vector<real> v(shape_numel(s));
  for (auto& x : v) x = static_cast<real>(g(rng));
  return Tensor(std::move(s), std::move(v), grad);
}

}  // namespace

TEST_CASE("generator loss hand values") {
  const Tensor p = filled({2, 1, 4, 4}, 0.3f);
  const Tensor d = filled({2, 1}, 0.5f);
  CHECK(loss_generator(p, p, d, {}).item() == doctest::Approx(0.693147).epsilon(1e-5));
  std::vector<real> shifted(32);
  for (std::size_t i = 0; i < 32; ++i) shifted[i] = 0.3f + (i % 2 ? 0.01f : -0.01f);
  CHECK(loss_generator(p, Tensor({2, 1, 4, 4}, shifted), d, {}).item() == doctest::Approx(1.6931).epsilon(1e-4));
  LossWeights adv_only{0.0, 1.0};
  CHECK(loss_generator(p, Tensor({2, 1, 4, 4}, shifted), d, adv_only).item() == doctest::Approx(0.693147));
}

TEST_CASE("discriminator loss hand values and clamping") {
  const Tensor half = filled({3, 1}, 0.5f);
  CHECK(loss_discriminator(half, half).item() == doctest::Approx(1.386294).epsilon(1e-5));
  CHECK(loss_discriminator(filled({1, 1}, 0.9f), filled({1, 1}, 0.1f)).item() ==
        doctest::Approx(0.210721).epsilon(1e-4));
  const double opt = loss_discriminator(filled({1, 1}, 1.0f), filled({1, 1}, 0.0f)).item();
  CHECK(std::isfinite(opt));
  CHECK(opt >= -1e-6);
  CHECK(opt < 1e-5);
  CHECK(std::isfinite(neg_log_score(filled({1, 1}, 0.0f)).item()));
}

TEST_CASE("absolute cosine fixtures") {
  const Tensor x({1, 1, 1, 2}, {1, 0}), q({1, 1, 1, 2}, {1, 1});
  CHECK(abs_cosine(x, q).item() == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-5));
  const Tensor a({1, 1, 1, 4}, {1, 1, 1, 1}), b({1, 1, 1, 4}, {1, -1, 1, -1});
  CHECK(abs_cosine(a, b).item() == doctest::Approx(0.0));
  CHECK(abs_cosine(a, a).item() == doctest::Approx(1.0));
  CHECK(abs_cosine(a, Tensor::zeros({1, 1, 1, 4})).item() == 0.0);
  CHECK(loss_complementarity({}).item() == 0.0);
}

TEST_CASE("complementarity loss is bounded and scale invariant") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> sc(-5, 5);
  for (int i = 0; i < 50; ++i) {
    const Tensor x = rand_tensor({2, 3, 4, 8}, rng), q = rand_tensor({2, 4, 4, 8}, rng);
    const double base = loss_complementarity({{x, q}}).item();
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    double a = sc(rng), b = sc(rng);
    if (std::abs(a) < 0.1) a = 0.7;
    if (std::abs(b) < 0.1) b = -0.4;
    const double scaled = loss_complementarity({{scale(x, a), scale(q, b)}}).item();
    CHECK(std::abs(scaled - base) < 1e-6);
  }
}

TEST_CASE("MAE, RMSE and PSNR hand values") {
  const std::vector<real> y{0, 0}, e{0, 1};
  CHECK(mae(y, e) == doctest::Approx(0.5));
  CHECK(rmse(y, e) == doctest::Approx(std::sqrt(0.5)));
  CHECK(mae(y, y) == 0.0);
  CHECK(psnr_from(1.0, 0.01) == doctest::Approx(40.0));
  CHECK(psnr_from(1.0, 0.1) == doctest::Approx(20.0));
  CHECK(std::abs(psnr_from(1.284, 0.0101) - 42.08) < 0.05);
  CHECK(std::isinf(psnr(e, e)));
  CHECK_THROWS(mae(y, std::vector<real>{1}));
}

TEST_CASE("PSNR convention: only the amplitude reading fits the reported pair") {
  // Invert 20 log10(MAX / RMSE) at the reported RMSE/PSNR pair.
  const double max20 = 0.0101 * std::pow(10.0, 42.0782 / 20.0);
  CHECK(max20 >= 1.23);
  CHECK(max20 <= 1.34);
  // The literal 10 log10 reading needs MAX far beyond any peak-normalized data.
  const double max10 = 0.0101 * std::pow(10.0, 42.0782 / 10.0);
  CHECK(max10 > 10.0);
  CHECK(psnr_literal_from(max10, 0.0101) == doctest::Approx(42.0782).epsilon(1e-6));
}

TEST_CASE("metric properties on random pairs") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    std::vector<real> y(64), p(64);
    for (std::size_t k = 0; k < 64; ++k) {
      y[k] = static_cast<real>(g(rng));
      p[k] = static_cast<real>(y[k] + 0.3 * g(rng));
    }
    CHECK(mae(y, p) <= rmse(y, p) + 1e-9);
    CHECK(ssim(y, y) == 1.0);
  }
  CHECK(psnr_from(1.0, 0.02) > psnr_from(1.0, 0.03));
}

TEST_CASE("SSIM closed forms") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::vector<real> y(256), shifted(256), noise(256);
  for (std::size_t k = 0; k < 256; ++k) y[k] = static_cast<real>(std::sin(0.2 * k));
  for (std::size_t k = 0; k < 256; ++k) shifted[k] = y[k] + 5.0f;
  for (auto& v : noise) v = static_cast<real>(g(rng));
  // Identical variance and structure, so SSIM reduces to the luminance term.
  double my = 0, ms = 0;
  for (std::size_t k = 0; k < 256; ++k) {
    my += y[k];
    ms += shifted[k];
  }
  my /= 256;
  ms /= 256;
  double lo = y[0], hi = y[0];
  for (real v : y) lo = std::min<double>(lo, v), hi = std::max<double>(hi, v);
  const double c1 = std::pow(0.01 * (hi - lo), 2);
  const double lum = (2 * my * ms + c1) / (my * my + ms * ms + c1);
  CHECK(ssim(y, shifted) == doctest::Approx(lum).epsilon(1e-4));
  CHECK(std::abs(ssim(y, noise)) < 0.2);
  CHECK_THROWS(ssim(std::vector<real>(8, 1.0f), std::vector<real>(8, 1.0f)));
}

TEST_CASE("amplitude spectrum bins, DC and Parseval") {
  std::vector<double> tone(256);
  for (std::size_t n = 0; n < 256; ++n) tone[n] = std::sin(2 * std::numbers::pi * 10.0 * n * 0.004);
  const auto s = amplitude_spectrum(tone, 0.004);
  const auto peak = std::max_element(s.magnitude.begin(), s.magnitude.end()) - s.magnitude.begin();
  CHECK(s.frequency_hz[peak] == doctest::Approx(9.765625));
  CHECK(s.frequency_hz.size() == 129);

  const auto dc = amplitude_spectrum(std::vector<double>(16, 2.0), 0.004);
  CHECK(dc.magnitude[0] == doctest::Approx(32.0));
  for (std::size_t k = 1; k < dc.magnitude.size(); ++k) CHECK(dc.magnitude[k] == doctest::Approx(0.0).scale(1.0));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<double> x(200);
  for (auto& v : x) v = g(rng);
  const auto X = dft(x);
  double ex = 0, eX = 0;
  for (double v : x) ex += v * v;
  for (const auto& v : X) eX += std::norm(v);
  CHECK(eX == doctest::Approx(200 * ex).epsilon(1e-6));
  const auto back = inverse_dft_real(X);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).scale(1.0).epsilon(1e-9));
}

TEST_CASE("F-K spectrum of a flat event concentrates at zero wavenumber") {
  const std::size_t T = 32, S = 16;
  std::vector<real> p(T * S, 0);
  for (std::size_t s = 0; s < S; ++s) p[10 * S + s] = 1;
  const auto fk = fk_spectrum(p, T, S, 0.004, 10.0);
  CHECK(fk.rows() == T / 2 + 1);
  CHECK(fk.cols() == S);
  std::size_t zero_col = 0;
  for (std::size_t c = 0; c < fk.cols(); ++c)
    if (fk.wavenumber_per_m[c] == 0.0) zero_col = c;
  for (std::size_t r = 0; r < fk.rows(); ++r)
    for (std::size_t c = 0; c < fk.cols(); ++c)
      if (c != zero_col) CHECK(fk.magnitude[r * S + c] < 1e-9);
  CHECK(*std::max_element(fk.db.begin(), fk.db.end()) == doctest::Approx(0.0));
}

TEST_CASE("band energy and evaluation report") {
  Spectrum s{{0, 1, 2, 3, 4, 5, 6}, {1, 1, 2, 2, 2, 3, 3}};
  CHECK(band_energy(s, 0, 5) == doctest::Approx(1 + 1 + 4 + 4 + 4 + 9));

  EvalReport rep;
  rep.task = "denoise";
  rep.samples = {{0.1, 0.2, 30, 0.9}, {0.3, 0.4, 20, 0.7}};
  const auto agg = rep.aggregate();
  CHECK(agg.mae == doctest::Approx(0.2));
  CHECK(agg.ssim == doctest::Approx(0.8));
  const auto path = std::filesystem::temp_directory_path() / "qcseis_report_test.csv";
  rep.write_csv(path.string());
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "sample_id,mae,rmse,psnr_db,ssim");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 3);
  std::filesystem::remove(path);
}
