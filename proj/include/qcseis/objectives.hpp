#pragma once

// Training losses, restoration metrics and spectral diagnostics.

#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qcseis/models.hpp"
#include "qcseis/tensor.hpp"

namespace qcseis {

struct LossWeights {
  double lambda_rec = 100.0;
  double lambda_com = 1.0;
  void validate() const;
};

inline constexpr double kScoreClamp = 1e-7;
inline constexpr double kCosineEps = 1e-8;

/// mean |pred - target|.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// -mean log(clamp(score)).
Tensor neg_log_score(const Tensor& score);
/// -mean log(1 - clamp(score)).
Tensor neg_log_one_minus_score(const Tensor& score);

/// Generator objective: -mean log D(G(x)) + lambda_rec * mean |G(x) - target|.
Tensor loss_generator(const Tensor& pred, const Tensor& target, const Tensor& d_score,
                      const LossWeights& w);

/// Negated discriminator objective: -(mean log d_real + mean log(1 - d_fake)).
Tensor loss_discriminator(const Tensor& d_real, const Tensor& d_fake);

/// Absolute cosine similarity between a classical map [B, Cx, T, S] and a
/// quantum map [B, Cq, T, S]. Both are averaged over channels and flattened
/// per sample; the result is averaged over samples. Value in [0, 1].
Tensor abs_cosine(const Tensor& classical, const Tensor& quantum);

/// Mean abs_cosine over all pairs; an empty list gives 0.
Tensor loss_complementarity(const std::vector<FeaturePair>& pairs);

double mae(std::span<const real> y, std::span<const real> y_hat);
double rmse(std::span<const real> y, std::span<const real> y_hat);

/// 20 log10(MAX / RMSE), MAX = max |y|. +infinity when RMSE is 0.
double psnr(std::span<const real> y, std::span<const real> y_hat);
double psnr_from(double max_amplitude, double rmse_value);
/// The printed metric form 10 log10(MAX / RMSE), kept for comparison.
double psnr_literal_from(double max_amplitude, double rmse_value);

/// Single global-window SSIM with c1 = (0.01 L)^2, c2 = (0.03 L)^2 where
/// L = max(y) - min(y). Zero dynamic range throws.
double ssim(std::span<const real> y, std::span<const real> y_hat);

struct SampleMetrics {
  double mae = 0, rmse = 0, psnr_db = 0, ssim = 0;
};

SampleMetrics evaluate_sample(std::span<const real> y, std::span<const real> y_hat);

struct EvalReport {
  std::string task;
  std::vector<SampleMetrics> samples;
  SampleMetrics aggregate() const;
  /// Columns sample_id, mae, rmse, psnr_db, ssim; last row is the aggregate.
  void write_csv(const std::string& path) const;
};

struct Spectrum {
  std::vector<double> frequency_hz;
  std::vector<double> magnitude;
};

/// |DFT| at non-negative frequencies f_k = k / (N dt).
Spectrum amplitude_spectrum(std::span<const double> trace, double dt);

/// Full complex DFT (length N), used by the filters and spectra.
std::vector<std::complex<double>> dft(std::span<const double> x);
std::vector<double> inverse_dft_real(std::span<const std::complex<double>> spectrum);

struct FkSpectrum {
  std::vector<double> frequency_hz;     // rows, non-negative
  std::vector<double> wavenumber_per_m;  // columns, centred (negative first)
  std::vector<double> magnitude;         // row-major |F|
  std::vector<double> db;                // 20 log10(|F| / max |F|)
  std::size_t rows() const { return frequency_hz.size(); }
  std::size_t cols() const { return wavenumber_per_m.size(); }
};

/// 2-D magnitude spectrum of a [T, S] patch (row-major, time major).
FkSpectrum fk_spectrum(std::span<const real> patch, std::size_t t, std::size_t s, double dt, double dx);

/// Sum of |X(f)|^2 for f in [f_lo, f_hi] over the non-negative spectrum.
double band_energy(const Spectrum& spectrum, double f_lo, double f_hi);

}  // namespace qcseis
