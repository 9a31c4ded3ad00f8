#pragma once

// Differentiable operators. The set is closed: these are the ops the
// generator, discriminator and UNet are built from, each with a backward rule
// that is finite-difference checked in tests/test_ops.cpp.
//
// Feature maps use [batch, channel, time, trace] layout.

#include <utility>

#include "qcseis/tensor.hpp"

namespace qcseis {

enum class Mode { Train, Eval };

/// Cross-correlation. Output size follows floor((H + 2p - k) / stride) + 1;
/// a kernel larger than the padded input is a shape error. `bias` may be
/// undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding);

/// Per-channel negative slope. Subgradient at exactly 0 is alpha.
Tensor prelu(const Tensor& input, const Tensor& alpha);

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormStats for_channels(std::size_t channels);
};

/// Train mode normalizes by batch statistics and updates `stats`; eval mode
/// uses the running statistics.
Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormStats& stats, Mode mode);

/// [B, C*r*r, H, W] -> [B, C, H*r, W*r].
Tensor pixel_shuffle(const Tensor& input, int r);
/// Inverse rearrangement of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& input, int r);

std::pair<Tensor, Tensor> split_channels(const Tensor& input, std::size_t at);
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// [B, F] x [F_out, F]^T + bias.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
/// [B, ...] -> [B, prod(...)].
Tensor flatten(const Tensor& input);

Tensor sigmoid(const Tensor& input);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& input, real factor);

/// Scalar reductions; accumulation runs sequentially in double.
Tensor sum(const Tensor& input);
Tensor mean(const Tensor& input);

/// Repeats each element `factor_t` times along time and `factor_s` times
/// along trace.
Tensor nearest_upsample(const Tensor& input, int factor_t, int factor_s);
/// Non-overlapping k x k pooling; spatial dims must be divisible by k.
Tensor avg_pool2d(const Tensor& input, int k);
Tensor max_pool2d(const Tensor& input, int k);

}  // namespace qcseis
