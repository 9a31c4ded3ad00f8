#include "qcseis/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace qcseis {

namespace {

using RowMat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, kh, kw, ho, wo;
  int stride, pad;
  std::size_t k() const { return cin * kh * kw; }
  std::size_t p() const { return ho * wo; }
};

void im2col(const real* x, const ConvGeometry& g, real* col) {
  const auto p = g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        real* row = col + ((c * g.kh + i) * g.kw + j) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(i);
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(j);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.h) &&
                                ix < static_cast<long>(g.w);
            row[oy * g.wo + ox] = inside ? x[(c * g.h + iy) * g.w + ix] : real{0};
          }
        }
      }
    }
  }
}

void col2im_add(const real* col, const ConvGeometry& g, real* gx) {
  const auto p = g.p();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const real* row = col + ((c * g.kh + i) * g.kw + j) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(i);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(j);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            gx[(c * g.h + iy) * g.w + ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

std::size_t spatial(const Tensor& t) { return t.dim(2) * t.dim(3); }

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  require_rank(input, 4, "conv2d");
  require_rank(weight, 4, "conv2d");
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (weight.dim(1) != g.cin) {
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " does not match input " +
                     shape_str(input.shape()));
  }
  if (g.kh % 2 == 0 || g.kw % 2 == 0) throw ShapeError("conv2d: kernel dims must be odd");
  const long ph = static_cast<long>(g.h) + 2 * padding - static_cast<long>(g.kh);
  const long pw = static_cast<long>(g.w) + 2 * padding - static_cast<long>(g.kw);
  if (ph < 0 || pw < 0) throw ShapeError("conv2d: kernel larger than padded input");
  g.ho = static_cast<std::size_t>(ph / stride + 1);
  g.wo = static_cast<std::size_t>(pw / stride + 1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    throw ShapeError("conv2d: bias must have shape [C_out]");
  }

  const auto k = g.k();
  const auto p = g.p();
  std::vector<real> out(g.batch * g.cout * p);
  std::vector<real> col(k * p);
  const ConstMatMap w(weight.data().data(), g.cout, k);
  for (std::size_t b = 0; b < g.batch; ++b) {
    im2col(input.data().data() + b * g.cin * g.h * g.w, g, col.data());
    MatMap o(out.data() + b * g.cout * p, g.cout, p);
    o.noalias() = w * ConstMatMap(col.data(), k, p);
    if (bias.defined()) {
      for (std::size_t c = 0; c < g.cout; ++c) o.row(c).array() += bias.data()[c];
    }
  }

  Tensor x = input, wt = weight, bs = bias;
  std::vector<Tensor> parents{x, wt};
  if (bs.defined()) parents.push_back(bs);
  return make_result({g.batch, g.cout, g.ho, g.wo}, std::move(out), std::move(parents),
                     [x, wt, bs, g](TensorImpl& o) mutable {
                       const auto k = g.k();
                       const auto p = g.p();
                       std::vector<real> col(k * p);
                       std::vector<real> gcol(k * p);
                       const ConstMatMap w(wt.data().data(), g.cout, k);
                       for (std::size_t b = 0; b < g.batch; ++b) {
                         const ConstMatMap go(o.grad.data() + b * g.cout * p, g.cout, p);
                         if (wt.requires_grad()) {
                           im2col(x.data().data() + b * g.cin * g.h * g.w, g, col.data());
                           MatMap gw(wt.grad().data(), g.cout, k);
                           gw.noalias() += go * ConstMatMap(col.data(), k, p).transpose();
                         }
                         if (bs.defined() && bs.requires_grad()) {
                           auto gb = bs.grad();
                           for (std::size_t c = 0; c < g.cout; ++c) {
                             double acc = 0.0;
                             for (std::size_t i = 0; i < p; ++i) acc += go(c, i);
                             gb[c] += static_cast<real>(acc);
                           }
                         }
                         if (x.requires_grad()) {
                           MatMap gc(gcol.data(), k, p);
                           gc.noalias() = w.transpose() * go;
                           col2im_add(gcol.data(), g, x.grad().data() + b * g.cin * g.h * g.w);
                         }
                       }
                     });
}

Tensor prelu(const Tensor& input, const Tensor& alpha) {
  if (input.rank() < 2) throw ShapeError("prelu: input needs a channel axis");
  const std::size_t channels = input.dim(1);
  if (alpha.numel() != channels) throw ShapeError("prelu: alpha length must equal channel count");
  const std::size_t batch = input.dim(0);
  const std::size_t inner = input.numel() / (batch * channels);
  std::vector<real> out(input.numel());
  const auto x = input.data();
  const auto a = alpha.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t c = (i / inner) % channels;
    out[i] = x[i] > 0 ? x[i] : a[c] * x[i];
  }
  Tensor xt = input, at = alpha;
  return make_result(input.shape(), std::move(out), {xt, at},
                     [xt, at, channels, inner](TensorImpl& o) mutable {
                       const auto x = xt.data();
                       const auto a = at.data();
                       const bool gx_on = xt.requires_grad();
                       const bool ga_on = at.requires_grad();
                       std::vector<double> ga(channels, 0.0);
                       real* gx = gx_on ? xt.grad().data() : nullptr;
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         const std::size_t c = (i / inner) % channels;
                         const real g = o.grad[i];
                         if (x[i] > 0) {
                           if (gx_on) gx[i] += g;
                         } else {
                           if (gx_on) gx[i] += a[c] * g;
                           ga[c] += static_cast<double>(g) * x[i];
                         }
                       }
                       if (ga_on) {
                         auto gat = at.grad();
                         for (std::size_t c = 0; c < channels; ++c) gat[c] += static_cast<real>(ga[c]);
                       }
                     });
}

BatchNormStats BatchNormStats::for_channels(std::size_t channels) {
  BatchNormStats s;
  s.running_mean = Tensor::zeros({channels});
  s.running_var = Tensor::full({channels}, real{1});
  return s;
}

Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormStats& stats, Mode mode) {
  require_rank(input, 4, "batchnorm2d");
  const std::size_t batch = input.dim(0), channels = input.dim(1), hw = spatial(input);
  if (gamma.numel() != channels || beta.numel() != channels ||
      stats.running_mean.numel() != channels || stats.running_var.numel() != channels) {
    throw ShapeError("batchnorm2d: per-channel parameter length mismatch");
  }
  if (mode == Mode::Train && batch < 2) {
    throw ShapeError("batchnorm2d: degenerate batch of 1 in train mode");
  }
  const std::size_t n = batch * hw;
  const auto x = input.data();
  std::vector<double> mu(channels), inv_std(channels);
  if (mode == Mode::Train) {
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < hw; ++i) s += x[(b * channels + c) * hw + i];
      const double m = s / static_cast<double>(n);
      double v = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = x[(b * channels + c) * hw + i] - m;
          v += d * d;
        }
      const double var = v / static_cast<double>(n);
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + stats.eps);
      auto rm = stats.running_mean.data();
      auto rv = stats.running_var.data();
      const double unbiased = v / static_cast<double>(n - 1);
      rm[c] = static_cast<real>((1.0 - stats.momentum) * rm[c] + stats.momentum * m);
      rv[c] = static_cast<real>((1.0 - stats.momentum) * rv[c] + stats.momentum * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mu[c] = stats.running_mean.data()[c];
      inv_std[c] = 1.0 / std::sqrt(static_cast<double>(stats.running_var.data()[c]) + stats.eps);
    }
  }

  std::vector<real> out(input.numel());
  const auto gm = gamma.data();
  const auto bt = beta.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t idx = (b * channels + c) * hw + i;
        out[idx] = static_cast<real>(gm[c] * ((x[idx] - mu[c]) * inv_std[c]) + bt[c]);
      }

  Tensor xt = input, gt = gamma, btt = beta;
  const bool train = mode == Mode::Train;
  return make_result(
      input.shape(), std::move(out), {xt, gt, btt},
      [xt, gt, btt, mu, inv_std, batch, channels, hw, train](TensorImpl& o) mutable {
        const auto x = xt.data();
        const auto gm = gt.data();
        const double n = static_cast<double>(batch * hw);
        for (std::size_t c = 0; c < channels; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t idx = (b * channels + c) * hw + i;
              const double xhat = (x[idx] - mu[c]) * inv_std[c];
              sum_g += o.grad[idx];
              sum_gx += o.grad[idx] * xhat;
            }
          if (gt.requires_grad()) gt.grad()[c] += static_cast<real>(sum_gx);
          if (btt.requires_grad()) btt.grad()[c] += static_cast<real>(sum_g);
          if (!xt.requires_grad()) continue;
          auto gx = xt.grad();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < hw; ++i) {
              const std::size_t idx = (b * channels + c) * hw + i;
              if (train) {
                const double xhat = (x[idx] - mu[c]) * inv_std[c];
                gx[idx] += static_cast<real>(gm[c] * inv_std[c] / n *
                                             (n * o.grad[idx] - sum_g - xhat * sum_gx));
              } else {
                gx[idx] += static_cast<real>(gm[c] * inv_std[c] * o.grad[idx]);
              }
            }
        }
      });
}

namespace {

// Index map shared by pixel_shuffle / pixel_unshuffle: for each output element
// of the shuffled layout, the flat index in the unshuffled layout.
std::vector<std::size_t> shuffle_map(std::size_t batch, std::size_t c, std::size_t h,
                                     std::size_t w, std::size_t r) {
  std::vector<std::size_t> map(batch * c * h * r * w * r);
  std::size_t o = 0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h * r; ++y)
        for (std::size_t x = 0; x < w * r; ++x) {
          const std::size_t src_c = ch * r * r + (y % r) * r + (x % r);
          map[o++] = ((b * c * r * r + src_c) * h + y / r) * w + x / r;
        }
  return map;
}

Tensor gather(const Tensor& input, Shape out_shape, std::vector<std::size_t> map) {
  std::vector<real> out(map.size());
  const auto x = input.data();
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = x[map[i]];
  Tensor xt = input;
  return make_result(std::move(out_shape), std::move(out), {xt},
                     [xt, map = std::move(map)](TensorImpl& o) mutable {
                       if (!xt.requires_grad()) return;
                       auto gx = xt.grad();
                       for (std::size_t i = 0; i < map.size(); ++i) gx[map[i]] += o.grad[i];
                     });
}

Tensor scatter(const Tensor& input, Shape out_shape, const std::vector<std::size_t>& map) {
  // Inverse of gather for a bijective map.
  std::vector<std::size_t> inverse(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) inverse[map[i]] = i;
  return gather(input, std::move(out_shape), std::move(inverse));
}

}  // namespace

Tensor pixel_shuffle(const Tensor& input, int r) {
  require_rank(input, 4, "pixel_shuffle");
  if (r < 1) throw ShapeError("pixel_shuffle: factor must be positive");
  const std::size_t rr = static_cast<std::size_t>(r) * r;
  if (input.dim(1) % rr != 0) {
    throw ShapeError("pixel_shuffle: channels " + std::to_string(input.dim(1)) +
                     " not divisible by r^2 = " + std::to_string(rr));
  }
  const std::size_t b = input.dim(0), c = input.dim(1) / rr, h = input.dim(2), w = input.dim(3);
  return gather(input, {b, c, h * r, w * r}, shuffle_map(b, c, h, w, r));
}

Tensor pixel_unshuffle(const Tensor& input, int r) {
  require_rank(input, 4, "pixel_unshuffle");
  if (r < 1 || input.dim(2) % r != 0 || input.dim(3) % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial dims not divisible by r");
  }
  const std::size_t b = input.dim(0), c = input.dim(1), h = input.dim(2) / r, w = input.dim(3) / r;
  return scatter(input, {b, c * r * r, h, w}, shuffle_map(b, c, h, w, r));
}

std::pair<Tensor, Tensor> split_channels(const Tensor& input, std::size_t at) {
  require_rank(input, 4, "split_channels");
  const std::size_t b = input.dim(0), c = input.dim(1), hw = spatial(input);
  if (at == 0 || at >= c) throw ShapeError("split_channels: split point must lie in (0, C)");
  auto slice = [&](std::size_t c0, std::size_t c1) {
    std::vector<std::size_t> map;
    map.reserve(b * (c1 - c0) * hw);
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t ch = c0; ch < c1; ++ch)
        for (std::size_t i = 0; i < hw; ++i) map.push_back((bi * c + ch) * hw + i);
    return gather(input, {b, c1 - c0, input.dim(2), input.dim(3)}, std::move(map));
  };
  return {slice(0, at), slice(at, c)};
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: mismatched dims " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = spatial(a);
  std::vector<real> out(batch * (ca + cb) * hw);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    std::copy_n(a.data().data() + bi * ca * hw, ca * hw, out.data() + bi * (ca + cb) * hw);
    std::copy_n(b.data().data() + bi * cb * hw, cb * hw, out.data() + (bi * (ca + cb) + ca) * hw);
  }
  Tensor at = a, bt = b;
  return make_result({batch, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {at, bt},
                     [at, bt, batch, ca, cb, hw](TensorImpl& o) mutable {
                       for (std::size_t bi = 0; bi < batch; ++bi) {
                         const real* g = o.grad.data() + bi * (ca + cb) * hw;
                         if (at.requires_grad()) {
                           real* ga = at.grad().data() + bi * ca * hw;
                           for (std::size_t i = 0; i < ca * hw; ++i) ga[i] += g[i];
                         }
                         if (bt.requires_grad()) {
                           real* gb = bt.grad().data() + bi * cb * hw;
                           for (std::size_t i = 0; i < cb * hw; ++i) gb[i] += g[ca * hw + i];
                         }
                       }
                     });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t batch = input.dim(0), fin = input.dim(1), fout = weight.dim(0);
  if (weight.dim(1) != fin) {
    throw ShapeError("linear: weight " + shape_str(weight.shape()) + " does not match input " +
                     shape_str(input.shape()));
  }
  if (bias.defined() && bias.numel() != fout) throw ShapeError("linear: bias length mismatch");
  std::vector<real> out(batch * fout);
  MatMap o(out.data(), batch, fout);
  const ConstMatMap x(input.data().data(), batch, fin);
  const ConstMatMap w(weight.data().data(), fout, fin);
  o.noalias() = x * w.transpose();
  if (bias.defined()) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < fout; ++j) o(b, j) += bias.data()[j];
  }
  Tensor xt = input, wt = weight, bs = bias;
  std::vector<Tensor> parents{xt, wt};
  if (bs.defined()) parents.push_back(bs);
  return make_result({batch, fout}, std::move(out), std::move(parents),
                     [xt, wt, bs, batch, fin, fout](TensorImpl& o) mutable {
                       const ConstMatMap go(o.grad.data(), batch, fout);
                       if (xt.requires_grad()) {
                         MatMap gx(xt.grad().data(), batch, fin);
                         gx.noalias() += go * ConstMatMap(wt.data().data(), fout, fin);
                       }
                       if (wt.requires_grad()) {
                         MatMap gw(wt.grad().data(), fout, fin);
                         gw.noalias() += go.transpose() * ConstMatMap(xt.data().data(), batch, fin);
                       }
                       if (bs.defined() && bs.requires_grad()) {
                         auto gb = bs.grad();
                         for (std::size_t j = 0; j < fout; ++j) {
                           double acc = 0.0;
                           for (std::size_t b = 0; b < batch; ++b) acc += go(b, j);
                           gb[j] += static_cast<real>(acc);
                         }
                       }
                     });
}

Tensor flatten(const Tensor& input) {
  if (input.rank() < 1) throw ShapeError("flatten: empty shape");
  const std::size_t b = input.dim(0);
  return input.reshape({b, input.numel() / b});
}

Tensor sigmoid(const Tensor& input) {
  std::vector<real> out(input.numel());
  const auto x = input.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<real>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
  }
  Tensor xt = input;
  auto y = std::make_shared<std::vector<real>>(out);
  return make_result(input.shape(), std::move(out), {xt}, [xt, y](TensorImpl& o) mutable {
    if (!xt.requires_grad()) return;
    auto gx = xt.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double s = (*y)[i];
      gx[i] += static_cast<real>(o.grad[i] * s * (1.0 - s));
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  Tensor at = a, bt = b;
  return make_result(a.shape(), std::move(out), {at, bt}, [at, bt](TensorImpl& o) mutable {
    for (Tensor* t : {&at, &bt}) {
      if (!t->requires_grad()) continue;
      auto g = t->grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  Tensor at = a, bt = b;
  return make_result(a.shape(), std::move(out), {at, bt}, [at, bt](TensorImpl& o) mutable {
    if (at.requires_grad()) {
      auto g = at.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bt.data()[i];
    }
    if (bt.requires_grad()) {
      auto g = bt.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * at.data()[i];
    }
  });
}

Tensor scale(const Tensor& input, real factor) {
  std::vector<real> out(input.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = input.data()[i] * factor;
  Tensor xt = input;
  return make_result(input.shape(), std::move(out), {xt}, [xt, factor](TensorImpl& o) mutable {
    if (!xt.requires_grad()) return;
    auto g = xt.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
  });
}

namespace {
Tensor scaled_sum(const Tensor& input, double factor) {
  double acc = 0.0;
  for (real v : input.data()) acc += v;
  Tensor xt = input;
  return make_result({1}, {static_cast<real>(acc * factor)}, {xt},
                     [xt, factor](TensorImpl& o) mutable {
                       if (!xt.requires_grad()) return;
                       const real g = static_cast<real>(o.grad[0] * factor);
                       for (auto& v : xt.grad()) v += g;
                     });
}
}  // namespace

Tensor sum(const Tensor& input) { return scaled_sum(input, 1.0); }

Tensor mean(const Tensor& input) {
  if (input.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scaled_sum(input, 1.0 / static_cast<double>(input.numel()));
}

Tensor nearest_upsample(const Tensor& input, int factor_t, int factor_s) {
  require_rank(input, 4, "nearest_upsample");
  if (factor_t < 1 || factor_s < 1) throw ShapeError("nearest_upsample: factors must be positive");
  const std::size_t bc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ho = h * factor_t, wo = w * factor_s;
  std::vector<std::size_t> map(bc * ho * wo);
  std::size_t o = 0;
  for (std::size_t p = 0; p < bc; ++p)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t x = 0; x < wo; ++x) map[o++] = (p * h + y / factor_t) * w + x / factor_s;
  return gather(input, {input.dim(0), input.dim(1), ho, wo}, std::move(map));
}

Tensor avg_pool2d(const Tensor& input, int k) {
  require_rank(input, 4, "avg_pool2d");
  const std::size_t bc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  if (k < 1 || h % k != 0 || w % k != 0) throw ShapeError("avg_pool2d: dims not divisible by k");
  const std::size_t ho = h / k, wo = w / k;
  const real inv = real{1} / static_cast<real>(k * k);
  std::vector<real> out(bc * ho * wo);
  const auto x = input.data();
  for (std::size_t p = 0; p < bc; ++p)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xo = 0; xo < wo; ++xo) {
        real acc = 0;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) acc += x[(p * h + y * k + i) * w + xo * k + j];
        out[(p * ho + y) * wo + xo] = acc * inv;
      }
  Tensor xt = input;
  return make_result({input.dim(0), input.dim(1), ho, wo}, std::move(out), {xt},
                     [xt, bc, h, w, ho, wo, k, inv](TensorImpl& o) mutable {
                       if (!xt.requires_grad()) return;
                       auto gx = xt.grad();
                       for (std::size_t p = 0; p < bc; ++p)
                         for (std::size_t y = 0; y < ho; ++y)
                           for (std::size_t xo = 0; xo < wo; ++xo) {
                             const real g = o.grad[(p * ho + y) * wo + xo] * inv;
                             for (int i = 0; i < k; ++i)
                               for (int j = 0; j < k; ++j) gx[(p * h + y * k + i) * w + xo * k + j] += g;
                           }
                     });
}

Tensor max_pool2d(const Tensor& input, int k) {
  require_rank(input, 4, "max_pool2d");
  const std::size_t bc = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  if (k < 1 || h % k != 0 || w % k != 0) throw ShapeError("max_pool2d: dims not divisible by k");
  const std::size_t ho = h / k, wo = w / k;
  std::vector<std::size_t> argmax(bc * ho * wo);
  std::vector<real> out(argmax.size());
  const auto x = input.data();
  for (std::size_t p = 0; p < bc; ++p)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xo = 0; xo < wo; ++xo) {
        std::size_t best = (p * h + y * k) * w + xo * k;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            const std::size_t idx = (p * h + y * k + i) * w + xo * k + j;
            if (x[idx] > x[best]) best = idx;
          }
        argmax[(p * ho + y) * wo + xo] = best;
        out[(p * ho + y) * wo + xo] = x[best];
      }
  Tensor xt = input;
  return make_result({input.dim(0), input.dim(1), ho, wo}, std::move(out), {xt},
                     [xt, argmax = std::move(argmax)](TensorImpl& o) mutable {
                       if (!xt.requires_grad()) return;
                       auto gx = xt.grad();
                       for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += o.grad[i];
                     });
}

}  // namespace qcseis
