#include "qcseis/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qcseis/objectives.hpp"
#include "qcseis/ops.hpp"
#include "qcseis/qlayer.hpp"

namespace qcseis {

namespace {

double projected(const Tensor& y, const std::vector<double>& w) {
  double acc = 0;
  const auto d = y.data();
  for (std::size_t i = 0; i < d.size(); ++i) acc += w[i] * static_cast<double>(d[i]);
  return acc;
}

Tensor uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>(u(rng));
  return Tensor(shape, std::move(v), grad);
}

// Values with magnitude in [lo, hi] and random sign, so no element sits on a kink.
Tensor away_from_zero(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::bernoulli_distribution sign(0.5);
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>(sign(rng) ? u(rng) : -u(rng));
  return Tensor(shape, std::move(v), true);
}

// Distinct values spaced far apart relative to the difference step.
Tensor well_separated(const Shape& shape, std::mt19937_64& rng) {
  const std::size_t n = shape_numel(shape);
  std::vector<real> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<real>(-1.0 + 0.05 * static_cast<double>(i));
  std::shuffle(v.begin(), v.end(), rng);
  return Tensor(shape, std::move(v), true);
}

struct OpCase {
  std::string name;
  std::vector<Shape> shapes;
  std::function<std::vector<Tensor>(const Shape&, std::mt19937_64&)> make;
  GradFn fn;
};

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  const std::vector<Shape> maps = {{1, 1, 4, 4}, {2, 2, 4, 6}, {1, 3, 6, 4}, {2, 1, 8, 8}, {3, 2, 4, 4}};

  auto conv_case = [&](const std::string& name, int k, int stride, int pad, bool bias) {
    cases.push_back({name, maps,
                     [=](const Shape& s, std::mt19937_64& rng) {
                       const std::size_t cout = s[1] + 1;
                       std::vector<Tensor> in{uniform(s, rng, -1, 1),
                                              uniform({cout, s[1], std::size_t(k), std::size_t(k)}, rng, -0.5, 0.5)};
                       if (bias) in.push_back(uniform({cout}, rng, -0.5, 0.5));
                       return in;
                     },
                     [=](const std::vector<Tensor>& t) {
                       return conv2d(t[0], t[1], bias ? t[2] : Tensor(), stride, pad);
                     }});
  };
  conv_case("conv2d_3x3", 3, 1, 1, true);
  conv_case("conv2d_3x3_s2", 3, 2, 1, true);
  conv_case("conv2d_1x1_nobias", 1, 1, 0, false);

  cases.push_back({"prelu", maps,
                   [](const Shape& s, std::mt19937_64& rng) {
                     return std::vector<Tensor>{away_from_zero(s, rng, 0.05, 1.0), uniform({s[1]}, rng, 0.1, 0.4)};
                   },
                   [](const std::vector<Tensor>& t) { return prelu(t[0], t[1]); }});

  for (Mode mode : {Mode::Train, Mode::Eval}) {
    cases.push_back({mode == Mode::Train ? "batchnorm2d_train" : "batchnorm2d_eval",
                     {{2, 1, 4, 4}, {2, 2, 4, 6}, {3, 3, 2, 4}, {2, 1, 8, 8}, {4, 2, 3, 3}},
                     [](const Shape& s, std::mt19937_64& rng) {
                       return std::vector<Tensor>{uniform(s, rng, -1, 1), uniform({s[1]}, rng, 0.5, 1.5),
                                                  uniform({s[1]}, rng, -0.5, 0.5)};
                     },
                     [mode](const std::vector<Tensor>& t) {
                       auto stats = BatchNormStats::for_channels(t[0].dim(1));
                       if (mode == Mode::Eval) {
                         for (std::size_t c = 0; c < t[0].dim(1); ++c) {
                           stats.running_mean.data()[c] = static_cast<real>(0.1 * static_cast<double>(c));
                           stats.running_var.data()[c] = static_cast<real>(0.5 + 0.25 * static_cast<double>(c));
                         }
                       }
                       return batchnorm2d(t[0], t[1], t[2], stats, mode);
                     }});
  }

  cases.push_back({"pixel_shuffle",
                   {{1, 4, 2, 2}, {2, 4, 3, 3}, {1, 8, 2, 3}, {2, 12, 2, 2}, {1, 4, 4, 1}},
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return pixel_shuffle(t[0], 2); }});
  cases.push_back({"pixel_unshuffle",
                   {{1, 1, 4, 4}, {2, 1, 6, 6}, {1, 2, 4, 6}, {2, 3, 4, 4}, {1, 1, 8, 2}},
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return pixel_unshuffle(t[0], 2); }});
  const std::vector<Shape> multi = {{1, 2, 3, 3}, {2, 3, 2, 4}, {1, 4, 4, 4}, {2, 5, 2, 2}, {3, 2, 3, 2}};
  cases.push_back({"split_channels", multi,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) {
                     auto [a, b] = split_channels(t[0], 1);
                     return concat_channels(scale(b, 2), a);
                   }});
  cases.push_back({"concat_channels", multi,
                   [](const Shape& s, std::mt19937_64& rng) {
                     Shape s2 = s;
                     s2[1] = 1;
                     return std::vector<Tensor>{uniform(s, rng, -1, 1), uniform(s2, rng, -1, 1)};
                   },
                   [](const std::vector<Tensor>& t) { return concat_channels(t[0], t[1]); }});
  cases.push_back({"linear",
                   {{1, 3}, {2, 5}, {4, 2}, {3, 7}, {2, 16}},
                   [](const Shape& s, std::mt19937_64& rng) {
                     const std::size_t out = s[1] % 3 + 2;
                     return std::vector<Tensor>{uniform(s, rng, -1, 1), uniform({out, s[1]}, rng, -1, 1),
                                                uniform({out}, rng, -1, 1)};
                   },
                   [](const std::vector<Tensor>& t) { return linear(t[0], t[1], t[2]); }});
  cases.push_back({"flatten", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return flatten(t[0]); }});
  cases.push_back({"reshape", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return t[0].reshape({t[0].numel()}); }});
  cases.push_back({"sigmoid", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -3, 3)}; },
                   [](const std::vector<Tensor>& t) { return sigmoid(t[0]); }});
  cases.push_back({"add", maps,
                   [](const Shape& s, std::mt19937_64& rng) {
                     return std::vector<Tensor>{uniform(s, rng, -1, 1), uniform(s, rng, -1, 1)};
                   },
                   [](const std::vector<Tensor>& t) { return add(t[0], t[1]); }});
  cases.push_back({"mul", maps,
                   [](const Shape& s, std::mt19937_64& rng) {
                     return std::vector<Tensor>{uniform(s, rng, -1, 1), uniform(s, rng, -1, 1)};
                   },
                   [](const std::vector<Tensor>& t) { return mul(t[0], t[1]); }});
  cases.push_back({"scale", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return scale(t[0], real{-1.75}); }});
  cases.push_back({"sum", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return sum(t[0]); }});
  cases.push_back({"mean", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return mean(t[0]); }});
  cases.push_back({"nearest_upsample", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return nearest_upsample(t[0], 2, 3); }});
  cases.push_back({"avg_pool2d", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -1, 1)}; },
                   [](const std::vector<Tensor>& t) { return avg_pool2d(t[0], 2); }});
  cases.push_back({"max_pool2d", maps,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{well_separated(s, rng)}; },
                   [](const std::vector<Tensor>& t) { return max_pool2d(t[0], 2); }});

  QuantumLayerConfig qcfg;
  qcfg.seed = 11;
  cases.push_back({"quantum_conv",
                   {{1, 1, 1, 4}, {1, 2, 2, 8}, {2, 1, 2, 6}, {1, 3, 1, 5}, {2, 2, 2, 4}},
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, -2, 2)}; },
                   [qcfg](const std::vector<Tensor>& t) { return QuantumConv(qcfg).forward(t[0]); }});

  cases.push_back({"l1_loss", maps,
                   [](const Shape& s, std::mt19937_64& rng) {
                     Tensor p = uniform(s, rng, -1, 1);
                     Tensor off = away_from_zero(s, rng, 0.1, 1.0);
                     std::vector<real> tv(p.numel());
                     for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = p.data()[i] + off.data()[i];
                     return std::vector<Tensor>{p, Tensor(s, std::move(tv), true)};
                   },
                   [](const std::vector<Tensor>& t) { return l1_loss(t[0], t[1]); }});
  const std::vector<Shape> scores = {{1, 1}, {2, 1}, {4, 1}, {8, 1}, {3, 1}};
  cases.push_back({"neg_log_score", scores,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, 0.1, 0.9)}; },
                   [](const std::vector<Tensor>& t) { return neg_log_score(t[0]); }});
  cases.push_back({"neg_log_one_minus_score", scores,
                   [](const Shape& s, std::mt19937_64& rng) { return std::vector<Tensor>{uniform(s, rng, 0.1, 0.9)}; },
                   [](const std::vector<Tensor>& t) { return neg_log_one_minus_score(t[0]); }});
  cases.push_back({"abs_cosine", multi,
                   [](const Shape& s, std::mt19937_64& rng) {
                     Shape sq = s;
                     sq[1] = 2;
                     return std::vector<Tensor>{uniform(s, rng, -0.5, 1.0), uniform(sq, rng, -0.5, 1.0)};
                   },
                   [](const std::vector<Tensor>& t) { return abs_cosine(t[0], t[1]); }});
  return cases;
}

}  // namespace

GradCheckResult gradcheck(const std::string& name, const GradFn& f_eval, std::vector<Tensor> inputs, double h,
                          double tol, std::uint64_t seed) {
  GradCheckResult res;
  res.name = name;
  res.shape = inputs.empty() ? "[]" : shape_str(inputs.front().shape());

  Tensor y0 = f_eval(inputs);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(y0.numel());
  for (auto& x : w) x = u(rng);
  std::vector<real> wr(w.begin(), w.end());
  const Tensor wt(y0.shape(), wr);

  for (auto& t : inputs) t.zero_grad();
  sum(mul(f_eval(inputs), wt)).backward();

  double diff2 = 0, auto2 = 0, fd2 = 0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    auto data = t.data();
    const std::vector<real> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < data.size(); ++i) {
      // Fourth-order central stencil: truncation error O(h^4).
      const real orig = data[i];
      double f[4];
      const double offsets[4] = {2 * h, h, -h, -2 * h};
      {
        NoGradGuard ng;
        for (int k = 0; k < 4; ++k) {
          data[i] = static_cast<real>(orig + offsets[k]);
          f[k] = projected(f_eval(inputs), w);
        }
      }
      data[i] = orig;
      const double fd = (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * h);
      const double a = analytic[i];
      diff2 += (a - fd) * (a - fd);
      auto2 += a * a;
      fd2 += fd * fd;
    }
  }
  const double denom = std::max({std::sqrt(auto2), std::sqrt(fd2), 1e-12});
  res.rel_error = std::sqrt(diff2) / denom;
  res.passed = std::isfinite(res.rel_error) && res.rel_error < tol;
  return res;
}

std::vector<GradCheckResult> check_all_ops(std::uint64_t seed, double tol) {
  const double h = sizeof(real) == 4 ? 1e-2 : 1e-5;
  std::vector<GradCheckResult> out;
  std::uint64_t k = 0;
  for (const auto& c : op_cases()) {
    for (const auto& s : c.shapes) {
      std::mt19937_64 rng(derive_seed(seed, k++));
      out.push_back(gradcheck(c.name, c.fn, c.make(s, rng), h, tol, derive_seed(seed, k, 7)));
    }
  }
  return out;
}

}  // namespace qcseis
