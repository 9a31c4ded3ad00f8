#include "qcseis/models.hpp"

#include <cmath>

namespace qcseis {

namespace {

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>(dist(rng));
  return Tensor(std::move(shape), std::move(v), true);
}

std::size_t div_exact(std::size_t n, std::size_t d, const char* what) {
  if (n % d != 0) {
    throw ShapeError(std::string(what) + ": " + std::to_string(n) + " not divisible by " +
                     std::to_string(d));
  }
  return n / d;
}

QuantumLayerConfig block_qcfg(const NetConfig& cfg, std::size_t block) {
  QuantumLayerConfig q = cfg.qlayer;
  q.seed = derive_seed(cfg.qlayer.seed, static_cast<std::uint64_t>(cfg.kind), block);
  return q;
}

void check_input(const Tensor& x, const NetConfig& cfg) {
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw ShapeError("network input must be [B, 1, T, S], got " + shape_str(x.shape()));
  }
  if (cfg.kind == NetKind::Discriminator &&
      (x.dim(2) != static_cast<std::size_t>(cfg.height) ||
       x.dim(3) != static_cast<std::size_t>(cfg.width))) {
    throw ShapeError("discriminator configured for " + std::to_string(cfg.height) + "x" +
                     std::to_string(cfg.width) + " patches, got " + shape_str(x.shape()));
  }
}

}  // namespace

std::string to_string(NetKind kind) {
  switch (kind) {
    case NetKind::Generator: return "generator";
    case NetKind::Discriminator: return "discriminator";
    case NetKind::UNet: return "unet";
  }
  return "unknown";
}

NetKind net_kind_from_string(const std::string& name) {
  if (name == "generator") return NetKind::Generator;
  if (name == "discriminator") return NetKind::Discriminator;
  if (name == "unet") return NetKind::UNet;
  throw std::invalid_argument("unknown network kind '" + name + "'");
}

int NetConfig::quantum_channels() const {
  const int q = static_cast<int>(std::lround(quantum_fraction * base_channels));
  return std::clamp(q, 1, base_channels - 1);
}

void NetConfig::validate() const {
  if (blocks < 1 || base_channels < 2 || height < 8 || width < 8) {
    throw std::invalid_argument("network config: blocks >= 1, base_channels >= 2, patch >= 8x8");
  }
  if (!(quantum_fraction > 0.0 && quantum_fraction < 1.0)) {
    throw std::invalid_argument("network config: quantum_fraction must lie in (0, 1)");
  }
  if (upsample != 2) throw std::invalid_argument("network config: upsample factor is fixed at 2");
  qlayer.validate();
  const auto nq = static_cast<std::size_t>(qlayer.n_qubits);
  switch (kind) {
    case NetKind::Generator:
      if (height % 2 || width % 2) throw ShapeError("generator patch dims must be even");
      if (quantum && static_cast<std::size_t>(width / 2) < nq) {
        throw ShapeError("generator trace axis too short for the quantum window");
      }
      break;
    case NetKind::Discriminator: {
      const std::size_t f = std::size_t{1} << blocks;
      div_exact(height, f, "discriminator height");
      div_exact(width, f, "discriminator width");
      if (quantum && static_cast<std::size_t>(width) / f < nq) {
        throw ShapeError("discriminator trace axis too short for the quantum window");
      }
      break;
    }
    case NetKind::UNet:
      div_exact(height, 8, "unet height");
      div_exact(width, 8, "unet width");
      if (quantum && static_cast<std::size_t>(width / 8) < nq) {
        throw ShapeError("unet bottleneck trace axis too short for the quantum window");
      }
      break;
  }
}

Conv2d::Conv2d(std::size_t cin, std::size_t cout, int kernel, int stride, int padding,
               std::mt19937_64& rng)
    : stride_(stride), padding_(padding) {
  const auto k = static_cast<std::size_t>(kernel);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
  weight_ = uniform_tensor({cout, cin, k, k}, bound, rng);
  bias_ = Tensor::zeros({cout}, true);
}

Tensor Conv2d::forward(const Tensor& x) const { return conv2d(x, weight_, bias_, stride_, padding_); }

void Conv2d::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight_, true});
  out.push_back({prefix + ".bias", bias_, true});
}

PReLU::PReLU(std::size_t channels) : alpha_(Tensor::full({channels}, real{0.25}, true)) {}

void PReLU::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".alpha", alpha_, true});
}

BatchNorm2d::BatchNorm2d(std::size_t channels)
    : gamma_(Tensor::full({channels}, real{1}, true)),
      beta_(Tensor::zeros({channels}, true)),
      stats_(BatchNormStats::for_channels(channels)) {}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  return batchnorm2d(x, gamma_, beta_, stats_, mode);
}

void BatchNorm2d::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma_, true});
  out.push_back({prefix + ".beta", beta_, true});
  out.push_back({prefix + ".running_mean", stats_.running_mean, false});
  out.push_back({prefix + ".running_var", stats_.running_var, false});
}

Linear::Linear(std::size_t fin, std::size_t fout, std::mt19937_64& rng) {
  weight_ = uniform_tensor({fout, fin}, 1.0 / std::sqrt(static_cast<double>(fin)), rng);
  bias_ = Tensor::zeros({fout}, true);
}

void Linear::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight_, true});
  out.push_back({prefix + ".bias", bias_, true});
}

ConvUnit::ConvUnit(std::size_t cin, std::size_t cout, std::mt19937_64& rng)
    : conv_(cin, cout, 3, 1, 1, rng), bn_(cout), act_(cout) {}

Tensor ConvUnit::forward(const Tensor& x, Mode mode) {
  return act_.forward(bn_.forward(conv_.forward(x), mode));
}

void ConvUnit::collect(ParameterList& out, const std::string& prefix) const {
  conv_.collect(out, prefix + ".conv");
  bn_.collect(out, prefix + ".bn");
  act_.collect(out, prefix + ".act");
}

FresBlock::FresBlock(std::size_t channels, std::size_t quantum_channels, bool quantum_on,
                     const QuantumLayerConfig& qcfg, std::mt19937_64& rng)
    : channels_(channels), classical_(quantum_on ? channels - quantum_channels : channels) {
  for (auto& phi : phi_) phi = ConvUnit(classical_, classical_, rng);
  std::size_t fused = classical_;
  if (quantum_on) {
    qconv_.emplace(qcfg);
    fused += static_cast<std::size_t>(qconv_->out_channels());
  }
  fuse_ = Conv2d(fused, channels, 1, 1, 0, rng);
}

Tensor FresBlock::forward(const Tensor& x, Mode mode, std::vector<FeaturePair>* pairs) {
  if (x.dim(1) != channels_) throw ShapeError("F_res block channel mismatch");
  Tensor classical_in = x, quantum_in;
  if (qconv_) std::tie(classical_in, quantum_in) = split_channels(x, classical_);
  Tensor h = classical_in;
  for (auto& phi : phi_) h = phi.forward(h, mode);
  Tensor classical = add(classical_in, h);
  if (!qconv_) return fuse_.forward(classical);
  Tensor quantum = qconv_->forward(quantum_in);
  if (pairs) pairs->push_back({classical, quantum});
  return fuse_.forward(concat_channels(classical, quantum));
}

void FresBlock::collect(ParameterList& out, const std::string& prefix) const {
  for (int i = 0; i < 3; ++i) phi_[i].collect(out, prefix + ".phi" + std::to_string(i + 1));
  fuse_.collect(out, prefix + ".fuse");
}

std::size_t Network::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) {
    if (p.trainable) n += p.tensor.numel();
  }
  return n;
}

void Network::set_workers(int workers) {
  for (auto* q : quantum_layers()) q->set_workers(workers);
}

const std::vector<FeaturePair>& Network::complementarity_pairs() const {
  if (!recorded_) throw ContractError("complementarity pairs requested before any forward pass");
  return pairs_;
}

Generator::Generator(NetConfig cfg) : Network(std::move(cfg)) {
  cfg_.kind = NetKind::Generator;
  cfg_.validate();
  std::mt19937_64 rng(derive_seed(cfg_.seed, 1));
  const auto c0 = static_cast<std::size_t>(cfg_.base_channels);
  const auto q = static_cast<std::size_t>(cfg_.quantum_channels());
  const auto r = static_cast<std::size_t>(cfg_.upsample);
  stem_ = Conv2d(1, c0, 3, 2, 1, rng);
  stem_act_ = PReLU(c0);
  for (int l = 0; l < cfg_.blocks; ++l) blocks_.emplace_back(c0, q, cfg_.quantum, block_qcfg(cfg_, l), rng);
  up_conv_ = Conv2d(c0, r * r, 3, 1, 1, rng);
  out_conv_ = Conv2d(1, 1, 3, 1, 1, rng);
}

Tensor Generator::forward(const Tensor& x, Mode mode) {
  check_input(x, cfg_);
  if (x.dim(2) % 2 || x.dim(3) % 2) throw ShapeError("generator input dims must be even");
  begin_recording();
  Tensor x0 = stem_act_.forward(stem_.forward(x));
  Tensor h = x0;
  for (auto& block : blocks_) h = block.forward(h, mode, pair_sink());
  Tensor up = pixel_shuffle(up_conv_.forward(add(x0, h)), cfg_.upsample);
  return out_conv_.forward(up);
}

ParameterList Generator::parameters() const {
  ParameterList out;
  stem_.collect(out, "stem");
  stem_act_.collect(out, "stem_act");
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].collect(out, "block" + std::to_string(l));
  up_conv_.collect(out, "up_conv");
  out_conv_.collect(out, "out_conv");
  return out;
}

std::vector<QuantumConv*> Generator::quantum_layers() {
  std::vector<QuantumConv*> out;
  for (auto& b : blocks_) {
    if (auto* q = b.quantum_layer()) out.push_back(q);
  }
  return out;
}

Discriminator::Discriminator(NetConfig cfg) : Network(std::move(cfg)) {
  cfg_.kind = NetKind::Discriminator;
  cfg_.validate();
  std::mt19937_64 rng(derive_seed(cfg_.seed, 2));
  const auto c0 = static_cast<std::size_t>(cfg_.base_channels);
  const auto q = static_cast<std::size_t>(cfg_.quantum_channels());
  stem_ = Conv2d(1, c0, 3, 2, 1, rng);
  stem_act_ = PReLU(c0);
  for (int l = 0; l < cfg_.blocks; ++l) blocks_.emplace_back(c0, q, cfg_.quantum, block_qcfg(cfg_, l), rng);
  const std::size_t f = std::size_t{1} << cfg_.blocks;
  const std::size_t features = c0 * (static_cast<std::size_t>(cfg_.height) / f) *
                               (static_cast<std::size_t>(cfg_.width) / f);
  fc_ = Linear(features, 1, rng);
}

Tensor Discriminator::forward(const Tensor& x, Mode mode) {
  check_input(x, cfg_);
  begin_recording();
  Tensor h = stem_act_.forward(stem_.forward(x));
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    if (l > 0) h = avg_pool2d(h, 2);
    h = blocks_[l].forward(h, mode, pair_sink());
  }
  Tensor flat = flatten(h);
  if (flat.dim(1) != fc_.in_features()) throw ShapeError("discriminator feature size mismatch");
  return sigmoid(fc_.forward(flat));
}

ParameterList Discriminator::parameters() const {
  ParameterList out;
  stem_.collect(out, "stem");
  stem_act_.collect(out, "stem_act");
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].collect(out, "block" + std::to_string(l));
  fc_.collect(out, "fc");
  return out;
}

std::vector<QuantumConv*> Discriminator::quantum_layers() {
  std::vector<QuantumConv*> out;
  for (auto& b : blocks_) {
    if (auto* q = b.quantum_layer()) out.push_back(q);
  }
  return out;
}

UNet::UNet(NetConfig cfg) : Network(std::move(cfg)) {
  cfg_.kind = NetKind::UNet;
  cfg_.validate();
  std::mt19937_64 rng(derive_seed(cfg_.seed, 3));
  const auto c = static_cast<std::size_t>(cfg_.base_channels);
  const std::size_t width[3] = {c, 2 * c, 4 * c};
  std::size_t cin = 1;
  for (int lvl = 0; lvl < 3; ++lvl) {
    enc_[lvl][0] = ConvUnit(cin, width[lvl], rng);
    enc_[lvl][1] = ConvUnit(width[lvl], width[lvl], rng);
    cin = width[lvl];
  }
  const auto bottleneck_c = width[2];
  const auto q = static_cast<std::size_t>(
      std::clamp<long>(std::lround(cfg_.quantum_fraction * static_cast<double>(bottleneck_c)), 1,
                       static_cast<long>(bottleneck_c) - 1));
  bottleneck_.emplace(bottleneck_c, q, cfg_.quantum, block_qcfg(cfg_, 0), rng);
  std::size_t below = bottleneck_c;
  for (int lvl = 2; lvl >= 0; --lvl) {
    up_conv_[lvl] = Conv2d(below, width[lvl], 3, 1, 1, rng);
    dec_[lvl] = ConvUnit(2 * width[lvl], width[lvl], rng);
    below = width[lvl];
  }
  head_ = Conv2d(c, 1, 1, 1, 0, rng);
}

Tensor UNet::forward(const Tensor& x, Mode mode) {
  check_input(x, cfg_);
  if (x.dim(2) % 8 || x.dim(3) % 8) throw ShapeError("unet input dims must be divisible by 8");
  begin_recording();
  Tensor skips[3];
  Tensor h = x;
  for (int lvl = 0; lvl < 3; ++lvl) {
    h = enc_[lvl][1].forward(enc_[lvl][0].forward(h, mode), mode);
    skips[lvl] = h;
    h = max_pool2d(h, 2);
  }
  h = bottleneck_->forward(h, mode, pair_sink());
  for (int lvl = 2; lvl >= 0; --lvl) {
    h = up_conv_[lvl].forward(nearest_upsample(h, 2, 2));
    h = dec_[lvl].forward(concat_channels(h, skips[lvl]), mode);
  }
  return head_.forward(h);
}

ParameterList UNet::parameters() const {
  ParameterList out;
  for (int lvl = 0; lvl < 3; ++lvl) {
    for (int i = 0; i < 2; ++i) {
      enc_[lvl][i].collect(out, "enc" + std::to_string(lvl) + "." + std::to_string(i));
    }
  }
  bottleneck_->collect(out, "bottleneck");
  for (int lvl = 2; lvl >= 0; --lvl) {
    up_conv_[lvl].collect(out, "up" + std::to_string(lvl));
    dec_[lvl].collect(out, "dec" + std::to_string(lvl));
  }
  head_.collect(out, "head");
  return out;
}

std::vector<QuantumConv*> UNet::quantum_layers() {
  if (auto* q = bottleneck_->quantum_layer()) return {q};
  return {};
}

std::unique_ptr<Network> make_network(const NetConfig& cfg) {
  switch (cfg.kind) {
    case NetKind::Generator: return std::make_unique<Generator>(cfg);
    case NetKind::Discriminator: return std::make_unique<Discriminator>(cfg);
    case NetKind::UNet: return std::make_unique<UNet>(cfg);
  }
  throw std::invalid_argument("unknown network kind");
}

NetConfig with_kind(NetConfig cfg, NetKind kind) {
  cfg.kind = kind;
  return cfg;
}

}  // namespace qcseis
