#pragma once

// QC-GAN generator/discriminator and QC-UNet, plus their classical twins
// (quantum flag off: the quantum partition is routed through the classical
// path instead).

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qcseis/ops.hpp"
#include "qcseis/qlayer.hpp"

namespace qcseis {

enum class NetKind { Generator, Discriminator, UNet };

std::string to_string(NetKind kind);
NetKind net_kind_from_string(const std::string& name);

struct NetConfig {
  NetKind kind = NetKind::Generator;
  int blocks = 4;               // F_res blocks (generator / discriminator)
  int base_channels = 32;       // C0
  double quantum_fraction = 0.25;
  bool quantum = true;
  int upsample = 2;             // pixel-shuffle factor
  int height = 64;              // patch time samples
  int width = 64;               // patch traces
  std::uint64_t seed = 0;       // weight init
  QuantumLayerConfig qlayer{};  // qlayer.seed keys the circuits

  int quantum_channels() const;
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

struct FeaturePair {
  Tensor classical;
  Tensor quantum;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t cin, std::size_t cout, int kernel, int stride, int padding, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  Tensor weight_, bias_;
  int stride_ = 1, padding_ = 0;
};

class PReLU {
 public:
  PReLU() = default;
  explicit PReLU(std::size_t channels);
  Tensor forward(const Tensor& x) const { return prelu(x, alpha_); }
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  Tensor alpha_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels);
  Tensor forward(const Tensor& x, Mode mode);
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  Tensor gamma_, beta_;
  BatchNormStats stats_;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t fin, std::size_t fout, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const { return linear(x, weight_, bias_); }
  void collect(ParameterList& out, const std::string& prefix) const;
  std::size_t in_features() const { return weight_.dim(1); }

 private:
  Tensor weight_, bias_;
};

/// conv (3x3, stride 1, pad 1) + BN + PReLU.
class ConvUnit {
 public:
  ConvUnit() = default;
  ConvUnit(std::size_t cin, std::size_t cout, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, Mode mode);
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  Conv2d conv_;
  BatchNorm2d bn_;
  PReLU act_;
};

/// Dual-pathway residual block. The input is split into a classical partition
/// (residual cascade of three ConvUnits) and a quantum partition (QuantumConv);
/// the results are concatenated and a 1x1 conv restores `channels`.
class FresBlock {
 public:
  FresBlock(std::size_t channels, std::size_t quantum_channels, bool quantum_on,
            const QuantumLayerConfig& qcfg, std::mt19937_64& rng);

  /// Appends the (classical, quantum) pre-concatenation pair when quantum is on.
  Tensor forward(const Tensor& x, Mode mode, std::vector<FeaturePair>* pairs);
  void collect(ParameterList& out, const std::string& prefix) const;

  std::size_t classical_channels() const { return classical_; }
  std::size_t out_channels() const { return channels_; }
  QuantumConv* quantum_layer() { return qconv_ ? &*qconv_ : nullptr; }

 private:
  std::size_t channels_, classical_;
  ConvUnit phi_[3];
  std::optional<QuantumConv> qconv_;
  Conv2d fuse_;
};

class Network {
 public:
  explicit Network(NetConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Network() = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Named tensors in a stable order; BN running statistics are included as
  /// non-trainable entries.
  virtual ParameterList parameters() const = 0;
  virtual std::vector<QuantumConv*> quantum_layers() = 0;

  const NetConfig& config() const { return cfg_; }
  std::size_t trainable_parameter_count() const;
  void set_workers(int workers);

  /// Pairs recorded by the most recent forward pass, in block order.
  const std::vector<FeaturePair>& complementarity_pairs() const;

 protected:
  void begin_recording() {
    pairs_.clear();
    recorded_ = true;
  }
  std::vector<FeaturePair>* pair_sink() { return &pairs_; }

  NetConfig cfg_;

 private:
  std::vector<FeaturePair> pairs_;
  bool recorded_ = false;
};

/// Stem (stride-2 conv + PReLU) -> L F_res blocks -> global skip ->
/// conv -> pixel shuffle -> conv. Output shape equals input shape.
class Generator : public Network {
 public:
  explicit Generator(NetConfig cfg);
  Tensor forward(const Tensor& x, Mode mode) override;
  ParameterList parameters() const override;
  std::vector<QuantumConv*> quantum_layers() override;

 private:
  Conv2d stem_;
  PReLU stem_act_;
  std::vector<FresBlock> blocks_;
  Conv2d up_conv_, out_conv_;
};

/// Stem -> F_res blocks with 2x2 average pooling between them -> flatten ->
/// linear -> sigmoid. Output [B, 1].
class Discriminator : public Network {
 public:
  explicit Discriminator(NetConfig cfg);
  Tensor forward(const Tensor& x, Mode mode) override;
  ParameterList parameters() const override;
  std::vector<QuantumConv*> quantum_layers() override;

 private:
  Conv2d stem_;
  PReLU stem_act_;
  std::vector<FresBlock> blocks_;
  Linear fc_;
};

/// Three-level encoder/decoder with skip concatenations and an F_res block
/// at the bottleneck.
class UNet : public Network {
 public:
  explicit UNet(NetConfig cfg);
  Tensor forward(const Tensor& x, Mode mode) override;
  ParameterList parameters() const override;
  std::vector<QuantumConv*> quantum_layers() override;

 private:
  ConvUnit enc_[3][2];
  std::optional<FresBlock> bottleneck_;
  Conv2d up_conv_[3];
  ConvUnit dec_[3];
  Conv2d head_;
};

std::unique_ptr<Network> make_network(const NetConfig& cfg);

/// Copy of `cfg` with the network kind replaced.
NetConfig with_kind(NetConfig cfg, NetKind kind);

}  // namespace qcseis
