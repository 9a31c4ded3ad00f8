#include "qcseis/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "qcseis/config.hpp"

namespace qcseis {

namespace {

constexpr char kCkptMagic[4] = {'Q', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;
constexpr int kDivergenceLimit = 3;

constexpr std::uint8_t real_dtype() { return sizeof(real) == 4 ? 0 : 1; }

bool all_finite(std::span<const real> v) {
  return std::all_of(v.begin(), v.end(), [](real x) { return std::isfinite(x); });
}

ParameterList trainable(const ParameterList& all) {
  ParameterList out;
  for (const auto& p : all)
    if (p.trainable) out.push_back(p);
  return out;
}

void zero_all(const Network& net) {
  for (auto& p : net.parameters()) {
    Tensor t = p.tensor;
    if (t.has_grad()) t.zero_grad();
  }
}

// Batch-level MAE / RMSE between two equal-shape tensors.
std::pair<double, double> batch_errors(const Tensor& pred, const Tensor& target) {
  const auto a = pred.data();
  const auto b = target.data();
  return {mae(a, b), rmse(a, b)};
}

Tensor complementarity_or_zero(const std::vector<FeaturePair>& pairs) {
  return pairs.empty() ? Tensor::scalar(0) : loss_complementarity(pairs);
}

std::vector<std::size_t> batch_bounds(std::size_t n, std::size_t bs) {
  // Start offsets of each batch; a trailing batch of one sample is dropped
  // because batch norm needs at least two samples in train mode.
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < n; s += bs) {
    if (n - s >= 2) starts.push_back(s);
  }
  return starts;
}

struct Reader {
  const std::vector<char>& buf;
  std::size_t pos = 0;
  std::string where = "header";

  void need(std::size_t n) {
    if (pos + n > buf.size()) throw CheckpointError("checkpoint truncated in " + where);
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  void bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, buf.data() + pos, n);
    pos += n;
  }
};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

CheckpointEntry make_entry(std::string name, const Shape& shape, std::span<const real> values) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.shape = shape;
  e.dtype = real_dtype();
  if constexpr (sizeof(real) == 4) {
    e.f32.assign(values.begin(), values.end());
  } else {
    e.f64.assign(values.begin(), values.end());
  }
  return e;
}

CheckpointEntry make_entry_f64(std::string name, const Shape& shape, std::span<const double> values) {
  CheckpointEntry e;
  e.name = std::move(name);
  e.shape = shape;
  e.dtype = 1;
  e.f64.assign(values.begin(), values.end());
  return e;
}

std::vector<double> entry_as_double(const CheckpointEntry& e) {
  if (e.dtype == 1) return e.f64;
  return {e.f32.begin(), e.f32.end()};
}

const CheckpointEntry& require(const Checkpoint& ck, const std::string& name, const Shape& shape) {
  const auto* e = ck.find(name);
  if (!e) throw CheckpointError("checkpoint entry '" + name + "' is missing");
  if (e->shape != shape)
    throw CheckpointError("checkpoint entry '" + name + "' has shape " + shape_str(e->shape) + ", expected " +
                          shape_str(shape));
  return *e;
}

std::string describe_mismatch(const json& stored, const json& actual) {
  std::ostringstream os;
  for (const auto& [key, value] : actual.items()) {
    if (!stored.contains(key)) {
      os << " " << key << " missing;";
    } else if (stored.at(key) != value) {
      os << " " << key << ": checkpoint " << stored.at(key).dump() << " vs model " << value.dump() << ";";
    }
  }
  return os.str();
}

json save_optimizer(const Adam& opt, const std::string& prefix, Checkpoint& ck) {
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].tensor.shape();
    ck.entries.push_back(make_entry_f64("opt/" + prefix + "/m/" + params[i].name, shape, opt.first_moments()[i]));
    ck.entries.push_back(make_entry_f64("opt/" + prefix + "/v/" + params[i].name, shape, opt.second_moments()[i]));
  }
  return json{{"steps", opt.steps()}, {"skipped", opt.skipped()}, {"lr", opt.config().lr},
              {"beta1", opt.config().beta1}, {"beta2", opt.config().beta2}, {"eps", opt.config().eps}};
}

void load_optimizer(Adam& opt, const std::string& prefix, const Checkpoint& ck) {
  const auto& state = ck.meta.at("optimizers").at(prefix);
  const auto& params = opt.params();
  std::vector<std::vector<double>> m(params.size()), v(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].tensor.shape();
    m[i] = entry_as_double(require(ck, "opt/" + prefix + "/m/" + params[i].name, shape));
    v[i] = entry_as_double(require(ck, "opt/" + prefix + "/v/" + params[i].name, shape));
  }
  opt.first_moments() = std::move(m);
  opt.second_moments() = std::move(v);
  opt.restore_counters(state.at("steps").get<std::uint64_t>(), state.at("skipped").get<std::uint64_t>());
}

json stats_to_json(const StepStats& s) {
  return json{{"mae", s.mae}, {"rmse", s.rmse}, {"loss_g", s.loss_g}, {"loss_d", s.loss_d}, {"loss_com", s.loss_com}};
}

StepStats stats_from_json(const json& j) {
  StepStats s;
  s.mae = j.at("mae").get<double>();
  s.rmse = j.at("rmse").get<double>();
  s.loss_g = j.at("loss_g").get<double>();
  s.loss_d = j.at("loss_d").get<double>();
  s.loss_com = j.at("loss_com").get<double>();
  return s;
}

}  // namespace

// ---- Adam -----------------------------------------------------------------

void adam_update(std::span<real> param, std::span<const real> grad, std::span<double> m, std::span<double> v,
                 std::uint64_t t, const AdamConfig& cfg) {
  if (param.size() != grad.size() || m.size() != param.size() || v.size() != param.size())
    throw ShapeError("adam_update: buffer sizes differ");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] = static_cast<real>(static_cast<double>(param[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

Adam::Adam(ParameterList params, AdamConfig cfg) : params_(trainable(params)), cfg_(cfg) {
  if (!(cfg_.lr > 0) || !(cfg_.beta1 >= 0 && cfg_.beta1 < 1) || !(cfg_.beta2 >= 0 && cfg_.beta2 < 1) ||
      !(cfg_.eps > 0))
    throw std::invalid_argument("adam: invalid hyperparameters");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

bool Adam::step() {
  for (auto& p : params_) {
    Tensor t = p.tensor;
    if (t.has_grad() && !all_finite(std::as_const(t).grad())) {
      ++skipped_;
      return false;
    }
  }
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].tensor;
    const auto g = t.grad();
    adam_update(t.data(), std::span<const real>(g.data(), g.size()), m_[i], v_[i], t_, cfg_);
  }
  return true;
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    Tensor t = p.tensor;
    if (t.has_grad()) t.zero_grad();
  }
}

double Adam::clip_grad_norm(double max_norm) {
  double sq = 0;
  for (auto& p : params_) {
    Tensor t = p.tensor;
    if (!t.has_grad()) continue;
    for (real g : std::as_const(t).grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (std::isfinite(norm) && norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& p : params_) {
      Tensor t = p.tensor;
      if (!t.has_grad()) continue;
      for (real& g : t.grad()) g = static_cast<real>(g * k);
    }
  }
  return norm;
}

// ---- configuration ----------------------------------------------------------

std::string to_string(Family f) { return f == Family::Gan ? "gan" : "unet"; }

Family family_for_task(Task task) { return task == Task::Lfe ? Family::UNet : Family::Gan; }

double TrainConfig::resolved_lr(Family f) const {
  if (lr) return *lr;
  return f == Family::Gan ? 1e-5 : 1e-4;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("train.batch_size must be >= 2 (batch norm)");
  if (lr && !(*lr > 0 && std::isfinite(*lr))) throw std::invalid_argument("train.lr must be positive");
  if (!(clip_norm > 0)) throw std::invalid_argument("train.clip_norm must be positive");
  if (checkpoint_every < 1) throw std::invalid_argument("train.checkpoint_every must be >= 1");
  if (workers < 1) throw std::invalid_argument("train.workers must be >= 1");
  weights.validate();
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,split,mae,rmse,loss_g,loss_d,loss_com\n";
  os << std::setprecision(10);
  for (const auto& r : rows)
    os << r.epoch << ',' << r.split << ',' << r.mae << ',' << r.rmse << ',' << r.loss_g << ',' << r.loss_d << ','
       << r.loss_com << '\n';
  if (!os) throw IoError("write failed for " + path.string());
}

Batch make_batch(const SeismicDataset& ds, std::span<const std::size_t> indices) {
  const std::size_t n = ds.t * ds.s;
  std::vector<real> x(indices.size() * n), y(indices.size() * n);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& e = ds.entries.at(indices[b]);
    std::copy(e.degraded.data.begin(), e.degraded.data.end(), x.begin() + static_cast<std::ptrdiff_t>(b * n));
    std::copy(e.target.data.begin(), e.target.data.end(), y.begin() + static_cast<std::ptrdiff_t>(b * n));
  }
  const Shape shape{indices.size(), 1, ds.t, ds.s};
  return {Tensor(shape, std::move(x)), Tensor(shape, std::move(y))};
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, 0x5eed, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// ---- checkpoint container ---------------------------------------------------

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    os.write(kCkptMagic, 4);
    put<std::uint32_t>(os, kCkptVersion);
    const std::string blob = ck.meta.dump();
    put<std::uint64_t>(os, blob.size());
    os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.entries.size()));
    for (const auto& e : ck.entries) {
      if (e.name.size() > 0xffff) throw std::invalid_argument("checkpoint entry name too long");
      if (e.shape.size() > 255) throw std::invalid_argument("checkpoint entry rank too large");
      put<std::uint16_t>(os, static_cast<std::uint16_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      put<std::uint8_t>(os, static_cast<std::uint8_t>(e.shape.size()));
      for (auto d : e.shape) put<std::uint64_t>(os, d);
      put<std::uint8_t>(os, e.dtype);
      if (e.dtype == 0) {
        if (e.f32.size() != e.numel()) throw ShapeError("checkpoint entry '" + e.name + "' size mismatch");
        os.write(reinterpret_cast<const char*>(e.f32.data()), static_cast<std::streamsize>(e.f32.size() * 4));
      } else {
        if (e.f64.size() != e.numel()) throw ShapeError("checkpoint entry '" + e.name + "' size mismatch");
        os.write(reinterpret_cast<const char*>(e.f64.data()), static_cast<std::streamsize>(e.f64.size() * 8));
      }
    }
    os.flush();
    if (!os) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r{buf};
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCkptMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic): " + path.string());
  if (const auto v = r.get<std::uint32_t>(); v != kCkptVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
  const auto len = r.get<std::uint64_t>();
  r.where = "config blob";
  r.need(len);
  Checkpoint ck;
  try {
    ck.meta = json::parse(buf.begin() + static_cast<std::ptrdiff_t>(r.pos),
                          buf.begin() + static_cast<std::ptrdiff_t>(r.pos + len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint config blob is corrupt: ") + e.what());
  }
  r.pos += len;
  r.where = "entry count";
  const auto count = r.get<std::uint32_t>();
  ck.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    r.where = "entry #" + std::to_string(i);
    CheckpointEntry e;
    const auto name_len = r.get<std::uint16_t>();
    e.name.resize(name_len);
    r.bytes(e.name.data(), name_len);
    r.where = "entry '" + e.name + "'";
    const auto rank = r.get<std::uint8_t>();
    for (int d = 0; d < rank; ++d) e.shape.push_back(r.get<std::uint64_t>());
    e.dtype = r.get<std::uint8_t>();
    const std::size_t n = e.numel();
    if (e.dtype == 0) {
      r.need(n * 4);
      e.f32.resize(n);
      r.bytes(e.f32.data(), n * 4);
    } else if (e.dtype == 1) {
      r.need(n * 8);
      e.f64.resize(n);
      r.bytes(e.f64.data(), n * 8);
    } else {
      throw CheckpointError("checkpoint entry '" + e.name + "' has unknown dtype " + std::to_string(e.dtype));
    }
    ck.entries.push_back(std::move(e));
  }
  if (r.pos != buf.size()) throw CheckpointError("checkpoint has trailing bytes after the last entry");
  return ck;
}

void export_network(const Network& net, const std::string& prefix, Checkpoint& ck) {
  ck.meta["models"][prefix] = net_config_to_json(net.config());
  for (const auto& p : net.parameters())
    ck.entries.push_back(make_entry(prefix + "/" + p.name, p.tensor.shape(), p.tensor.data()));
  json circuits = json::array();
  auto layers = const_cast<Network&>(net).quantum_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (const auto& c : layers[l]->circuits()) {
      json layout = json::array();
      for (const auto& layer : c.entanglers()) {
        json pairs = json::array();
        for (const auto& [a, b] : layer) pairs.push_back({a, b});
        layout.push_back(pairs);
      }
      circuits.push_back(json{{"layer", l},
                              {"index", c.index()},
                              {"n_qubits", c.n_qubits()},
                              {"depth", c.depth()},
                              {"seed", c.seed()},
                              {"layout", layout}});
      const std::string name = prefix + "/circuit/" + std::to_string(l) + "/" + std::to_string(c.index());
      ck.entries.push_back(make_entry_f64(
          name, {static_cast<std::size_t>(c.depth()), static_cast<std::size_t>(c.n_qubits())}, c.angles()));
    }
  }
  ck.meta["circuits"][prefix] = circuits;
}

void import_network(Network& net, const std::string& prefix, const Checkpoint& ck) {
  if (!ck.meta.contains("models") || !ck.meta["models"].contains(prefix))
    throw CheckpointError("checkpoint has no architecture for '" + prefix + "'");
  const json& stored = ck.meta["models"][prefix];
  const json actual = net_config_to_json(net.config());
  if (stored != actual)
    throw ArchitectureMismatch("checkpoint architecture for '" + prefix + "' differs from the model:" +
                               describe_mismatch(stored, actual));

  // Validate everything first so a bad file never leaves a half-loaded model.
  const auto params = net.parameters();
  std::vector<const CheckpointEntry*> found;
  for (const auto& p : params) found.push_back(&require(ck, prefix + "/" + p.name, p.tensor.shape()));

  auto layers = net.quantum_layers();
  std::vector<std::vector<qsim::RandomCircuit>> circuits(layers.size());
  const json& clist = ck.meta.contains("circuits") && ck.meta["circuits"].contains(prefix)
                          ? ck.meta["circuits"][prefix]
                          : json::array();
  for (const auto& c : clist) {
    const auto l = c.at("layer").get<std::size_t>();
    if (l >= layers.size()) throw CheckpointError("checkpoint circuit references missing quantum layer " + std::to_string(l));
    const int index = c.at("index").get<int>();
    const int nq = c.at("n_qubits").get<int>();
    const int depth = c.at("depth").get<int>();
    const std::string name = prefix + "/circuit/" + std::to_string(l) + "/" + std::to_string(index);
    const auto& e = require(ck, name, {static_cast<std::size_t>(depth), static_cast<std::size_t>(nq)});
    std::vector<qsim::RandomCircuit::Entanglers> layout;
    for (const auto& layer : c.at("layout")) {
      qsim::RandomCircuit::Entanglers pairs;
      for (const auto& pr : layer) pairs.emplace_back(pr.at(0).get<int>(), pr.at(1).get<int>());
      layout.push_back(std::move(pairs));
    }
    try {
      circuits[l].push_back(qsim::RandomCircuit::from_angles(index, nq, c.at("seed").get<std::uint64_t>(),
                                                             entry_as_double(e), std::move(layout)));
    } catch (const std::exception& ex) {
      throw CheckpointError("checkpoint entry '" + name + "': " + ex.what());
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (circuits[l].size() != static_cast<std::size_t>(layers[l]->out_channels()))
      throw CheckpointError("checkpoint holds " + std::to_string(circuits[l].size()) + " circuits for quantum layer " +
                            std::to_string(l) + " of '" + prefix + "'");
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    auto dst = t.data();
    const auto* e = found[i];
    if (e->dtype == 0) {
      std::transform(e->f32.begin(), e->f32.end(), dst.begin(), [](float v) { return static_cast<real>(v); });
    } else {
      std::transform(e->f64.begin(), e->f64.end(), dst.begin(), [](double v) { return static_cast<real>(v); });
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) layers[l]->set_circuits(std::move(circuits[l]));
}

std::uint64_t parameter_hash(const Network& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : net.parameters()) {
    const auto d = p.tensor.data();
    const auto* bytes = reinterpret_cast<const unsigned char*>(d.data());
    for (std::size_t i = 0; i < d.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// ---- Trainer ----------------------------------------------------------------

Trainer::Trainer(Family family, NetConfig model, TrainConfig cfg, TrainerOptions opts)
    : family_(family), cfg_(std::move(cfg)), opts_(std::move(opts)) {
  cfg_.validate();
  model.kind = family == Family::Gan ? NetKind::Generator : NetKind::UNet;
  model_ = make_network(model);
  model_->set_workers(cfg_.workers);
  AdamConfig ac;
  ac.lr = cfg_.resolved_lr(family_);
  opt_model_ = std::make_unique<Adam>(model_->parameters(), ac);
  if (family_ == Family::Gan) {
    disc_ = make_network(with_kind(model, NetKind::Discriminator));
    disc_->set_workers(cfg_.workers);
    opt_disc_ = std::make_unique<Adam>(disc_->parameters(), ac);
  }
}

StepStats Trainer::train_step(const Batch& batch) {
  StepStats st;
  const double lam = cfg_.weights.lambda_com;
  Network& g = *model_;

  if (family_ == Family::UNet) {
    opt_model_->zero_grad();
    Tensor pred = g.forward(batch.degraded, Mode::Train);
    Tensor l1 = l1_loss(pred, batch.target);
    Tensor com = complementarity_or_zero(g.complementarity_pairs());
    Tensor total = lam > 0 ? add(l1, scale(com, static_cast<real>(lam))) : l1;
    std::tie(st.mae, st.rmse) = batch_errors(pred, batch.target);
    st.loss_g = total.item();
    st.loss_com = com.item();
    st.finite = std::isfinite(st.loss_g);
    if (st.finite) {
      total.backward();
      st.clipped = opt_model_->clip_grad_norm(cfg_.clip_norm) > cfg_.clip_norm;
      opt_model_->step();
    }
  } else {
    Network& d = *disc_;
    Tensor fake = g.forward(batch.degraded, Mode::Train);
    const auto g_pairs = g.complementarity_pairs();

    // Discriminator update on real targets and detached generator output.
    opt_disc_->zero_grad();
    Tensor d_real = d.forward(batch.target, Mode::Train);
    auto d_pairs = d.complementarity_pairs();
    Tensor d_fake = d.forward(fake.detach(), Mode::Train);
    const auto& fake_pairs = d.complementarity_pairs();
    d_pairs.insert(d_pairs.end(), fake_pairs.begin(), fake_pairs.end());
    Tensor loss_d = loss_discriminator(d_real, d_fake);
    if (lam > 0 && cfg_.com_in_discriminator && !d_pairs.empty())
      loss_d = add(loss_d, scale(loss_complementarity(d_pairs), static_cast<real>(lam)));
    st.loss_d = loss_d.item();
    bool clipped = false;
    if (std::isfinite(st.loss_d)) {
      loss_d.backward();
      clipped = opt_disc_->clip_grad_norm(cfg_.clip_norm) > cfg_.clip_norm;
      opt_disc_->step();
    }

    // Generator update against the refreshed discriminator.
    opt_model_->zero_grad();
    Tensor score = d.forward(fake, Mode::Train);
    Tensor lg = loss_generator(fake, batch.target, score, cfg_.weights);
    Tensor com = complementarity_or_zero(g_pairs);
    Tensor total = lam > 0 ? add(lg, scale(com, static_cast<real>(lam))) : lg;
    std::tie(st.mae, st.rmse) = batch_errors(fake, batch.target);
    st.loss_g = total.item();
    st.loss_com = com.item();
    if (std::isfinite(st.loss_g)) {
      total.backward();
      clipped = (opt_model_->clip_grad_norm(cfg_.clip_norm) > cfg_.clip_norm) || clipped;
      opt_model_->step();
    }
    zero_all(d);
    st.clipped = clipped;
    st.finite = std::isfinite(st.loss_g) && std::isfinite(st.loss_d);
  }

  ++step_;
  if (st.clipped) ++clip_events_;
  nonfinite_streak_ = st.finite ? 0 : nonfinite_streak_ + 1;
  if (nonfinite_streak_ >= kDivergenceLimit)
    throw DivergenceError("training diverged: non-finite loss for " + std::to_string(kDivergenceLimit) +
                          " consecutive steps (step " + std::to_string(step_) + ")");
  return st;
}

const std::vector<HistoryRow>& Trainer::fit(const SeismicDataset& train, const SeismicDataset* val,
                                            long max_steps) {
  const std::size_t n = train.entries.size();
  if (n < 2) throw std::invalid_argument("training set needs at least two patches");
  if (static_cast<int>(train.t) != model_->config().height || static_cast<int>(train.s) != model_->config().width)
    throw ShapeError("training patches do not match the model's configured dims");
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  long budget = max_steps;
  while (epoch_ < cfg_.epochs) {
    const auto order = epoch_order(n, cfg_.seed, epoch_);
    const auto starts = batch_bounds(n, bs);
    while (batch_cursor_ < starts.size()) {
      if (budget == 0) return history_;
      const std::size_t s0 = starts[batch_cursor_];
      const std::span<const std::size_t> idx(order.data() + s0, std::min(bs, n - s0));
      const StepStats st = train_step(make_batch(train, idx));
      if (st.finite) {
        epoch_sum_.mae += st.mae;
        epoch_sum_.rmse += st.rmse;
        epoch_sum_.loss_g += st.loss_g;
        epoch_sum_.loss_d += st.loss_d;
        epoch_sum_.loss_com += st.loss_com;
        ++epoch_batches_;
      }
      ++batch_cursor_;
      if (budget > 0) --budget;
    }
    finish_epoch(val);
  }
  return history_;
}

void Trainer::finish_epoch(const SeismicDataset* val) {
  const int epoch = epoch_ + 1;
  const double k = epoch_batches_ ? 1.0 / static_cast<double>(epoch_batches_) : 0.0;
  HistoryRow tr{epoch,
                "train",
                epoch_sum_.mae * k,
                epoch_sum_.rmse * k,
                epoch_sum_.loss_g * k,
                epoch_sum_.loss_d * k,
                epoch_sum_.loss_com * k};
  history_.push_back(tr);
  bool improved = false;
  if (val && !val->entries.empty()) {
    HistoryRow vr = validate(*val, epoch);
    history_.push_back(vr);
    if (vr.mae < best_val_mae_) {
      best_val_mae_ = vr.mae;
      improved = true;
    }
  }
  if (opts_.verbose) {
    std::cerr << "epoch " << epoch << " train mae " << tr.mae << " loss_g " << tr.loss_g << " loss_d " << tr.loss_d
              << " loss_com " << tr.loss_com;
    if (val && !val->entries.empty()) std::cerr << " | val mae " << history_.back().mae;
    std::cerr << '\n';
  }
  epoch_ = epoch;
  batch_cursor_ = 0;
  epoch_sum_ = StepStats{};
  epoch_batches_ = 0;

  if (!opts_.out_dir.empty()) {
    std::filesystem::create_directories(opts_.out_dir);
    write_history_csv(opts_.out_dir / "history.csv", history_);
    if (improved) save(opts_.out_dir / "best.qckp");
    if (epoch_ % cfg_.checkpoint_every == 0 || epoch_ == cfg_.epochs) save(opts_.out_dir / "last.qckp");
  }
}

HistoryRow Trainer::validate(const SeismicDataset& ds, int epoch) {
  NoGradGuard guard;
  HistoryRow row{epoch, "val"};
  const std::size_t n = ds.entries.size();
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const double lam = cfg_.weights.lambda_com;
  for (std::size_t s0 = 0; s0 < n; s0 += bs) {
    const std::size_t m = std::min(bs, n - s0);
    const Batch b = make_batch(ds, std::span<const std::size_t>(idx.data() + s0, m));
    Tensor pred = model_->forward(b.degraded, Mode::Eval);
    const double com = complementarity_or_zero(model_->complementarity_pairs()).item();
    const auto [e1, e2] = batch_errors(pred, b.target);
    double lg = 0, ld = 0;
    if (family_ == Family::Gan) {
      Tensor d_fake = disc_->forward(pred, Mode::Eval);
      Tensor d_real = disc_->forward(b.target, Mode::Eval);
      lg = loss_generator(pred, b.target, d_fake, cfg_.weights).item();
      ld = loss_discriminator(d_real, d_fake).item();
    } else {
      lg = l1_loss(pred, b.target).item();
    }
    if (lam > 0) lg += lam * com;
    const double w = static_cast<double>(m) / static_cast<double>(n);
    row.mae += w * e1;
    row.rmse += w * e2 * e2;
    row.loss_g += w * lg;
    row.loss_d += w * ld;
    row.loss_com += w * com;
  }
  row.rmse = std::sqrt(row.rmse);
  return row;
}

void Trainer::set_epochs(int epochs) {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  cfg_.epochs = epochs;
}

void Trainer::set_workers(int workers) {
  cfg_.workers = std::max(1, workers);
  model_->set_workers(cfg_.workers);
  if (disc_) disc_->set_workers(cfg_.workers);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.meta["format"] = "QCKP";
  ck.meta["family"] = to_string(family_);
  ck.meta["models"] = json::object();
  ck.meta["circuits"] = json::object();
  const std::string main = family_ == Family::Gan ? "generator" : "unet";
  export_network(*model_, main, ck);
  if (disc_) export_network(*disc_, "discriminator", ck);
  ck.meta["train"] = train_config_to_json(cfg_);
  ck.meta["optimizers"][main] = save_optimizer(*opt_model_, main, ck);
  if (opt_disc_) ck.meta["optimizers"]["discriminator"] = save_optimizer(*opt_disc_, "discriminator", ck);
  ck.meta["rng"] = json{{"scheme", "epoch order keyed by (seed, epoch)"}, {"seed", cfg_.seed}};
  ck.meta["progress"] = json{{"epoch", epoch_},
                             {"batch_cursor", batch_cursor_},
                             {"global_step", step_},
                             {"clip_events", clip_events_},
                             {"nonfinite_streak", nonfinite_streak_},
                             {"best_val_mae", std::isfinite(best_val_mae_) ? json(best_val_mae_) : json(nullptr)},
                             {"epoch_sum", stats_to_json(epoch_sum_)},
                             {"epoch_batches", epoch_batches_}};
  json hist = json::array();
  for (const auto& r : history_)
    hist.push_back(json{{"epoch", r.epoch},
                        {"split", r.split},
                        {"mae", r.mae},
                        {"rmse", r.rmse},
                        {"loss_g", r.loss_g},
                        {"loss_d", r.loss_d},
                        {"loss_com", r.loss_com}});
  ck.meta["history"] = std::move(hist);
  return ck;
}

void Trainer::save(const std::filesystem::path& path) const { write_checkpoint(path, checkpoint()); }

std::unique_ptr<Trainer> Trainer::resume(const std::filesystem::path& path, TrainerOptions opts) {
  const Checkpoint ck = read_checkpoint(path);
  try {
    const Family family = ck.meta.at("family").get<std::string>() == "gan" ? Family::Gan : Family::UNet;
    const std::string main = family == Family::Gan ? "generator" : "unet";
    const NetConfig model = net_config_from_json(ck.meta.at("models").at(main));
    const TrainConfig cfg = train_config_from_json(ck.meta.at("train"));
    auto t = std::make_unique<Trainer>(family, model, cfg, std::move(opts));
    import_network(*t->model_, main, ck);
    load_optimizer(*t->opt_model_, main, ck);
    if (family == Family::Gan) {
      import_network(*t->disc_, "discriminator", ck);
      load_optimizer(*t->opt_disc_, "discriminator", ck);
    }
    const json& p = ck.meta.at("progress");
    t->epoch_ = p.at("epoch").get<int>();
    t->batch_cursor_ = p.at("batch_cursor").get<std::size_t>();
    t->step_ = p.at("global_step").get<std::uint64_t>();
    t->clip_events_ = p.at("clip_events").get<std::uint64_t>();
    t->nonfinite_streak_ = p.at("nonfinite_streak").get<int>();
    t->best_val_mae_ = p.at("best_val_mae").is_null() ? std::numeric_limits<double>::infinity()
                                                       : p.at("best_val_mae").get<double>();
    t->epoch_sum_ = stats_from_json(p.at("epoch_sum"));
    t->epoch_batches_ = p.at("epoch_batches").get<std::size_t>();
    for (const auto& r : ck.meta.at("history"))
      t->history_.push_back(HistoryRow{r.at("epoch").get<int>(), r.at("split").get<std::string>(),
                                       r.at("mae").get<double>(), r.at("rmse").get<double>(),
                                       r.at("loss_g").get<double>(), r.at("loss_d").get<double>(),
                                       r.at("loss_com").get<double>()});
    return t;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata is incomplete: ") + e.what());
  }
}

EvalReport evaluate(const SeismicDataset& ds, const std::function<Tensor(const Tensor&)>& predict,
                    std::size_t batch_size) {
  NoGradGuard guard;
  EvalReport rep;
  rep.task = to_string(ds.task);
  const std::size_t n = ds.entries.size();
  const std::size_t per = ds.t * ds.s;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t s0 = 0; s0 < n; s0 += batch_size) {
    const std::size_t m = std::min(batch_size, n - s0);
    const Batch b = make_batch(ds, std::span<const std::size_t>(idx.data() + s0, m));
    const Tensor pred = predict(b.degraded);
    if (pred.shape() != b.target.shape())
      throw ShapeError("prediction shape " + shape_str(pred.shape()) + " differs from target " +
                       shape_str(b.target.shape()));
    for (std::size_t i = 0; i < m; ++i) {
      rep.samples.push_back(evaluate_sample(b.target.data().subspan(i * per, per), pred.data().subspan(i * per, per)));
    }
  }
  return rep;
}

}  // namespace qcseis
