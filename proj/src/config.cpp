#include "qcseis/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

namespace qcseis {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_range(const json& j, const char* key, double& lo, double& hi, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + "." + key + ": expected [lo, hi]");
  lo = v[0].get<double>();
  hi = v[1].get<double>();
}

json qlayer_to_json(const QuantumLayerConfig& q) {
  return json{{"n_qubits", q.n_qubits}, {"n_circuits", q.n_circuits}, {"window", q.window},
              {"stride", q.stride},     {"depth", q.depth},           {"seed", q.seed},
              {"input_scale", q.input_scale}};
}

QuantumLayerConfig qlayer_from_json(const json& j) {
  const std::string where = "model.qlayer";
  check_keys(j, {"n_qubits", "n_circuits", "window", "stride", "depth", "seed", "input_scale"}, where);
  QuantumLayerConfig q;
  read(j, "n_qubits", q.n_qubits, where);
  // window and stride follow the register size unless given explicitly
  q.window = q.stride = q.n_qubits;
  read(j, "n_circuits", q.n_circuits, where);
  read(j, "window", q.window, where);
  read(j, "stride", q.stride, where);
  read(j, "depth", q.depth, where);
  read(j, "seed", q.seed, where);
  read(j, "input_scale", q.input_scale, where);
  return q;
}

}  // namespace

json net_config_to_json(const NetConfig& c) {
  return json{{"kind", to_string(c.kind)},
              {"blocks", c.blocks},
              {"base_channels", c.base_channels},
              {"quantum_fraction", c.quantum_fraction},
              {"quantum", c.quantum},
              {"upsample", c.upsample},
              {"height", c.height},
              {"width", c.width},
              {"seed", c.seed},
              {"qlayer", qlayer_to_json(c.qlayer)}};
}

NetConfig net_config_from_json(const json& j) {
  const std::string where = "model";
  check_keys(j, {"kind", "blocks", "base_channels", "quantum_fraction", "quantum", "upsample", "height", "width",
                 "seed", "qlayer"},
             where);
  NetConfig c;
  if (j.contains("kind")) {
    std::string kind;
    read(j, "kind", kind, where);
    try {
      c.kind = net_kind_from_string(kind);
    } catch (const std::exception& e) {
      throw ConfigError(where + ".kind: " + e.what());
    }
  }
  read(j, "blocks", c.blocks, where);
  read(j, "base_channels", c.base_channels, where);
  read(j, "quantum_fraction", c.quantum_fraction, where);
  read(j, "quantum", c.quantum, where);
  read(j, "upsample", c.upsample, where);
  read(j, "height", c.height, where);
  read(j, "width", c.width, where);
  read(j, "seed", c.seed, where);
  if (j.contains("qlayer")) c.qlayer = qlayer_from_json(j.at("qlayer"));
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  json j{{"epochs", c.epochs}, {"batch_size", c.batch_size}};
  j["lr"] = c.lr ? json(*c.lr) : json(nullptr);
  j["lambda_rec"] = c.weights.lambda_rec;
  j["lambda_com"] = c.weights.lambda_com;
  j["com_in_discriminator"] = c.com_in_discriminator;
  j["clip_norm"] = c.clip_norm;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["workers"] = c.workers;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  const std::string where = "train";
  check_keys(j, {"epochs", "batch_size", "lr", "lambda_rec", "lambda_com", "com_in_discriminator", "clip_norm", "seed",
                 "checkpoint_every", "workers"},
             where);
  TrainConfig c;
  read(j, "epochs", c.epochs, where);
  read(j, "batch_size", c.batch_size, where);
  if (j.contains("lr") && !j.at("lr").is_null()) {
    double lr = 0;
    read(j, "lr", lr, where);
    c.lr = lr;
  }
  read(j, "lambda_rec", c.weights.lambda_rec, where);
  read(j, "lambda_com", c.weights.lambda_com, where);
  read(j, "com_in_discriminator", c.com_in_discriminator, where);
  read(j, "clip_norm", c.clip_norm, where);
  read(j, "seed", c.seed, where);
  read(j, "checkpoint_every", c.checkpoint_every, where);
  read(j, "workers", c.workers, where);
  return c;
}

json degradation_to_json(const DegradationSpec& s) {
  return json{{"task", to_string(s.task)},
              {"seed", s.seed},
              {"missing_fraction_range", {s.missing_min, s.missing_max}},
              {"noise_sigma", s.noise_sigma},
              {"input_band_hz", {s.input_band_lo, s.input_band_hi}},
              {"label_band_hz", {s.label_band_lo, s.label_band_hi}},
              {"taper_hz", s.taper_hz}};
}

DegradationSpec degradation_from_json(const json& j) {
  const std::string where = "data";
  DegradationSpec s;
  if (j.contains("task")) {
    std::string task;
    read(j, "task", task, where);
    try {
      s.task = task_from_string(task);
    } catch (const std::exception& e) {
      throw ConfigError(where + ".task: " + e.what());
    }
  }
  read(j, "seed", s.seed, where);
  read_range(j, "missing_fraction_range", s.missing_min, s.missing_max, where);
  read(j, "noise_sigma", s.noise_sigma, where);
  read_range(j, "input_band_hz", s.input_band_lo, s.input_band_hi, where);
  read_range(j, "label_band_hz", s.label_band_lo, s.label_band_hi, where);
  read(j, "taper_hz", s.taper_hz, where);
  return s;
}

json gather_to_json(const GatherParams& g) {
  return json{{"height", g.t},
              {"width", g.s},
              {"dt", g.dt},
              {"dx", g.dx},
              {"n_events", g.n_events},
              {"velocity_range", {g.v_min, g.v_max}},
              {"f0_range", {g.f0_min, g.f0_max}},
              {"amplitude_range", {g.amp_min, g.amp_max}}};
}

GatherParams gather_from_json(const json& j, const GatherParams& defaults) {
  const std::string where = "data";
  GatherParams g = defaults;
  read(j, "height", g.t, where);
  read(j, "width", g.s, where);
  read(j, "dt", g.dt, where);
  read(j, "dx", g.dx, where);
  read(j, "n_events", g.n_events, where);
  read_range(j, "velocity_range", g.v_min, g.v_max, where);
  read_range(j, "f0_range", g.f0_min, g.f0_max, where);
  read_range(j, "amplitude_range", g.amp_min, g.amp_max, where);
  return g;
}

json run_config_to_json(const RunConfig& c) {
  json data = degradation_to_json(c.data.degradation);
  data["dir"] = c.data.dir;
  data["n_patches"] = c.data.n_patches;
  const json gather = gather_to_json(c.data.gather);
  for (const auto& [k, v] : gather.items()) data[k] = v;
  json j;
  j["data"] = std::move(data);
  j["model"] = net_config_to_json(c.model);
  j["train"] = train_config_to_json(c.train);
  j["eval"] = json{{"report", c.eval.report}, {"spectra_dir", c.eval.spectra_dir}};
  j["out_dir"] = c.out_dir;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"data", "model", "train", "eval", "out_dir"}, "config");
  RunConfig c;
  const json empty = json::object();
  const json& data = j.contains("data") ? j.at("data") : empty;
  check_keys(data, {"task", "seed", "missing_fraction_range", "noise_sigma", "input_band_hz", "label_band_hz",
                    "taper_hz", "dir", "n_patches", "height", "width", "dt", "dx", "n_events", "velocity_range",
                    "f0_range", "amplitude_range"},
             "data");
  c.data.degradation = degradation_from_json(data);
  std::size_t t = 64, s = 64;
  read(data, "height", t, "data");
  read(data, "width", s, "data");
  c.data.gather = gather_from_json(data, default_gather_params(c.data.degradation.task, t, s));
  read(data, "dir", c.data.dir, "data");
  read(data, "n_patches", c.data.n_patches, "data");

  const Family fam = c.family();
  const NetKind want = fam == Family::UNet ? NetKind::UNet : NetKind::Generator;
  json model = j.contains("model") ? j.at("model") : empty;
  if (model.is_object()) {
    if (!model.contains("kind")) model["kind"] = to_string(want);
    if (!model.contains("height")) model["height"] = c.data.gather.t;
    if (!model.contains("width")) model["width"] = c.data.gather.s;
  }
  c.model = net_config_from_json(model);
  if (c.model.kind != want)
    throw ConfigError("model.kind '" + to_string(c.model.kind) + "' does not fit task '" +
                      to_string(c.data.degradation.task) + "' (expected '" + to_string(want) + "')");
  if (static_cast<std::size_t>(c.model.height) != c.data.gather.t ||
      static_cast<std::size_t>(c.model.width) != c.data.gather.s)
    throw ConfigError("model.height/width must match data.height/width");

  c.train = train_config_from_json(j.contains("train") ? j.at("train") : empty);

  const json& ev = j.contains("eval") ? j.at("eval") : empty;
  check_keys(ev, {"report", "spectra_dir"}, "eval");
  read(ev, "report", c.eval.report, "eval");
  read(ev, "spectra_dir", c.eval.spectra_dir, "eval");
  read(j, "out_dir", c.out_dir, "config");

  try {
    c.data.degradation.validate();
    if (c.data.gather.t < 8 || c.data.gather.s < 8) throw ShapeError("data.height/width must be at least 8");
    if (c.data.n_patches < 10) throw std::invalid_argument("data.n_patches must be at least 10");
    c.model.validate();
    c.train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

bool apply_seed_override(RunConfig& cfg) {
  const char* env = std::getenv("QCSEIS_SEED");
  if (!env || !*env) return false;
  std::uint64_t seed = 0;
  try {
    std::size_t used = 0;
    seed = std::stoull(env, &used, 0);
    if (env[used] != '\0') throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ConfigError(std::string("QCSEIS_SEED is not an unsigned integer: '") + env + "'");
  }
  cfg.data.degradation.seed = seed;
  cfg.model.seed = seed;
  cfg.model.qlayer.seed = seed;
  cfg.train.seed = seed;
  return true;
}

}  // namespace qcseis
