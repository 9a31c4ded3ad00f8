#include "qcseis/seisdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"

#include "qcseis/objectives.hpp"

namespace qcseis {

static_assert(std::endian::native == std::endian::little, "SEIS I/O assumes a little-endian host");

namespace {

constexpr char kSeisMagic[4] = {'S', 'E', 'I', 'S'};
constexpr std::uint32_t kSeisVersion = 1;
constexpr int kMaxEventRetries = 100;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(std::string("SEIS: truncated at ") + what);
  return v;
}

}  // namespace

SeismicPatch::SeismicPatch(std::size_t t_, std::size_t s_, double dt_, double dx_)
    : t(t_), s(s_), dt(dt_), dx(dx_), data(t_ * s_, 0.0f) {}

void SeismicPatch::validate() const {
  if (t < 8 || s < 8) throw ShapeError("patch dims must be at least 8x8, got " + std::to_string(t) + "x" + std::to_string(s));
  if (data.size() != t * s) throw ShapeError("patch data size does not match dims");
  if (!(dt > 0) || !(dx > 0)) throw std::invalid_argument("patch sampling intervals must be positive");
  for (float v : data)
    if (!std::isfinite(v)) throw std::domain_error("patch contains non-finite values");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::InterpolationRandom: return "interpolation_random";
    case Task::InterpolationRegular: return "interpolation_regular";
    case Task::Denoise: return "denoise";
    case Task::Lfe: return "lfe";
  }
  return "unknown";
}

Task task_from_string(const std::string& name) {
  if (name == "interpolation_random" || name == "interp_random") return Task::InterpolationRandom;
  if (name == "interpolation_regular" || name == "interp_regular") return Task::InterpolationRegular;
  if (name == "denoise") return Task::Denoise;
  if (name == "lfe") return Task::Lfe;
  throw std::invalid_argument("unknown task '" + name + "'");
}

bool is_interpolation(Task task) {
  return task == Task::InterpolationRandom || task == Task::InterpolationRegular;
}

void DegradationSpec::validate() const {
  if (!(missing_min > 0 && missing_min <= missing_max && missing_max < 1))
    throw std::invalid_argument("missing fraction range must satisfy 0 < min <= max < 1");
  if (!(noise_sigma > 0) || !std::isfinite(noise_sigma)) throw std::invalid_argument("noise_sigma must be positive");
  if (!(input_band_lo >= 0 && input_band_lo < input_band_hi)) throw std::invalid_argument("input band must be ordered");
  if (!(label_band_lo >= 0 && label_band_lo < label_band_hi)) throw std::invalid_argument("label band must be ordered");
  if (!(taper_hz > 0)) throw std::invalid_argument("taper_hz must be positive");
}

double ricker_value(double f0, double t) {
  const double a = std::numbers::pi * std::numbers::pi * f0 * f0 * t * t;
  return (1.0 - 2.0 * a) * std::exp(-a);
}

std::vector<double> ricker(double f0, double dt, double half_width) {
  if (!(f0 > 0) || !(dt > 0)) throw std::invalid_argument("ricker: f0 and dt must be positive");
  if (half_width < 2.0 / f0 - 1e-12) throw std::invalid_argument("ricker: half_width must be >= 2/f0");
  const auto n = static_cast<long>(std::floor(half_width / dt + 1e-9));
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(2 * n + 1));
  for (long i = -n; i <= n; ++i) w.push_back(ricker_value(f0, static_cast<double>(i) * dt));
  return w;
}

SeismicPatch synth_gather(const GatherParams& p, std::uint64_t seed, std::vector<GatherEvent>* events) {
  if (p.n_events < 1) throw std::invalid_argument("synth_gather: n_events must be >= 1");
  if (!(p.v_min > 0 && p.v_min <= p.v_max)) throw std::invalid_argument("synth_gather: bad velocity range");
  if (!(p.f0_min > 0 && p.f0_min <= p.f0_max)) throw std::invalid_argument("synth_gather: bad f0 range");
  SeismicPatch out(p.t, p.s, p.dt, p.dx);
  if (p.t < 8 || p.s < 8) throw ShapeError("synth_gather: dims must be at least 8x8");

  std::mt19937_64 rng(seed);
  const double t_end = static_cast<double>(p.t - 1) * p.dt;
  std::vector<double> acc(p.t * p.s, 0.0);
  if (events) events->clear();

  for (int e = 0; e < p.n_events; ++e) {
    GatherEvent ev{};
    // t0 is drawn past the end of the record on purpose; those draws are
    // rejected so that every event leaves a visible arrival.
    int tries = 0;
    for (;; ++tries) {
      if (tries == kMaxEventRetries) throw std::runtime_error("synth_gather: could not place event inside the window");
      ev.t0 = uniform(rng, 0.05 * t_end, 1.25 * t_end);
      ev.velocity = uniform(rng, p.v_min, p.v_max);
      ev.amplitude = uniform(rng, p.amp_min, p.amp_max);
      ev.f0 = uniform(rng, p.f0_min, p.f0_max);
      ev.apex_trace = static_cast<std::size_t>(rng() % p.s);
      if (ev.t0 <= t_end) break;
    }
    for (std::size_t s = 0; s < p.s; ++s) {
      const double off = (static_cast<double>(s) - static_cast<double>(ev.apex_trace)) * p.dx / ev.velocity;
      const double tau = std::sqrt(ev.t0 * ev.t0 + off * off);
      for (std::size_t t = 0; t < p.t; ++t)
        acc[t * p.s + s] += ev.amplitude * ricker_value(ev.f0, static_cast<double>(t) * p.dt - tau);
    }
    if (events) events->push_back(ev);
  }

  double peak = 0;
  for (double v : acc) peak = std::max(peak, std::abs(v));
  if (!(peak > 0)) throw std::runtime_error("synth_gather: empty gather");
  for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i] / peak);
  return out;
}

SeismicPatch apply_mask(const SeismicPatch& patch, const TraceMask& mask) {
  if (mask.size() != patch.s) throw ShapeError("mask length must equal the trace count");
  SeismicPatch out = patch;
  for (std::size_t t = 0; t < patch.t; ++t)
    for (std::size_t s = 0; s < patch.s; ++s)
      if (!mask[s]) out.at(t, s) = 0.0f;
  return out;
}

std::pair<SeismicPatch, TraceMask> degrade_mask_random(const SeismicPatch& patch, double fraction,
                                                       std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1)) throw std::invalid_argument("missing fraction must lie in (0, 1)");
  const auto drop = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(patch.s)));
  std::vector<std::size_t> idx(patch.s);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  TraceMask mask(patch.s, 1);
  for (std::size_t i = 0; i < drop; ++i) mask[idx[i]] = 0;
  return {apply_mask(patch, mask), mask};
}

std::pair<SeismicPatch, TraceMask> degrade_mask_regular(const SeismicPatch& patch) {
  if (patch.s < 3) throw ShapeError("regular masking needs at least 3 traces");
  TraceMask mask(patch.s, 1);
  for (std::size_t s = 2; s < patch.s; s += 3) mask[s] = 0;
  return {apply_mask(patch, mask), mask};
}

SeismicPatch degrade_noise(const SeismicPatch& patch, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw std::invalid_argument("noise sigma must be non-negative");
  SeismicPatch out = patch;
  if (sigma == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : out.data) v = static_cast<float>(static_cast<double>(v) + noise(rng));
  return out;
}

double band_gain(double f, double lo, double hi, double taper) {
  f = std::abs(f);
  if (f > hi) return 0.0;
  double g = 1.0;
  if (lo > 0) {
    if (f < lo) return 0.0;
    if (f < lo + taper) g = std::min(g, 0.5 * (1.0 - std::cos(std::numbers::pi * (f - lo) / taper)));
  }
  if (f > hi - taper) g = std::min(g, 0.5 * (1.0 + std::cos(std::numbers::pi * (f - (hi - taper)) / taper)));
  return g;
}

std::pair<SeismicPatch, SeismicPatch> bandpass_split(const SeismicPatch& patch, const DegradationSpec& spec) {
  const double nyquist = 0.5 / patch.dt;
  if (spec.input_band_hi > nyquist || spec.label_band_hi > nyquist)
    throw std::invalid_argument("band edge beyond Nyquist (" + std::to_string(nyquist) + " Hz)");
  if (!(spec.input_band_lo < spec.input_band_hi) || !(spec.label_band_lo < spec.label_band_hi))
    throw std::invalid_argument("bands must be ordered");
  if (2 * spec.taper_hz > spec.input_band_hi - spec.input_band_lo)
    throw std::invalid_argument("input band narrower than its two tapers");

  const std::size_t n = patch.t;
  std::vector<double> g_in(n), g_lab(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) / (static_cast<double>(n) * patch.dt);
    g_in[k] = band_gain(f, spec.input_band_lo, spec.input_band_hi, spec.taper_hz);
    g_lab[k] = band_gain(f, spec.label_band_lo, spec.label_band_hi, spec.taper_hz);
  }

  SeismicPatch in = patch, lab = patch;
  std::vector<double> trace(n);
  std::vector<std::complex<double>> a(n), b(n);
  for (std::size_t s = 0; s < patch.s; ++s) {
    for (std::size_t t = 0; t < n; ++t) trace[t] = patch.at(t, s);
    const auto spec_full = dft(trace);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = spec_full[k] * g_in[k];
      b[k] = spec_full[k] * g_lab[k];
    }
    const auto xi = inverse_dft_real(a);
    const auto xl = inverse_dft_real(b);
    for (std::size_t t = 0; t < n; ++t) {
      in.at(t, s) = static_cast<float>(xi[t]);
      lab.at(t, s) = static_cast<float>(xl[t]);
    }
  }
  return {in, lab};
}

DatasetSplit split_counts(std::size_t n) {
  DatasetSplit sp;
  sp.val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n)));
  sp.test = sp.val;
  sp.train = n - sp.val - sp.test;
  return sp;
}

GatherParams default_gather_params(Task task, std::size_t t, std::size_t s) {
  GatherParams g;
  g.t = t;
  g.s = s;
  if (task == Task::Lfe) {
    g.dt = 0.008;
    g.f0_min = g.f0_max = 7.0;
    g.n_events = 4;
  }
  return g;
}

DatasetEntry make_entry(const DegradationSpec& spec, const GatherParams& gather, std::size_t index) {
  const std::uint64_t base = derive_seed(spec.seed, index);
  DatasetEntry e;
  e.target = synth_gather(gather, derive_seed(base, 1));
  switch (spec.task) {
    case Task::InterpolationRandom: {
      std::mt19937_64 rng(derive_seed(base, 3));
      const double f = uniform(rng, spec.missing_min, std::nextafter(spec.missing_max, 1.0));
      auto [deg, mask] = degrade_mask_random(e.target, f, derive_seed(base, 2));
      e.degraded = std::move(deg);
      e.mask = std::move(mask);
      break;
    }
    case Task::InterpolationRegular: {
      auto [deg, mask] = degrade_mask_regular(e.target);
      e.degraded = std::move(deg);
      e.mask = std::move(mask);
      break;
    }
    case Task::Denoise:
      e.degraded = degrade_noise(e.target, spec.noise_sigma, derive_seed(base, 2));
      e.mask.assign(e.target.s, 1);
      break;
    case Task::Lfe: {
      auto [in, lab] = bandpass_split(e.target, spec);
      e.degraded = std::move(in);
      e.target = std::move(lab);
      e.mask.assign(e.target.s, 1);
      break;
    }
  }
  return e;
}

void write_seis(const std::filesystem::path& path, const SeismicDataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kSeisMagic, 4);
  put<std::uint32_t>(os, kSeisVersion);
  put<std::uint64_t>(os, ds.entries.size());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.t));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ds.s));
  put<double>(os, ds.dt);
  put<double>(os, ds.dx);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(ds.task));
  const std::size_t n = ds.t * ds.s;
  for (const auto& e : ds.entries) {
    if (e.target.data.size() != n || e.degraded.data.size() != n || e.mask.size() != ds.s)
      throw ShapeError("dataset entry does not match dataset dims");
    os.write(reinterpret_cast<const char*>(e.target.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    os.write(reinterpret_cast<const char*>(e.degraded.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    os.write(reinterpret_cast<const char*>(e.mask.data()), static_cast<std::streamsize>(ds.s));
  }
  os.flush();
  if (!os) throw IoError("write failed for " + path.string());
}

SeismicDataset read_seis(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kSeisMagic, 4) != 0) throw FormatError("SEIS: bad magic in " + path.string());
  if (const auto v = get<std::uint32_t>(is, "version"); v != kSeisVersion)
    throw FormatError("SEIS: unsupported version " + std::to_string(v));
  SeismicDataset ds;
  const auto count = get<std::uint64_t>(is, "n_patches");
  ds.t = get<std::uint32_t>(is, "T");
  ds.s = get<std::uint32_t>(is, "S");
  ds.dt = get<double>(is, "dt");
  ds.dx = get<double>(is, "dx");
  const auto tag = get<std::uint8_t>(is, "task");
  if (tag > static_cast<std::uint8_t>(Task::Lfe)) throw FormatError("SEIS: unknown task tag " + std::to_string(tag));
  ds.task = static_cast<Task>(tag);
  if (ds.t == 0 || ds.s == 0) throw FormatError("SEIS: zero patch dims");

  const std::size_t n = ds.t * ds.s;
  const std::uintmax_t need = 33 + count * (2 * n * sizeof(float) + ds.s);
  if (std::filesystem::file_size(path) < need) throw FormatError("SEIS: truncated file " + path.string());
  ds.entries.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto& e = ds.entries[i];
    e.target = SeismicPatch(ds.t, ds.s, ds.dt, ds.dx);
    e.degraded = SeismicPatch(ds.t, ds.s, ds.dt, ds.dx);
    e.mask.resize(ds.s);
    is.read(reinterpret_cast<char*>(e.target.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    is.read(reinterpret_cast<char*>(e.degraded.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    is.read(reinterpret_cast<char*>(e.mask.data()), static_cast<std::streamsize>(ds.s));
    if (!is) throw FormatError("SEIS: truncated at patch " + std::to_string(i));
  }
  return ds;
}

BuildResult build_dataset(const DegradationSpec& spec, const GatherParams& gather, std::size_t n_patches,
                          const std::filesystem::path& out_dir) {
  spec.validate();
  if (n_patches < 10) throw std::invalid_argument("build_dataset needs at least 10 patches");
  if (gather.t < 8 || gather.s < 8) throw ShapeError("patch dims must be at least 8x8");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  BuildResult res;
  res.split = split_counts(n_patches);
  const std::pair<const char*, std::size_t> parts[] = {
      {"train.seis", res.split.train}, {"val.seis", res.split.val}, {"test.seis", res.split.test}};
  std::size_t index = 0;
  for (const auto& [name, count] : parts) {
    SeismicDataset ds;
    ds.task = spec.task;
    ds.t = gather.t;
    ds.s = gather.s;
    ds.dt = gather.dt;
    ds.dx = gather.dx;
    ds.entries.reserve(count);
    for (std::size_t i = 0; i < count; ++i) ds.entries.push_back(make_entry(spec, gather, index++));
    const auto path = out_dir / name;
    write_seis(path, ds);
    res.files.push_back(path);
  }

  nlohmann::ordered_json meta;
  meta["format"] = "SEIS";
  meta["version"] = kSeisVersion;
  meta["task"] = to_string(spec.task);
  meta["seed"] = spec.seed;
  meta["n_patches"] = n_patches;
  meta["split"] = {{"train", res.split.train}, {"val", res.split.val}, {"test", res.split.test}};
  meta["degradation"] = {{"missing_fraction_range", {spec.missing_min, spec.missing_max}},
                         {"regular_pattern", "keep 2 drop 1"},
                         {"noise_sigma", spec.noise_sigma},
                         {"input_band_hz", {spec.input_band_lo, spec.input_band_hi}},
                         {"label_band_hz", {spec.label_band_lo, spec.label_band_hi}},
                         {"taper_hz", spec.taper_hz}};
  meta["gather"] = {{"t", gather.t},           {"s", gather.s},         {"dt", gather.dt},
                    {"dx", gather.dx},         {"n_events", gather.n_events},
                    {"velocity_range", {gather.v_min, gather.v_max}},
                    {"f0_range", {gather.f0_min, gather.f0_max}},
                    {"amplitude_range", {gather.amp_min, gather.amp_max}}};
  const auto side = out_dir / "dataset.json";
  std::ofstream js(side, std::ios::trunc);
  if (!js) throw IoError("cannot write " + side.string());
  js << meta.dump(2) << '\n';
  if (!js) throw IoError("write failed for " + side.string());
  res.files.push_back(side);
  return res;
}

}  // namespace qcseis
