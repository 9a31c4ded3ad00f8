#include "doctest.h"
#include "qcseis/objectives.hpp"
#include "qcseis/seisdata.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

using namespace qcseis;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qcseis_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

SeismicPatch small_gather(std::uint64_t seed) {
  GatherParams g;
  g.t = 32;
  g.s = 16;
  return synth_gather(g, seed);
}

}  // namespace

TEST_CASE("ricker wavelet shape") {
  const double f0 = 7, dt = 0.004, hw = 2.0 / f0;
  const auto w = ricker(f0, dt, hw);
  const std::size_t mid = w.size() / 2;
  CHECK(w.size() % 2 == 1);
  CHECK(w[mid] == 1.0);
  for (std::size_t k = 1; k <= mid; ++k) CHECK(w[mid - k] == doctest::Approx(w[mid + k]));
  CHECK_THROWS(ricker(7, dt, 0.1));

  // Dominant frequency within one DFT bin of f0 on a zero-padded trace.
  std::vector<double> trace(1024, 0.0);
  std::copy(w.begin(), w.end(), trace.begin());
  const auto s = amplitude_spectrum(trace, dt);
  const auto peak = std::max_element(s.magnitude.begin(), s.magnitude.end()) - s.magnitude.begin();
  const double bin = 1.0 / (1024 * dt);
  CHECK(std::abs(s.frequency_hz[peak] - f0) <= bin);
}

TEST_CASE("synthetic gathers are seeded, normalized and well formed") {
  const auto a = small_gather(3), b = small_gather(3), c = small_gather(4);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  float peak = 0;
  for (float v : a.data) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(1.0f));

  GatherParams flat;
  flat.t = 64;
  flat.s = 8;
  flat.n_events = 1;
  flat.v_min = flat.v_max = 1e12;
  const auto f = synth_gather(flat, 1);
  for (std::size_t t = 0; t < f.t; ++t)
    for (std::size_t s = 1; s < f.s; ++s) CHECK(f.at(t, s) == doctest::Approx(f.at(t, 0)));
}

TEST_CASE("event apex lands at t0 on the apex trace") {
  GatherParams g;
  g.t = 128;
  g.s = 24;
  g.n_events = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<GatherEvent> ev;
    const auto p = synth_gather(g, seed, &ev);
    REQUIRE(ev.size() == 1);
    if (ev[0].t0 >= (g.t - 1) * g.dt) continue;  // apex past the window
    std::size_t best = 0;
    for (std::size_t t = 0; t < p.t; ++t)
      if (p.at(t, ev[0].apex_trace) > p.at(best, ev[0].apex_trace)) best = t;
    CHECK(std::abs(static_cast<double>(best) * g.dt - ev[0].t0) <= g.dt);
  }
}

TEST_CASE("random trace masks follow the rounding rule") {
  GatherParams g;
  g.t = 16;
  g.s = 10;
  const auto p = synth_gather(g, 1);
  const auto [d, mask] = degrade_mask_random(p, 0.3, 5);
  CHECK(std::accumulate(mask.begin(), mask.end(), 0) == 7);
  for (std::size_t s = 0; s < p.s; ++s)
    for (std::size_t t = 0; t < p.t; ++t) {
      if (mask[s]) CHECK(d.at(t, s) == p.at(t, s));
      else CHECK(d.at(t, s) == 0.0f);
    }
  const auto [d2, m2] = degrade_mask_random(p, 0.7, 5);
  CHECK(std::accumulate(m2.begin(), m2.end(), 0) == 3);
  CHECK_THROWS(degrade_mask_random(p, 1.2, 5));
}

TEST_CASE("regular masks drop every third trace and are idempotent") {
  SeismicPatch p(4, 6, 0.004, 10);
  std::iota(p.data.begin(), p.data.end(), 1.0f);
  const auto [d, mask] = degrade_mask_regular(p);
  CHECK(mask == TraceMask{1, 1, 0, 1, 1, 0});
  const auto [dd, mask2] = degrade_mask_regular(d);
  CHECK(dd.data == d.data);
  CHECK(mask2 == mask);
}

TEST_CASE("additive noise has the requested spread") {
  SeismicPatch p(224, 128, 0.004, 10);
  const auto n = degrade_noise(p, 0.1, 9);
  double m = 0, s2 = 0;
  for (float v : n.data) m += v;
  m /= n.data.size();
  for (float v : n.data) s2 += (v - m) * (v - m);
  CHECK(std::abs(std::sqrt(s2 / n.data.size()) - 0.1) < 0.005);
  const auto tiny = degrade_noise(small_gather(1), 1e-12, 1);
  const auto orig = small_gather(1);
  for (std::size_t i = 0; i < orig.data.size(); ++i) CHECK(tiny.data[i] == doctest::Approx(orig.data[i]));
}

TEST_CASE("band split separates a 7 Hz and a 2 Hz tone") {
  SeismicPatch p(125, 3, 0.008, 10);
  std::vector<float> seven(p.t), two(p.t);
  for (std::size_t t = 0; t < p.t; ++t) {
    seven[t] = static_cast<float>(std::sin(2 * std::numbers::pi * 7 * t * p.dt));
    two[t] = static_cast<float>(0.5 * std::cos(2 * std::numbers::pi * 2 * t * p.dt));
    for (std::size_t s = 0; s < p.s; ++s) p.at(t, s) = seven[t] + two[t];
  }
  DegradationSpec spec;
  spec.task = Task::Lfe;
  const auto [in, label] = bandpass_split(p, spec);
  for (std::size_t t = 0; t < p.t; ++t) {
    CHECK(in.at(t, 1) == doctest::Approx(seven[t]).scale(1.0).epsilon(1e-5));
    CHECK(label.at(t, 1) == doctest::Approx(two[t]).scale(1.0).epsilon(1e-5));
  }
  CHECK(band_gain(5.5, 5, 10, 1) == doctest::Approx(0.5));
  CHECK(band_gain(4.5, 0, 5, 1) == doctest::Approx(0.5));
  CHECK(band_gain(11, 5, 10, 1) == 0.0);
  spec.input_band_hi = 80;  // beyond Nyquist at 8 ms
  CHECK_THROWS_AS(bandpass_split(p, spec), std::invalid_argument);
}

TEST_CASE("SEIS files round-trip bit-exactly and reject corruption") {
  const auto dir = scratch_dir("seis");
  DegradationSpec spec;
  spec.task = Task::Denoise;
  spec.seed = 4;
  const auto gp = default_gather_params(spec.task, 16, 16);
  SeismicDataset ds;
  ds.task = spec.task;
  ds.t = ds.s = 16;
  for (std::size_t i = 0; i < 3; ++i) ds.entries.push_back(make_entry(spec, gp, i));
  write_seis(dir / "a.seis", ds);
  const auto back = read_seis(dir / "a.seis");
  REQUIRE(back.entries.size() == 3);
  CHECK(back.task == ds.task);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.entries[i].target.data == ds.entries[i].target.data);
    CHECK(back.entries[i].degraded.data == ds.entries[i].degraded.data);
    CHECK(back.entries[i].mask == ds.entries[i].mask);
  }
  write_seis(dir / "b.seis", back);
  CHECK(slurp(dir / "a.seis") == slurp(dir / "b.seis"));

  auto bytes = slurp(dir / "a.seis");
  {
    std::ofstream os(dir / "trunc.seis", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
  }
  CHECK_THROWS_AS(read_seis(dir / "trunc.seis"), FormatError);
  bytes[0] = 'X';
  {
    std::ofstream os(dir / "magic.seis", std::ios::binary);
    os << bytes;
  }
  CHECK_THROWS_AS(read_seis(dir / "magic.seis"), FormatError);
  CHECK_THROWS_AS(read_seis(dir / "missing.seis"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("dataset builds split 8:1:1 and rebuild byte-identically") {
  CHECK(split_counts(100).train == 80);
  CHECK(split_counts(100).val == 10);
  CHECK(split_counts(100).test == 10);
  const auto d1 = scratch_dir("ds1"), d2 = scratch_dir("ds2");
  DegradationSpec spec;
  spec.task = Task::InterpolationRegular;
  spec.seed = 12;
  const auto gp = default_gather_params(spec.task, 16, 16);
  const auto r1 = build_dataset(spec, gp, 20, d1);
  build_dataset(spec, gp, 20, d2);
  CHECK(r1.split.train == 16);
  for (const char* f : {"train.seis", "val.seis", "test.seis", "dataset.json"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  const auto train = read_seis(d1 / "train.seis");
  CHECK(train.entries.size() == 16);
  for (const auto& e : train.entries) CHECK(e.mask[2] == 0);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("LFE entries pair the band-limited input with the low band label") {
  DegradationSpec spec;
  spec.task = Task::Lfe;
  spec.seed = 2;
  const auto gp = default_gather_params(spec.task, 128, 16);
  const auto e = make_entry(spec, gp, 0);
  std::vector<double> in(e.degraded.t), lab(e.target.t);
  for (std::size_t t = 0; t < in.size(); ++t) {
    in[t] = e.degraded.at(t, 8);
    lab[t] = e.target.at(t, 8);
  }
  const auto si = amplitude_spectrum(in, gp.dt), sl = amplitude_spectrum(lab, gp.dt);
  CHECK(band_energy(si, 0, 4) < 1e-6 * band_energy(si, 0, 60));
  CHECK(band_energy(sl, 6, 60) < 1e-6 * band_energy(sl, 0, 60));
}

TEST_CASE("task names and validation") {
  for (Task t : {Task::InterpolationRandom, Task::InterpolationRegular, Task::Denoise, Task::Lfe})
    CHECK(task_from_string(to_string(t)) == t);
  CHECK_THROWS(task_from_string("deblur"));
  DegradationSpec spec;
  spec.missing_min = 0.9;
  CHECK_THROWS(spec.validate());
  SeismicPatch tiny(7, 8, 0.004, 10);
  CHECK_THROWS(tiny.validate());
}
