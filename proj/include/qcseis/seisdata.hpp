#pragma once

// Synthetic shot gathers, the degradation regimes (trace masking, additive
// noise, band split) and the SEIS dataset container.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "qcseis/common.hpp"

namespace qcseis {

/// Row-major [T x S] gather: data[t * S + s].
struct SeismicPatch {
  std::size_t t = 0;
  std::size_t s = 0;
  double dt = 0.004;
  double dx = 10.0;
  std::vector<float> data;

  SeismicPatch() = default;
  SeismicPatch(std::size_t t, std::size_t s, double dt, double dx);
  float& at(std::size_t ti, std::size_t si) { return data[ti * s + si]; }
  float at(std::size_t ti, std::size_t si) const { return data[ti * s + si]; }
  void validate() const;
};

enum class Task : std::uint8_t { InterpolationRandom = 0, InterpolationRegular = 1, Denoise = 2, Lfe = 3 };

std::string to_string(Task task);
Task task_from_string(const std::string& name);
bool is_interpolation(Task task);

struct DegradationSpec {
  Task task = Task::InterpolationRandom;
  double missing_min = 0.3;
  double missing_max = 0.7;
  double noise_sigma = 0.1;
  double input_band_lo = 5.0, input_band_hi = 10.0;
  double label_band_lo = 0.0, label_band_hi = 5.0;
  double taper_hz = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GatherParams {
  std::size_t t = 64;
  std::size_t s = 64;
  double dt = 0.004;
  double dx = 10.0;
  int n_events = 6;
  double v_min = 2000.0, v_max = 5000.0;
  double f0_min = 15.0, f0_max = 30.0;
  double amp_min = 0.3, amp_max = 1.0;
};

/// w(t) = (1 - 2 pi^2 f0^2 t^2) exp(-pi^2 f0^2 t^2) on [-half_width, half_width].
std::vector<double> ricker(double f0, double dt, double half_width);
double ricker_value(double f0, double t);

struct GatherEvent {
  double t0, velocity, amplitude, f0;
  std::size_t apex_trace;
};

/// Sum of hyperbolic Ricker reflections, peak-normalized to max |a| = 1.
/// `events`, when non-null, receives the drawn event parameters.
SeismicPatch synth_gather(const GatherParams& params, std::uint64_t seed,
                          std::vector<GatherEvent>* events = nullptr);

using TraceMask = std::vector<std::uint8_t>;  // 1 kept, 0 dropped

std::pair<SeismicPatch, TraceMask> degrade_mask_random(const SeismicPatch& patch, double fraction,
                                                       std::uint64_t seed);
std::pair<SeismicPatch, TraceMask> degrade_mask_regular(const SeismicPatch& patch);
SeismicPatch apply_mask(const SeismicPatch& patch, const TraceMask& mask);
SeismicPatch degrade_noise(const SeismicPatch& patch, double sigma, std::uint64_t seed);

/// Zero-phase per-trace filters: (input band, label band). Each band has
/// raised-cosine edges of width `taper_hz` inside the band.
std::pair<SeismicPatch, SeismicPatch> bandpass_split(const SeismicPatch& patch,
                                                     const DegradationSpec& spec);
/// Gain of the band [lo, hi] at frequency f; lo <= 0 means no low edge.
double band_gain(double f, double lo, double hi, double taper);

struct DatasetEntry {
  SeismicPatch target;
  SeismicPatch degraded;
  TraceMask mask;
};

struct SeismicDataset {
  Task task = Task::InterpolationRandom;
  std::size_t t = 0, s = 0;
  double dt = 0.004, dx = 10.0;
  std::vector<DatasetEntry> entries;
};

/// Little-endian SEIS container, version 1.
void write_seis(const std::filesystem::path& path, const SeismicDataset& ds);
SeismicDataset read_seis(const std::filesystem::path& path);

struct DatasetSplit {
  std::size_t train = 0, val = 0, test = 0;
};
DatasetSplit split_counts(std::size_t n);

/// One degraded/target pair for patch `index` of a dataset.
DatasetEntry make_entry(const DegradationSpec& spec, const GatherParams& gather, std::size_t index);

struct BuildResult {
  DatasetSplit split;
  std::vector<std::filesystem::path> files;
};

/// Writes train.seis / val.seis / test.seis (8:1:1) and dataset.json.
BuildResult build_dataset(const DegradationSpec& spec, const GatherParams& gather,
                          std::size_t n_patches, const std::filesystem::path& out_dir);

/// Gather defaults per task (LFE uses a 7 Hz wavelet and a longer window).
GatherParams default_gather_params(Task task, std::size_t t, std::size_t s);

}  // namespace qcseis
