#pragma once

// JSON run configuration. Every section rejects unknown keys, and the
// resolved document (all defaults filled in) is what gets echoed to disk.

#include <filesystem>
#include <string>

#include "qcseis/trainer.hpp"

namespace qcseis {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataSection {
  DegradationSpec degradation{};
  GatherParams gather{};
  std::size_t n_patches = 100;
  std::string dir = "data";
};

struct EvalSection {
  std::string report = "report.csv";
  std::string spectra_dir;  // empty: no spectra dumps
};

struct RunConfig {
  DataSection data{};
  NetConfig model{};
  TrainConfig train{};
  EvalSection eval{};
  std::string out_dir = "run";

  Family family() const { return family_for_task(data.degradation.task); }
};

json net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const json& j);
json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);
json degradation_to_json(const DegradationSpec& spec);
DegradationSpec degradation_from_json(const json& j);
json gather_to_json(const GatherParams& g);
GatherParams gather_from_json(const json& j, const GatherParams& defaults);

json run_config_to_json(const RunConfig& cfg);
/// Parses and validates; relative paths stay relative to the caller's cwd.
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// QCSEIS_SEED, when set, replaces every seed in the config. Returns true if
/// an override was applied.
bool apply_seed_override(RunConfig& cfg);

}  // namespace qcseis
