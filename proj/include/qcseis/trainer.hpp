#pragma once

// Adam, the alternating GAN loop, the supervised UNet loop, and the QCKP
// checkpoint container.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qcseis/models.hpp"
#include "qcseis/objectives.hpp"
#include "qcseis/seisdata.hpp"

namespace qcseis {

using json = nlohmann::ordered_json;

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArchitectureMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One parameter's update with moment buffers m, v at step t (1-based).
void adam_update(std::span<real> param, std::span<const real> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, const AdamConfig& cfg);

class Adam {
 public:
  Adam(ParameterList params, AdamConfig cfg);

  /// Applies one update from the current gradients. Returns false (and
  /// counts the event) when any gradient is non-finite; nothing is changed.
  bool step();
  void zero_grad();
  /// Scales gradients so their global L2 norm is at most `max_norm`.
  /// Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }
  std::uint64_t skipped() const { return skipped_; }
  const ParameterList& params() const { return params_; }

  // Moment buffers, parallel to params().
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore_counters(std::uint64_t steps, std::uint64_t skipped) {
    t_ = steps;
    skipped_ = skipped;
  }

 private:
  ParameterList params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
  std::uint64_t skipped_ = 0;
};

enum class Family { Gan, UNet };
std::string to_string(Family f);
Family family_for_task(Task task);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  std::optional<double> lr;  // unset: 1e-5 for the GAN, 1e-4 for the UNet
  LossWeights weights{};
  bool com_in_discriminator = true;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;
  int workers = 1;

  double resolved_lr(Family f) const;
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct HistoryRow {
  int epoch = 0;
  std::string split;
  double mae = 0, rmse = 0, loss_g = 0, loss_d = 0, loss_com = 0;
};

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows);

struct StepStats {
  double mae = 0, rmse = 0, loss_g = 0, loss_d = 0, loss_com = 0;
  bool finite = true;
  bool clipped = false;
};

struct Batch {
  Tensor degraded;  // [B, 1, T, S]
  Tensor target;
};

Batch make_batch(const SeismicDataset& ds, std::span<const std::size_t> indices);
/// Training order for an epoch, keyed by (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

/// Named tensor in a checkpoint. dtype 0 stores f32, 1 stores f64.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::uint8_t dtype = 0;
  std::vector<float> f32;
  std::vector<double> f64;
  std::size_t numel() const { return shape_numel(shape); }
};

struct Checkpoint {
  json meta;
  std::vector<CheckpointEntry> entries;
  const CheckpointEntry* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
/// Reads the whole file; any defect throws CheckpointError naming the entry.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Adds `prefix/<param>` entries and the circuit angles of `net`.
void export_network(const Network& net, const std::string& prefix, Checkpoint& ck);
/// Loads weights and circuits into `net`. The stored architecture under
/// meta["models"][prefix] must equal net.config(); all entries are validated
/// before any tensor is written.
void import_network(Network& net, const std::string& prefix, const Checkpoint& ck);

/// FNV-1a over the bytes of all parameters (trainable and running stats).
std::uint64_t parameter_hash(const Network& net);

struct TrainerOptions {
  std::filesystem::path out_dir;  // empty: no files written
  bool verbose = false;
};

/// Owns the networks and optimizer state of one training run.
class Trainer {
 public:
  /// `model` is the generator or UNet config; the discriminator shares its
  /// dims, channel widths, quantum flag and seeds.
  Trainer(Family family, NetConfig model, TrainConfig cfg, TrainerOptions opts = {});

  /// Rebuilds a trainer, networks and optimizer state from a checkpoint.
  static std::unique_ptr<Trainer> resume(const std::filesystem::path& checkpoint, TrainerOptions opts = {});

  /// One parameter update (GAN: one D step then one G step).
  StepStats train_step(const Batch& batch);

  /// Continues until `epochs` are complete or `max_steps` further updates
  /// have run (when max_steps >= 0). Writes history and checkpoints when an
  /// output directory is set. Returns the full history.
  const std::vector<HistoryRow>& fit(const SeismicDataset& train, const SeismicDataset* val,
                                     long max_steps = -1);

  /// Eval-mode metrics of the main network on `ds`.
  HistoryRow validate(const SeismicDataset& ds, int epoch);

  /// Extends (or shortens) the run; used when resuming with a new config.
  void set_epochs(int epochs);
  void set_workers(int workers);

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;

  Family family() const { return family_; }
  Network& model() { return *model_; }
  Network* discriminator() { return disc_.get(); }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<HistoryRow>& history() const { return history_; }
  int epochs_done() const { return epoch_; }
  std::uint64_t global_step() const { return step_; }
  std::uint64_t clip_events() const { return clip_events_; }
  double best_val_mae() const { return best_val_mae_; }

 private:
  void finish_epoch(const SeismicDataset* val);

  Family family_;
  TrainConfig cfg_;
  TrainerOptions opts_;
  std::unique_ptr<Network> model_, disc_;
  std::unique_ptr<Adam> opt_model_, opt_disc_;

  int epoch_ = 0;                // completed epochs
  std::size_t batch_cursor_ = 0;  // next batch inside the current epoch
  std::uint64_t step_ = 0;
  std::uint64_t clip_events_ = 0;
  int nonfinite_streak_ = 0;
  double best_val_mae_ = std::numeric_limits<double>::infinity();
  StepStats epoch_sum_{};
  std::size_t epoch_batches_ = 0;
  std::vector<HistoryRow> history_;
};

/// Runs `predict` over every patch of `ds` and scores it against the target.
EvalReport evaluate(const SeismicDataset& ds, const std::function<Tensor(const Tensor&)>& predict,
                    std::size_t batch_size = 16);

}  // namespace qcseis
