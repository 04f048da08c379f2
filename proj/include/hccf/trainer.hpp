#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hccf/adam.hpp"
#include "hccf/dataio.hpp"
#include "hccf/model.hpp"
#include "hccf/objective.hpp"

namespace hccf {

struct TrainConfig {
  double lr = 1e-3;
  double lr_decay = 0.96;  // multiplicative, per epoch
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  std::size_t patience = 10;           // early stop after this many stale epochs
  std::size_t early_stop_cutoff = 20;  // validation Recall@N cutoff
  std::uint64_t seed = 1;

  void validate() const;
};

// Parameter snapshot plus a human-readable manifest. Tensor values are
// rounded to float32 at snapshot time, matching what the on-disk blobs hold,
// so save -> load -> save is byte-identical.
struct Checkpoint {
  nlohmann::ordered_json manifest;
  std::vector<std::pair<std::string, DenseMatrix>> tensors;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based; epoch k runs at lr0 * decay^k
  double lr = 0.0;
  LossReport loss;  // mean over the epoch's batches
  double val_recall = 0.0;
  double val_ndcg = 0.0;
  bool improved = false;
};

struct FitResult {
  Checkpoint best;
  std::vector<EpochRecord> log;
  std::vector<double> epoch_seconds;  // wall time, kept out of the log records
  std::size_t best_epoch = 0;
  double best_val_recall = 0.0;
};

// One pass over all batches: sample dropout masks, forward, unified loss,
// backward, Adam step. Returns the component-wise mean loss report.
// Throws NumericError (with a diagnostic of the offending batch) if the
// loss goes non-finite.
LossReport train_epoch(ModelParams& params, AdamState& adam, const InteractionDataset& ds,
                       const NormalizedAdjacency& adj, const ModelConfig& model_cfg,
                       const LossConfig& loss_cfg, const TrainConfig& train_cfg, double lr,
                       Rng& rng);

// Full optimization loop with per-epoch geometric lr decay, per-epoch
// validation Recall@cutoff, best-checkpoint tracking, and patience-based
// early stopping. epochs == 0 returns a checkpoint of the initialized
// parameters.
FitResult fit(const InteractionDataset& ds, const ModelConfig& model_cfg,
              const LossConfig& loss_cfg, const TrainConfig& train_cfg);

Checkpoint make_checkpoint(const ModelParams& params, const ModelConfig& model_cfg,
                           const LossConfig& loss_cfg, const TrainConfig& train_cfg,
                           std::size_t epoch, double val_recall);

// Layout: <dir>/manifest.json plus <dir>/params/<name>.f32, one blob per
// tensor, little-endian float32 row-major.
void save_checkpoint(const Checkpoint& ckpt, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

// Rebuilds params (and the configs echoed in the manifest) from a loaded
// checkpoint. Values carry float32 storage precision.
ModelParams params_from_checkpoint(const Checkpoint& ckpt);
ModelConfig model_config_from_checkpoint(const Checkpoint& ckpt);
LossConfig loss_config_from_checkpoint(const Checkpoint& ckpt);
TrainConfig train_config_from_checkpoint(const Checkpoint& ckpt);

// JSON echo helpers shared by checkpoints and run manifests.
nlohmann::ordered_json model_config_json(const ModelConfig& cfg);
nlohmann::ordered_json loss_config_json(const LossConfig& cfg);
nlohmann::ordered_json train_config_json(const TrainConfig& cfg);
nlohmann::ordered_json epoch_record_json(const EpochRecord& rec);

}  // namespace hccf
