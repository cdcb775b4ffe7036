#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spes/models.hpp"

namespace spes {

// Self-describing model snapshot: a text header (architecture + training
// metadata) followed by a little-endian float32 parameter block and the
// optimizer moments. Guarded by a format-version field.
struct Checkpoint {
  ModelConfig config;
  std::vector<float> params;
  std::vector<double> adam_m, adam_v;
  long adam_step = 0;

  // training metadata
  int repeat = -1;
  int fold = -1;
  int best_epoch = -1;
  double best_val_auroc = 0.0;
  uint64_t seed = 0;
  // standardization fitted on this run's training partition; evaluation of
  // the checkpoint must reuse it
  double stats_mean = 0.0;
  double stats_sd = 1.0;

  ModelF restore_model() const;
};

Checkpoint snapshot(const ModelF& model);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spes
