// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cm3ae/data/sample.hpp"
#include "cm3ae/harness/optimizer.hpp"
#include "cm3ae/model/config.hpp"
#include "cm3ae/model/model.hpp"

namespace cm3ae {

struct TrainConfig {
  std::string preset = "toy";
  double mask_ratio = 0.75;
  double lr = 2e-4;
  double weight_decay = 0.04;
  int batch = 8;
  int epochs = 1;
  uint64_t seed = 42;
  bool enable_mfrm = true;
  bool enable_mcl = true;
  bool grad_clip = false;
  double clip_norm = 1.0;
  int ckpt_every = 500;       // steps between periodic checkpoints
  std::string data_dir;       // empty: generate synthetic samples in memory
  int synthetic_samples = 64;
  std::string out_dir;        // empty: keep metrics/checkpoints in memory only
  std::string resume_from;
  SyntheticConfig synth;      // image size is overridden by the preset

  ModelConfig model_config() const;
  void validate() const;

  // identity of a run for resume compatibility (model structure, data source,
  // flags; deliberately not epochs, so a run can be resumed and extended)
  uint64_t state_hash() const;
};

struct StepStats {
  int64_t step = 0;  // 1-based
  double loss_m = 0, loss_f = 0, loss_cl = 0, total = 0, ls = 0;
};

// Owns the model and optimizer state for one pre-training run. Training is
// deterministic for a fixed seed: the dataset, per-epoch batch order and
// per-step mask plans are all derived from it.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  void run();         // trains until the step budget is exhausted
  void train_step();  // one step (callers drive partial runs in tests)

  int64_t step() const { return step_; }
  int64_t total_steps() const { return total_steps_; }
  Cm3aeModel<float>& model() { return *model_; }
  const Cm3aeModel<float>& model() const { return *model_; }
  const std::vector<SamplePair>& dataset() const { return dataset_; }
  const std::vector<StepStats>& history() const { return history_; }
  const std::vector<std::string>& metrics_lines() const { return metrics_lines_; }
  AdamW<float>& optimizer() { return *optimizer_; }
  const TrainConfig& config() const { return cfg_; }

  void save_checkpoint(const std::string& path);
  void load_checkpoint(const std::string& path);

 private:
  void build_dataset();
  void ensure_epoch_order();
  std::string metrics_line(const StepStats& s) const;
  void write_periodic_checkpoint();

  TrainConfig cfg_;
  std::unique_ptr<Cm3aeModel<float>> model_;
  std::unique_ptr<AdamW<float>> optimizer_;
  std::vector<SamplePair> dataset_;
  std::vector<int> epoch_order_;
  int64_t epochs_shuffled_ = 0;
  int64_t step_ = 0;
  int64_t total_steps_ = 0;
  int effective_batch_ = 0;
  int64_t steps_per_epoch_ = 0;
  Rng rng_mask_;
  Rng rng_order_;
  std::vector<StepStats> history_;
  std::vector<std::string> metrics_lines_;
};

// Number of loader worker threads from CM3AE_NUM_WORKERS (0 = fully serial
// deterministic mode; parallel loading keeps sample order, and samples are
// pure functions of their seed, so results are identical either way).
int loader_workers();

}  // namespace cm3ae
