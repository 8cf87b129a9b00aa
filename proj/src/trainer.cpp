// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0

#include "cm3ae/harness/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "cm3ae/harness/checkpoint.hpp"
#include "cm3ae/model/pipeline.hpp"

namespace cm3ae {

namespace fs = std::filesystem;

int loader_workers() {
  const char* env = std::getenv("CM3AE_NUM_WORKERS");
  if (!env) return 0;
  const int n = std::atoi(env);
  return n < 0 ? 0 : n;
}

ModelConfig TrainConfig::model_config() const { return ModelConfig::from_preset(preset); }

void TrainConfig::validate() const {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw std::invalid_argument("train config: mask_ratio outside (0,1)");
  if (lr <= 0.0) throw std::invalid_argument("train config: learning rate must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("train config: weight decay must be non-negative");
  if (batch <= 0) throw std::invalid_argument("train config: batch must be positive");
  if (epochs <= 0) throw std::invalid_argument("train config: epochs must be positive");
  if (data_dir.empty() && synthetic_samples <= 0)
    throw std::invalid_argument("train config: synthetic_samples must be positive");
  if (ckpt_every <= 0) throw std::invalid_argument("train config: ckpt_every must be positive");
  model_config().validate();
}

uint64_t TrainConfig::state_hash() const {
  const std::string s = model_config().canonical_string() + "|ratio=" + std::to_string(mask_ratio) +
                        "|mfrm=" + std::to_string(enable_mfrm) + "|mcl=" + std::to_string(enable_mcl) +
                        "|batch=" + std::to_string(batch) + "|seed=" + std::to_string(seed) +
                        "|data=" + (data_dir.empty() ? "synthetic:" + std::to_string(synthetic_samples) : data_dir);
  uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

uint64_t derive_seed(uint64_t seed, uint64_t index, uint64_t stream) {
  uint64_t x = seed + 0x9e3779b97f4a7c15ull * (index + 1) + stream * 0xc2b2ae3d27d4eb4full;
  splitmix64(x);
  return splitmix64(x);
}

std::vector<uint32_t> rng_words(const Rng& rng) {
  const auto s = rng.state();
  std::vector<uint32_t> w;
  w.reserve(8);
  for (uint64_t v : s) {
    w.push_back(static_cast<uint32_t>(v));
    w.push_back(static_cast<uint32_t>(v >> 32));
  }
  return w;
}

void restore_rng(Rng& rng, const std::vector<uint32_t>& w) {
  if (w.size() != 8) throw std::runtime_error("checkpoint: malformed generator state");
  std::array<uint64_t, 4> s{};
  for (int i = 0; i < 4; ++i) {
    s[static_cast<size_t>(i)] =
        static_cast<uint64_t>(w[static_cast<size_t>(2 * i)]) | (static_cast<uint64_t>(w[static_cast<size_t>(2 * i + 1)]) << 32);
  }
  rng.set_state(s);
}

}  // namespace

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)), rng_mask_(cfg_.seed, 0x3a5c), rng_order_(cfg_.seed, 0x02de) {
  cfg_.validate();
  cfg_.synth.image_size = cfg_.model_config().image_size;
  cfg_.synth.voxel_count = cfg_.model_config().voxel.count;
  cfg_.synth.events_per_voxel = cfg_.model_config().voxel.events_per_voxel;

  model_ = std::make_unique<Cm3aeModel<float>>(cfg_.model_config(), cfg_.seed);
  build_dataset();

  effective_batch_ = std::min<int>(cfg_.batch, static_cast<int>(dataset_.size()));
  if (cfg_.enable_mcl && effective_batch_ < 2)
    throw std::invalid_argument("trainer: contrastive learning needs an effective batch of at least 2");
  steps_per_epoch_ = std::max<int64_t>(1, static_cast<int64_t>(dataset_.size()) / effective_batch_);
  total_steps_ = steps_per_epoch_ * cfg_.epochs;

  const auto groups = enabled_groups(cfg_.enable_mfrm, cfg_.enable_mcl, cfg_.model_config().dedicated_fusion_decoder);
  std::vector<Param<float>*> trainable;
  for (auto& p : model_->store) {
    if (groups.count(p.group)) trainable.push_back(&p);
  }
  optimizer_ = std::make_unique<AdamW<float>>(std::move(trainable));

  if (!cfg_.out_dir.empty()) fs::create_directories(cfg_.out_dir);
  if (!cfg_.resume_from.empty()) load_checkpoint(cfg_.resume_from);
}

void Trainer::build_dataset() {
  const bool need_voxels = cfg_.enable_mfrm || cfg_.enable_mcl;
  if (!cfg_.data_dir.empty()) {
    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(cfg_.data_dir)) {
      if (e.is_directory() && fs::exists(e.path() / "rgb.png")) dirs.push_back(e.path().string());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw std::runtime_error("no sample directories under " + cfg_.data_dir);
    dataset_.resize(dirs.size());
    const int workers = loader_workers();
    if (workers <= 1) {
      for (size_t i = 0; i < dirs.size(); ++i) dataset_[i] = load_sample(dirs[i], need_voxels);
    } else {
      std::atomic<size_t> next{0};
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (size_t i = next.fetch_add(1); i < dirs.size(); i = next.fetch_add(1)) {
            dataset_[i] = load_sample(dirs[i], need_voxels);
          }
        });
      }
      for (auto& t : pool) t.join();
    }
    const int expect = cfg_.model_config().image_size;
    for (const auto& s : dataset_) {
      if (s.rgb.height != expect || s.rgb.width != expect)
        throw std::runtime_error("sample image size does not match the '" + cfg_.preset + "' preset (" +
                                 std::to_string(expect) + ")");
    }
  } else {
    dataset_.resize(static_cast<size_t>(cfg_.synthetic_samples));
    const int workers = loader_workers();
    auto gen = [&](size_t i) { dataset_[i] = generate_synthetic_pair(derive_seed(cfg_.seed, i, 0xda7a), cfg_.synth); };
    if (workers <= 1) {
      for (size_t i = 0; i < dataset_.size(); ++i) gen(i);
    } else {
      std::atomic<size_t> next{0};
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (size_t i = next.fetch_add(1); i < dataset_.size(); i = next.fetch_add(1)) gen(i);
        });
      }
      for (auto& t : pool) t.join();
    }
  }
}

void Trainer::ensure_epoch_order() {
  const int64_t needed_epoch = step_ / steps_per_epoch_;
  while (epochs_shuffled_ <= needed_epoch) {
    epoch_order_.resize(dataset_.size());
    std::iota(epoch_order_.begin(), epoch_order_.end(), 0);
    rng_order_.shuffle(epoch_order_.begin(), epoch_order_.end());
    ++epochs_shuffled_;
  }
}

std::string Trainer::metrics_line(const StepStats& s) const {
  nlohmann::ordered_json j;
  j["step"] = s.step;
  j["L_m"] = s.loss_m;
  j["L_f"] = s.loss_f;
  j["L_cl"] = s.loss_cl;
  j["L"] = s.total;
  j["ls"] = s.ls;
  return j.dump();
}

void Trainer::train_step() {
  if (step_ >= total_steps_) return;
  ensure_epoch_order();
  const int64_t pos = step_ % steps_per_epoch_;

  std::vector<SamplePair> batch;
  std::vector<MaskPlan> plans;
  batch.reserve(static_cast<size_t>(effective_batch_));
  const int n_patches = model_->config.num_patches();
  for (int b = 0; b < effective_batch_; ++b) {
    batch.push_back(dataset_[static_cast<size_t>(epoch_order_[static_cast<size_t>(pos * effective_batch_ + b)])]);
    plans.push_back(sample_mask_plan(n_patches, cfg_.mask_ratio, rng_mask_));
  }

  optimizer_->zero_grads();
  nn::Graph<float> g;
  const BatchForward<float> fwd = forward_batch<float>(g, *model_, batch, plans, cfg_.enable_mfrm, cfg_.enable_mcl);

  StepStats stats;
  stats.step = step_ + 1;
  stats.loss_m = g.scalar(fwd.loss_m);
  stats.loss_f = cfg_.enable_mfrm ? g.scalar(fwd.loss_f) : 0.0;
  stats.loss_cl = cfg_.enable_mcl ? g.scalar(fwd.loss_cl) : 0.0;
  stats.total = g.scalar(fwd.total);
  stats.ls = fwd.ls;
  auto check_finite = [&](double v, const char* name) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("non-finite loss term " + std::string(name) + " (= " + std::to_string(v) +
                               ") at step " + std::to_string(stats.step));
    }
  };
  check_finite(stats.loss_m, "L_m");
  check_finite(stats.loss_f, "L_f");
  check_finite(stats.loss_cl, "L_cl");
  check_finite(stats.total, "L");

  g.backward(fwd.total);

  if (cfg_.grad_clip) {
    double norm2 = 0.0;
    for (Param<float>* p : optimizer_->params()) {
      for (float v : p->grad.data) norm2 += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(norm2);
    if (norm > cfg_.clip_norm) {
      const float scale = static_cast<float>(cfg_.clip_norm / norm);
      for (Param<float>* p : optimizer_->params()) {
        for (float& v : p->grad.data) v *= scale;
      }
    }
  }

  optimizer_->step(lr_at_step(cfg_.lr, step_ + 1, total_steps_), cfg_.weight_decay);
  // keep the effective contrastive scale within its bound (CLIP convention)
  const float max_log = std::log(Cm3aeModel<float>::kMaxLogitScale);
  if (model_->log_scale->value.data[0] > max_log) model_->log_scale->value.data[0] = max_log;

  ++step_;
  history_.push_back(stats);
  metrics_lines_.push_back(metrics_line(stats));
  if (!cfg_.out_dir.empty()) {
    std::ofstream mf(cfg_.out_dir + "/metrics.jsonl", std::ios::app);
    mf << metrics_lines_.back() << "\n";
  }
  write_periodic_checkpoint();
}

void Trainer::write_periodic_checkpoint() {
  if (cfg_.out_dir.empty()) return;
  if (step_ % cfg_.ckpt_every == 0 || step_ == total_steps_) {
    save_checkpoint(cfg_.out_dir + "/checkpoint_step" + std::to_string(step_) + ".cmck");
    save_checkpoint(cfg_.out_dir + "/checkpoint_last.cmck");
  }
}

void Trainer::run() {
  while (step_ < total_steps_) train_step();
}

void Trainer::save_checkpoint(const std::string& path) {
  NamedTensors entries = snapshot_params(*model_);
  const auto& params = optimizer_->params();
  for (size_t i = 0; i < params.size(); ++i) {
    entries.emplace_back("adam.m." + params[i]->name, optimizer_->moment_m(i));
    entries.emplace_back("adam.v." + params[i]->name, optimizer_->moment_v(i));
  }
  entries.emplace_back("trainer.step", bits_to_tensor({static_cast<uint32_t>(step_ & 0xffffffffu),
                                                       static_cast<uint32_t>(step_ >> 32)}));
  entries.emplace_back("trainer.epochs_shuffled",
                       bits_to_tensor({static_cast<uint32_t>(epochs_shuffled_ & 0xffffffffu),
                                       static_cast<uint32_t>(epochs_shuffled_ >> 32)}));
  entries.emplace_back("trainer.rng_mask", bits_to_tensor(rng_words(rng_mask_)));
  entries.emplace_back("trainer.rng_order", bits_to_tensor(rng_words(rng_order_)));
  Mat<float> order(1, static_cast<int>(epoch_order_.size()));
  for (size_t i = 0; i < epoch_order_.size(); ++i) order.data[i] = static_cast<float>(epoch_order_[i]);
  entries.emplace_back("trainer.epoch_order", std::move(order));
  const uint64_t h = cfg_.state_hash();
  entries.emplace_back("config.hash",
                       bits_to_tensor({static_cast<uint32_t>(h & 0xffffffffu), static_cast<uint32_t>(h >> 32)}));
  write_cmck(path, entries);
}

void Trainer::load_checkpoint(const std::string& path) {
  const NamedTensors entries = read_cmck(path);

  const Mat<float>* hash_t = find_tensor(entries, "config.hash");
  if (!hash_t) throw std::runtime_error(path + ": checkpoint has no config hash");
  const auto hw = tensor_to_bits(*hash_t);
  const uint64_t h = static_cast<uint64_t>(hw[0]) | (static_cast<uint64_t>(hw[1]) << 32);
  if (h != cfg_.state_hash()) {
    throw std::runtime_error(path + ": checkpoint was written for a different run configuration");
  }

  load_params(*model_, entries);

  const auto& params = optimizer_->params();
  std::vector<std::string> problems;
  for (size_t i = 0; i < params.size(); ++i) {
    const Mat<float>* m = find_tensor(entries, "adam.m." + params[i]->name);
    const Mat<float>* v = find_tensor(entries, "adam.v." + params[i]->name);
    if (!m || !v) {
      problems.push_back("missing optimizer state for " + params[i]->name);
      continue;
    }
    optimizer_->moment_m(i) = *m;
    optimizer_->moment_v(i) = *v;
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint optimizer state incomplete:";
    for (const auto& s : problems) msg += "\n  " + s;
    throw std::runtime_error(msg);
  }

  const Mat<float>* step_t = find_tensor(entries, "trainer.step");
  if (!step_t) throw std::runtime_error(path + ": checkpoint has no step counter");
  const auto sw = tensor_to_bits(*step_t);
  step_ = static_cast<int64_t>(static_cast<uint64_t>(sw[0]) | (static_cast<uint64_t>(sw[1]) << 32));
  optimizer_->set_step_count(step_);

  const Mat<float>* rm = find_tensor(entries, "trainer.rng_mask");
  const Mat<float>* ro = find_tensor(entries, "trainer.rng_order");
  const Mat<float>* eo = find_tensor(entries, "trainer.epoch_order");
  if (!rm || !ro || !eo) throw std::runtime_error(path + ": checkpoint is missing generator state");
  restore_rng(rng_mask_, tensor_to_bits(*rm));
  restore_rng(rng_order_, tensor_to_bits(*ro));
  epoch_order_.resize(eo->size());
  for (size_t i = 0; i < eo->size(); ++i) epoch_order_[i] = static_cast<int>(eo->data[i]);
  epochs_shuffled_ = step_ / steps_per_epoch_ + 1;

  if (total_steps_ < step_) total_steps_ = step_;
}

}  // namespace cm3ae
