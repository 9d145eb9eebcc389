#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpte/data.hpp"
#include "gpte/model.hpp"
#include "gpte/rng.hpp"

namespace gpte::train {

struct TrainConfig {
  double lr_max = 3e-4;
  double lr_min = 3e-5;
  std::size_t warmup_steps = 100;
  std::size_t max_steps = 1000;
  std::size_t epochs = 0;  // epoch cap; 0 disables
  std::size_t batch_size = 16;
  std::size_t seq_len = 128;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 1.0;  // global-norm clip; <= 0 disables
  std::uint64_t seed = 0;
  std::size_t eval_interval = 200;      // validation cadence in steps
  std::size_t checkpoint_interval = 0;  // 0 disables periodic checkpoints
  std::size_t early_stop_patience = 0;  // evals without improvement; 0 disables

  void validate() const;
};

// Linear warmup to lr_max over warmup_steps, then cosine decay to lr_min at
// max_steps.
double lr_at(std::size_t step, const TrainConfig& config);

// Scales all gradients by min(1, clip_norm / global_norm), where the global
// norm is the L2 norm over every tensor jointly. Returns the pre-clip norm.
// clip_norm <= 0 leaves gradients untouched.
double clip_gradients(std::vector<Tensor>& grads, double clip_norm);

struct AdamSlot {
  Tensor m, v;
};

// Exactly one (m, v) pair per stored unique tensor: shared groups have one
// entry, never per-layer entries. Slot order matches parameter enumeration.
struct OptimizerState {
  std::vector<std::pair<std::string, AdamSlot>> slots;
  std::uint64_t step = 0;

  static OptimizerState init(const model::ModelParams& params);
};

// Bias-corrected Adam plus decoupled weight decay on weight matrices only
// (rank >= 2); biases and norm parameters are never decayed. `grads` must be
// aligned with the parameter enumeration order.
void adam_step(model::ModelParams& params, const std::vector<Tensor>& grads,
               OptimizerState& state, double lr, const TrainConfig& config);

struct StepRecord {
  std::uint64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> val_loss;  // set on evaluation steps
};

// Owns the full optimization state of one run and can be reconstructed from
// a checkpoint to resume mid-run: batch order is a pure function of
// (seed, epoch) and the dropout stream is carried in `rng`.
class Trainer {
 public:
  struct Result {
    std::vector<StepRecord> trace;
    double initial_train_loss = 0.0;
    std::optional<double> final_val_loss;
    bool early_stopped = false;
    std::uint64_t steps_completed = 0;
    double tokens_per_second = 0.0;
  };

  struct Hooks {
    std::function<void(const StepRecord&)> on_step;
    std::function<void(const Trainer&, std::uint64_t step)> on_checkpoint;
  };

  Trainer(model::ModelConfig model_config, TrainConfig train_config);
  Trainer(model::ModelConfig model_config, TrainConfig train_config, model::ModelParams params,
          OptimizerState optimizer, Rng rng, std::uint64_t step);

  // Runs until max_steps (or the epoch cap / early stop) and returns the
  // trace of completed steps. Deterministic for fixed inputs and seed.
  Result run(const data::CorpusSplit& split, const Hooks& hooks = {});

  // Mean validation NLL in nats/token; empty when the tail is too short.
  std::optional<double> validation_loss(const data::CorpusSplit& split) const;

  const model::ModelConfig& model_config() const { return model_config_; }
  const TrainConfig& train_config() const { return train_config_; }
  const model::SharingPlan& plan() const { return plan_; }
  const model::ModelParams& params() const { return params_; }
  model::ModelParams& params() { return params_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  OptimizerState& optimizer() { return optimizer_; }
  const Rng& rng() const { return rng_; }
  std::uint64_t step() const { return step_; }

 private:
  model::ModelConfig model_config_;
  TrainConfig train_config_;
  model::SharingPlan plan_;
  model::ModelParams params_;
  OptimizerState optimizer_;
  Rng rng_;
  std::uint64_t step_ = 0;
};

}  // namespace gpte::train
