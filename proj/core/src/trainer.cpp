#include "gpte/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "gpte/error.hpp"
#include "gpte/eval.hpp"

namespace gpte::train {

void TrainConfig::validate() const {
  if (lr_max <= 0.0) throw ConfigError("lr_max must be positive");
  if (lr_min < 0.0 || lr_min > lr_max) {
    throw ConfigError("lr_min must lie in [0, lr_max]");
  }
  if (max_steps == 0) throw ConfigError("max_steps must be positive");
  if (warmup_steps >= max_steps) {
    throw ConfigError("warmup_steps (" + std::to_string(warmup_steps) +
                      ") must be smaller than max_steps (" + std::to_string(max_steps) + ")");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (seq_len == 0) throw ConfigError("seq_len must be positive");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0) throw ConfigError("adam_beta1 must be in [0, 1)");
  if (adam_beta2 < 0.0 || adam_beta2 >= 1.0) throw ConfigError("adam_beta2 must be in [0, 1)");
  if (adam_eps <= 0.0) throw ConfigError("adam_eps must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

double lr_at(std::size_t step, const TrainConfig& config) {
  if (step < config.warmup_steps) {
    return config.lr_max * static_cast<double>(step + 1) /
           static_cast<double>(config.warmup_steps);
  }
  const std::size_t span = config.max_steps - config.warmup_steps;
  double progress = span == 0 ? 1.0
                              : static_cast<double>(step - config.warmup_steps) /
                                    static_cast<double>(span);
  progress = std::min(progress, 1.0);
  return config.lr_min +
         0.5 * (config.lr_max - config.lr_min) * (1.0 + std::cos(progress * M_PI));
}

double clip_gradients(std::vector<Tensor>& grads, double clip_norm) {
  double sum_sq = 0.0;
  for (const Tensor& g : grads) {
    const double* p = g.data();
    for (std::size_t i = 0, n = g.size(); i < n; ++i) sum_sq += p[i] * p[i];
  }
  const double norm = std::sqrt(sum_sq);
  if (clip_norm > 0.0 && norm > clip_norm) {
    const double factor = clip_norm / norm;
    for (Tensor& g : grads) {
      double* p = g.data();
      for (std::size_t i = 0, n = g.size(); i < n; ++i) p[i] *= factor;
    }
  }
  return norm;
}

OptimizerState OptimizerState::init(const model::ModelParams& params) {
  OptimizerState state;
  params.for_each_tensor([&](const std::string& name, const Tensor& t) {
    state.slots.emplace_back(name, AdamSlot{Tensor::zeros(t.shape()), Tensor::zeros(t.shape())});
  });
  return state;
}

void adam_step(model::ModelParams& params, const std::vector<Tensor>& grads,
               OptimizerState& state, double lr, const TrainConfig& config) {
  state.step += 1;
  const double beta1 = config.adam_beta1;
  const double beta2 = config.adam_beta2;
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  std::size_t index = 0;
  params.for_each_tensor([&](const std::string& name, Tensor& p) {
    if (index >= grads.size() || index >= state.slots.size()) {
      throw ShapeError("adam_step: gradient/state count does not match parameter count");
    }
    const Tensor& g = grads[index];
    AdamSlot& slot = state.slots[index].second;
    if (!g.same_shape(p) || !slot.m.same_shape(p)) {
      throw ShapeError("adam_step: shape mismatch for " + name + ": param " +
                       shape_str(p.shape()) + ", grad " + shape_str(g.shape()));
    }
    const bool decay = config.weight_decay > 0.0 && p.rank() >= 2;
    const double wd = decay ? lr * config.weight_decay : 0.0;
    double* pp = p.data();
    const double* gp = g.data();
    double* mp = slot.m.data();
    double* vp = slot.v.data();
    for (std::size_t i = 0, n = p.size(); i < n; ++i) {
      mp[i] = beta1 * mp[i] + (1.0 - beta1) * gp[i];
      vp[i] = beta2 * vp[i] + (1.0 - beta2) * gp[i] * gp[i];
      const double m_hat = mp[i] / bias1;
      const double v_hat = vp[i] / bias2;
      pp[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps) + wd * pp[i];
    }
    ++index;
  });
  if (index != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(index) + " parameters");
  }
}

Trainer::Trainer(model::ModelConfig model_config, TrainConfig train_config)
    : model_config_(std::move(model_config)),
      train_config_(train_config),
      plan_(model::build_sharing_plan(model_config_.num_layers, model_config_.sharing_mode,
                                      model_config_.group_count)),
      params_(model::init_model(model_config_, train_config.seed)),
      optimizer_(OptimizerState::init(params_)),
      rng_(Rng::from_stream(train_config.seed, 0x9e3779b97f4a7c15ull)) {}

Trainer::Trainer(model::ModelConfig model_config, TrainConfig train_config,
                 model::ModelParams params, OptimizerState optimizer, Rng rng,
                 std::uint64_t step)
    : model_config_(std::move(model_config)),
      train_config_(train_config),
      plan_(model::build_sharing_plan(model_config_.num_layers, model_config_.sharing_mode,
                                      model_config_.group_count)),
      params_(std::move(params)),
      optimizer_(std::move(optimizer)),
      rng_(rng),
      step_(step) {}

std::optional<double> Trainer::validation_loss(const data::CorpusSplit& split) const {
  if (data::window_count(split.validation.size(), train_config_.seq_len) == 0) {
    return std::nullopt;
  }
  return eval::perplexity(params_, plan_, model_config_, split.validation,
                          train_config_.seq_len)
      .nll;
}

Trainer::Result Trainer::run(const data::CorpusSplit& split, const Hooks& hooks) {
  model_config_.validate();
  train_config_.validate();
  if (train_config_.seq_len > model_config_.max_seq_len) {
    throw ConfigError("seq_len (" + std::to_string(train_config_.seq_len) +
                      ") exceeds max_seq_len (" + std::to_string(model_config_.max_seq_len) +
                      ")");
  }
  const std::size_t windows =
      data::window_count(split.train.size(), train_config_.seq_len);
  if (windows == 0) {
    throw DataError("train: corpus of " + std::to_string(split.train.size()) +
                    " tokens is shorter than seq_len+1");
  }
  const std::size_t batches_per_epoch =
      (windows + train_config_.batch_size - 1) / train_config_.batch_size;
  std::uint64_t total_steps = train_config_.max_steps;
  if (train_config_.epochs > 0) {
    total_steps = std::min<std::uint64_t>(
        total_steps, static_cast<std::uint64_t>(train_config_.epochs) * batches_per_epoch);
  }

  Result result;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t evals_without_improvement = 0;
  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<data::Batch> epoch_batches;
  std::uint64_t tokens_seen = 0;
  const auto started = std::chrono::steady_clock::now();

  for (; step_ < total_steps; ++step_) {
    const std::uint64_t epoch = step_ / batches_per_epoch;
    const std::size_t index = static_cast<std::size_t>(step_ % batches_per_epoch);
    if (epoch != cached_epoch) {
      epoch_batches = data::make_batches(split.train, train_config_.batch_size,
                                         train_config_.seq_len, train_config_.seed, epoch);
      cached_epoch = epoch;
    }
    const data::Batch& batch = epoch_batches[index];
    const double lr = lr_at(static_cast<std::size_t>(step_), train_config_);

    double loss_value = 0.0;
    try {
      Tape tape;
      model::BoundParams bound = model::bind_params(tape, params_);
      Var logits = model::forward(bound, plan_, model_config_, batch.inputs, batch.batch,
                                  batch.time, /*training=*/true, rng_);
      Var loss = cross_entropy(logits, batch.targets);
      loss_value = loss.value().item();
      tape.backward(loss);

      std::vector<Tensor> grads;
      grads.reserve(bound.named.size());
      for (auto& [name, var] : bound.named) grads.push_back(tape.take_grad(var));
      clip_gradients(grads, train_config_.clip_norm);
      adam_step(params_, grads, optimizer_, lr, train_config_);
    } catch (const NumericsError& err) {
      throw NumericsError("step " + std::to_string(step_) + ": " + err.what());
    }
    tokens_seen += static_cast<std::uint64_t>(batch.batch) * batch.time;

    StepRecord record{step_, loss_value, lr, std::nullopt};
    if (step_ == 0) result.initial_train_loss = loss_value;

    const bool last_step = step_ + 1 == total_steps;
    const bool eval_due = train_config_.eval_interval > 0 &&
                          step_ % train_config_.eval_interval == 0;
    if (eval_due || last_step) {
      record.val_loss = validation_loss(split);
      if (record.val_loss) {
        result.final_val_loss = record.val_loss;
        if (*record.val_loss < best_val) {
          best_val = *record.val_loss;
          evals_without_improvement = 0;
        } else {
          ++evals_without_improvement;
        }
      }
    }

    result.trace.push_back(record);
    if (hooks.on_step) hooks.on_step(record);

    if (train_config_.checkpoint_interval > 0 && step_ % train_config_.checkpoint_interval == 0 &&
        step_ > 0 && hooks.on_checkpoint) {
      // Hook sees the state *after* this step's update; resuming from it
      // replays from step_+1.
      ++step_;
      hooks.on_checkpoint(*this, step_);
      --step_;
    }

    if (train_config_.early_stop_patience > 0 &&
        evals_without_improvement >= train_config_.early_stop_patience) {
      result.early_stopped = true;
      ++step_;
      break;
    }
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.steps_completed = step_;
  result.tokens_per_second = elapsed > 0.0 ? static_cast<double>(tokens_seen) / elapsed : 0.0;
  return result;
}

}  // namespace gpte::train
