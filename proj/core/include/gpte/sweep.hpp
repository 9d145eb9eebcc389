#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpte/data.hpp"
#include "gpte/model.hpp"
#include "gpte/trainer.hpp"

namespace gpte::sweep {

// Grid axes over a fixed base configuration. Every cell trains from the same
// seed for the same step budget; d_ff follows the hidden size through
// d_ff_multiplier so width cells stay proportionate.
struct SweepGrid {
  model::ModelConfig base_model;
  train::TrainConfig base_train;
  std::vector<std::size_t> hidden_sizes;      // empty: {base_model.hidden_size}
  std::vector<std::size_t> group_counts;      // empty: {base_model.group_count}
  std::vector<model::SharingMode> modes;      // empty: {base_model.sharing_mode}
  std::vector<bool> factorized;               // empty: {base_model.factorize_embedding}
  std::size_t d_ff_multiplier = 4;
  std::size_t steps_per_cell = 100;
  std::size_t eval_contexts = 100;
};

struct SweepRow {
  model::SharingMode mode = model::SharingMode::kNone;
  std::size_t hidden_size = 0;
  std::size_t group_count = 0;
  std::size_t embedding_size = 0;
  bool factorized = false;
  std::uint64_t n_params = 0;  // total_unique for the cell's config
  double train_loss = 0.0;
  double val_ppl = 0.0;
  double last_tok_acc = 0.0;
  double tokens_per_second = 0.0;
  double seconds = 0.0;
};

// All cell configs in axis order (mode, hidden, group, factorized), each
// validated. Any invalid cell rejects the whole grid before training starts.
std::vector<model::ModelConfig> expand_grid(const SweepGrid& grid);

std::vector<SweepRow> run_sweep(const SweepGrid& grid, const data::CorpusSplit& split);

std::string rows_to_csv(const std::vector<SweepRow>& rows);
std::string rows_to_markdown(const std::vector<SweepRow>& rows);

// Exhaustive inverse search: every combination from the axis lists below
// (layers x embedding x groups x vocab x d_ff multiplier x factorization)
// over the base config's fixed fields, returning configs whose total unique
// parameter count lies within `tolerance` (relative) of `target`, closest
// first. Combinations that do not validate are skipped.
struct FitSpace {
  model::ModelConfig base;  // fixes hidden_size, num_heads, max_seq_len, ...
  std::vector<std::size_t> layers;
  std::vector<std::size_t> embedding_sizes;
  std::vector<std::size_t> group_counts;
  std::vector<std::size_t> vocab_sizes;
  std::vector<std::size_t> d_ff_multipliers;
  std::vector<bool> factorized = {true};
};

std::vector<model::ModelConfig> fit_config(std::uint64_t target, const FitSpace& space,
                                           double tolerance);

}  // namespace gpte::sweep
