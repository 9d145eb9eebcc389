#include "gpte/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gpte/error.hpp"
#include "gpte/eval.hpp"

namespace gpte::sweep {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell_label(const SweepRow& row) {
  std::string label = model::to_string(row.mode);
  if (row.mode == model::SharingMode::kGrouped) {
    label += " G=" + std::to_string(row.group_count);
  }
  if (row.factorized) label += ", factorized";
  return label;
}

}  // namespace

std::vector<model::ModelConfig> expand_grid(const SweepGrid& grid) {
  grid.base_model.validate();
  grid.base_train.validate();
  if (grid.steps_per_cell == 0) throw ConfigError("steps_per_cell must be positive");
  if (grid.d_ff_multiplier == 0) throw ConfigError("d_ff_multiplier must be positive");

  const auto hs = grid.hidden_sizes.empty() ? std::vector<std::size_t>{grid.base_model.hidden_size}
                                            : grid.hidden_sizes;
  const auto gs = grid.group_counts.empty() ? std::vector<std::size_t>{grid.base_model.group_count}
                                            : grid.group_counts;
  const auto ms = grid.modes.empty() ? std::vector<model::SharingMode>{grid.base_model.sharing_mode}
                                     : grid.modes;
  const auto fs = grid.factorized.empty() ? std::vector<bool>{grid.base_model.factorize_embedding}
                                          : grid.factorized;
  if (hs.empty() || gs.empty() || ms.empty() || fs.empty()) {
    throw ConfigError("sweep grid axes must be nonempty");
  }

  // Validate every cell before any training so a bad grid fails fast.
  std::vector<model::ModelConfig> cells;
  for (model::SharingMode mode : ms) {
    for (std::size_t hidden : hs) {
      for (std::size_t groups : gs) {
        for (bool factorize : fs) {
          model::ModelConfig cell = grid.base_model;
          cell.sharing_mode = mode;
          cell.hidden_size = hidden;
          cell.d_ff = grid.d_ff_multiplier * hidden;
          cell.group_count = groups;
          cell.factorize_embedding = factorize;
          try {
            cell.validate();
          } catch (const ConfigError& err) {
            throw ConfigError("sweep: invalid cell (mode=" + model::to_string(mode) +
                              ", H=" + std::to_string(hidden) + ", G=" + std::to_string(groups) +
                              ", factorized=" + (factorize ? "true" : "false") +
                              "): " + err.what());
          }
          cells.push_back(std::move(cell));
        }
      }
    }
  }
  return cells;
}

std::vector<SweepRow> run_sweep(const SweepGrid& grid, const data::CorpusSplit& split) {
  const std::vector<model::ModelConfig> cells = expand_grid(grid);

  train::TrainConfig cell_train = grid.base_train;
  cell_train.max_steps = grid.steps_per_cell;
  cell_train.checkpoint_interval = 0;
  cell_train.validate();

  std::vector<SweepRow> rows;
  rows.reserve(cells.size());
  for (const model::ModelConfig& cell : cells) {
    const auto started = std::chrono::steady_clock::now();
    train::Trainer trainer(cell, cell_train);
    const train::Trainer::Result result = trainer.run(split);

    const eval::EvalReport report = eval::perplexity(
        trainer.params(), trainer.plan(), cell, split.validation, cell_train.seq_len);
    const std::size_t prefix_len =
        std::min(cell_train.seq_len, split.validation.size() > 1 ? split.validation.size() - 1
                                                                 : std::size_t{1});
    const auto contexts =
        eval::contexts_from_stream(split.validation, grid.eval_contexts, prefix_len);
    const double accuracy =
        eval::last_token_accuracy(trainer.params(), trainer.plan(), cell, contexts);

    SweepRow row;
    row.mode = cell.sharing_mode;
    row.hidden_size = cell.hidden_size;
    row.group_count = cell.group_count;
    row.embedding_size = cell.embedding_size;
    row.factorized = cell.factorize_embedding;
    row.n_params = model::param_count(cell).total_unique;
    row.train_loss = result.trace.empty() ? 0.0 : result.trace.back().loss;
    row.val_ppl = report.perplexity;
    row.last_tok_acc = accuracy;
    row.tokens_per_second = result.tokens_per_second;
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string rows_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "mode,H,G,E,factorized,n_params,train_loss,val_ppl,last_tok_acc,tok_per_s,seconds\n";
  for (const SweepRow& row : rows) {
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.3f,%.3f", row.tokens_per_second, row.seconds);
    os << model::to_string(row.mode) << ',' << row.hidden_size << ',' << row.group_count << ','
       << row.embedding_size << ',' << (row.factorized ? "true" : "false") << ',' << row.n_params
       << ',' << format_double(row.train_loss) << ',' << format_double(row.val_ppl) << ','
       << format_double(row.last_tok_acc) << ',' << timing << '\n';
  }
  return os.str();
}

std::string rows_to_markdown(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "| Model | $d_{model}$ | $n_{params}$ | val (ppl) | last-token (acc) | tok/s |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const SweepRow& row : rows) {
    char metrics[96];
    std::snprintf(metrics, sizeof metrics, "%.3f | %.4f | %.0f", row.val_ppl, row.last_tok_acc,
                  row.tokens_per_second);
    os << "| " << cell_label(row) << " | " << row.hidden_size << " | " << row.n_params << " | "
       << metrics << " |\n";
  }
  return os.str();
}

std::vector<model::ModelConfig> fit_config(std::uint64_t target, const FitSpace& space,
                                           double tolerance) {
  if (tolerance < 0.0) throw UsageError("fit_config: tolerance must be >= 0");
  if (target == 0) throw UsageError("fit_config: target must be positive");
  if (space.layers.empty() || space.group_counts.empty() || space.vocab_sizes.empty() ||
      space.d_ff_multipliers.empty() || space.factorized.empty()) {
    throw ConfigError("fit_config: search space axes must be nonempty");
  }

  struct Match {
    model::ModelConfig config;
    std::uint64_t distance;
    std::size_t order;
  };
  std::vector<Match> matches;
  std::size_t order = 0;

  auto consider = [&](model::ModelConfig candidate) {
    try {
      candidate.validate();
    } catch (const ConfigError&) {
      return;  // out-of-range combination, not an error for a search
    }
    const std::uint64_t unique = model::param_count(candidate).total_unique;
    const std::uint64_t distance = unique > target ? unique - target : target - unique;
    if (static_cast<double>(distance) <= tolerance * static_cast<double>(target)) {
      matches.push_back({std::move(candidate), distance, order});
    }
    ++order;
  };

  for (bool factorize : space.factorized) {
    const auto& embeddings = factorize ? space.embedding_sizes
                                       : std::vector<std::size_t>{space.base.embedding_size};
    if (factorize && space.embedding_sizes.empty()) {
      throw ConfigError("fit_config: embedding_sizes must be nonempty when factorized");
    }
    for (std::size_t vocab : space.vocab_sizes) {
      for (std::size_t layers : space.layers) {
        for (std::size_t embedding : embeddings) {
          for (std::size_t groups : space.group_counts) {
            for (std::size_t dff_mult : space.d_ff_multipliers) {
              model::ModelConfig candidate = space.base;
              candidate.vocab_size = vocab;
              candidate.num_layers = layers;
              candidate.embedding_size = embedding;
              candidate.group_count = groups;
              candidate.d_ff = dff_mult * candidate.hidden_size;
              candidate.factorize_embedding = factorize;
              consider(std::move(candidate));
            }
          }
        }
      }
    }
  }

  std::stable_sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.order < b.order;
  });
  std::vector<model::ModelConfig> configs;
  configs.reserve(matches.size());
  for (Match& m : matches) configs.push_back(std::move(m.config));
  return configs;
}

}  // namespace gpte::sweep
