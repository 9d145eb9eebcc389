#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gpte/data.hpp"
#include "gpte/model.hpp"
#include "gpte/trainer.hpp"

namespace gpte::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything needed to resume a run: configs, step counter, the dropout
// stream state, the tokenizer, parameters and optimizer moments.
struct Checkpoint {
  model::ModelConfig model_config;
  TrainConfig train_config;
  std::uint64_t step = 0;
  std::string rng_state;
  data::TokenizerSpec tokenizer;
  model::ModelParams params;
  OptimizerState optimizer;
};

// File layout: magic "GPTE", u32 little-endian version, u64 header length,
// UTF-8 JSON header (configs, step, rng state, tokenizer, tensor directory
// with name/dtype/shape/byte-offset), then contiguous little-endian IEEE-754
// payloads in directory order. Offsets are relative to the payload section.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

// Exact inverse of save_checkpoint. Truncation, magic/version mismatches and
// shape/dtype disagreements with the stored config raise FormatError; no
// partial state is returned.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gpte::train
