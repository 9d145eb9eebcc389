#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpte/data.hpp"
#include "gpte/model.hpp"
#include "gpte/sweep.hpp"
#include "gpte/trainer.hpp"

namespace gpte::io {

using Json = nlohmann::ordered_json;

// Config objects use exactly the field names of the structs they mirror;
// unknown keys are rejected by name so a misspelled hyperparameter cannot
// silently fall back to a default.

Json to_json(const model::ModelConfig& config);
model::ModelConfig model_config_from_json(const Json& json);

Json to_json(const train::TrainConfig& config);
train::TrainConfig train_config_from_json(const Json& json);

Json to_json(const data::TokenizerSpec& spec);
data::TokenizerSpec tokenizer_from_json(const Json& json);

Json to_json(const model::ParamReport& report);

// Run configuration file: {"model": {...}, "train": {...}} plus optional
// "data" (list of corpus paths), "out" and "seed".
struct RunConfig {
  std::optional<model::ModelConfig> model;
  std::optional<train::TrainConfig> train;
  std::vector<std::string> data_paths;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

RunConfig run_config_from_json(const Json& json);
RunConfig load_run_config(const std::filesystem::path& path);

// The fully resolved inputs of a run, written to the output directory before
// any compute; re-running `train` on a manifest reproduces the run.
struct RunManifest {
  model::ModelConfig model;
  train::TrainConfig train;
  std::vector<std::string> data_paths;
  std::string out_dir;
  std::uint64_t seed = 0;
};

Json to_json(const RunManifest& manifest);

// Sweep file: {"model": ..., "train": ..., "grid": {...}}.
sweep::SweepGrid sweep_grid_from_json(const Json& json);

// Fit-space file: {"model": ..., "space": {...}}.
sweep::FitSpace fit_space_from_json(const Json& json);

Json parse_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gpte::io
