#include "gpte/config_io.hpp"

#include <fstream>
#include <set>

#include "gpte/error.hpp"

namespace gpte::io {

namespace {

// Reads declared fields out of a JSON object and rejects everything else.
class FieldReader {
 public:
  FieldReader(const Json& json, std::string scope) : json_(json), scope_(std::move(scope)) {
    if (!json.is_object()) {
      throw ConfigError(scope_ + ": expected a JSON object");
    }
  }

  void read(const char* key, std::size_t& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
        throw ConfigError(scope_ + "." + key + ": expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void read(const char* key, std::uint64_t& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
        throw ConfigError(scope_ + "." + key + ": expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void read(const char* key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) {
        throw ConfigError(scope_ + "." + key + ": expected a number");
      }
      out = v->get<double>();
    }
  }

  void read(const char* key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) {
        throw ConfigError(scope_ + "." + key + ": expected a boolean");
      }
      out = v->get<bool>();
    }
  }

  void read(const char* key, std::string& out) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) {
        throw ConfigError(scope_ + "." + key + ": expected a string");
      }
      out = v->get<std::string>();
    }
  }

  void read(const char* key, std::vector<std::size_t>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) {
        throw ConfigError(scope_ + "." + key + ": expected an array of integers");
      }
      out.clear();
      for (const Json& item : *v) {
        if (!item.is_number_integer() || item.get<std::int64_t>() < 0) {
          throw ConfigError(scope_ + "." + key + ": expected non-negative integers");
        }
        out.push_back(item.get<std::size_t>());
      }
    }
  }

  void read(const char* key, std::vector<bool>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) {
        throw ConfigError(scope_ + "." + key + ": expected an array of booleans");
      }
      out.clear();
      for (const Json& item : *v) {
        if (!item.is_boolean()) {
          throw ConfigError(scope_ + "." + key + ": expected booleans");
        }
        out.push_back(item.get<bool>());
      }
    }
  }

  void read(const char* key, std::vector<std::string>& out) {
    if (const Json* v = find(key)) {
      if (!v->is_array()) {
        throw ConfigError(scope_ + "." + key + ": expected an array of strings");
      }
      out.clear();
      for (const Json& item : *v) {
        if (!item.is_string()) {
          throw ConfigError(scope_ + "." + key + ": expected strings");
        }
        out.push_back(item.get<std::string>());
      }
    }
  }

  const Json* find(const char* key) {
    seen_.insert(key);
    auto it = json_.find(key);
    return it == json_.end() ? nullptr : &*it;
  }

  // Call after all reads: any leftover key is a config error.
  void finish() const {
    for (const auto& item : json_.items()) {
      if (!seen_.contains(item.key())) {
        throw ConfigError(scope_ + ": unknown key \"" + item.key() + "\"");
      }
    }
  }

 private:
  const Json& json_;
  std::string scope_;
  std::set<std::string> seen_;
};

}  // namespace

Json to_json(const model::ModelConfig& config) {
  Json json;
  json["vocab_size"] = config.vocab_size;
  json["embedding_size"] = config.embedding_size;
  json["hidden_size"] = config.hidden_size;
  json["num_layers"] = config.num_layers;
  json["num_heads"] = config.num_heads;
  json["d_ff"] = config.d_ff;
  json["max_seq_len"] = config.max_seq_len;
  json["sharing_mode"] = model::to_string(config.sharing_mode);
  json["group_count"] = config.group_count;
  json["factorize_embedding"] = config.factorize_embedding;
  json["tie_output_head"] = config.tie_output_head;
  json["activation"] = model::to_string(config.activation);
  json["dropout_rate"] = config.dropout_rate;
  return json;
}

model::ModelConfig model_config_from_json(const Json& json) {
  model::ModelConfig config;
  FieldReader reader(json, "model");
  reader.read("vocab_size", config.vocab_size);
  reader.read("embedding_size", config.embedding_size);
  reader.read("hidden_size", config.hidden_size);
  reader.read("num_layers", config.num_layers);
  reader.read("num_heads", config.num_heads);
  reader.read("d_ff", config.d_ff);
  reader.read("max_seq_len", config.max_seq_len);
  std::string sharing_mode = model::to_string(config.sharing_mode);
  reader.read("sharing_mode", sharing_mode);
  config.sharing_mode = model::sharing_mode_from_string(sharing_mode);
  reader.read("group_count", config.group_count);
  reader.read("factorize_embedding", config.factorize_embedding);
  reader.read("tie_output_head", config.tie_output_head);
  std::string activation = model::to_string(config.activation);
  reader.read("activation", activation);
  config.activation = model::activation_from_string(activation);
  reader.read("dropout_rate", config.dropout_rate);
  reader.finish();
  return config;
}

Json to_json(const train::TrainConfig& config) {
  Json json;
  json["lr_max"] = config.lr_max;
  json["lr_min"] = config.lr_min;
  json["warmup_steps"] = config.warmup_steps;
  json["max_steps"] = config.max_steps;
  json["epochs"] = config.epochs;
  json["batch_size"] = config.batch_size;
  json["seq_len"] = config.seq_len;
  json["adam_beta1"] = config.adam_beta1;
  json["adam_beta2"] = config.adam_beta2;
  json["adam_eps"] = config.adam_eps;
  json["weight_decay"] = config.weight_decay;
  json["clip_norm"] = config.clip_norm;
  json["seed"] = config.seed;
  json["eval_interval"] = config.eval_interval;
  json["checkpoint_interval"] = config.checkpoint_interval;
  json["early_stop_patience"] = config.early_stop_patience;
  return json;
}

train::TrainConfig train_config_from_json(const Json& json) {
  train::TrainConfig config;
  FieldReader reader(json, "train");
  reader.read("lr_max", config.lr_max);
  reader.read("lr_min", config.lr_min);
  reader.read("warmup_steps", config.warmup_steps);
  reader.read("max_steps", config.max_steps);
  reader.read("epochs", config.epochs);
  reader.read("batch_size", config.batch_size);
  reader.read("seq_len", config.seq_len);
  reader.read("adam_beta1", config.adam_beta1);
  reader.read("adam_beta2", config.adam_beta2);
  reader.read("adam_eps", config.adam_eps);
  reader.read("weight_decay", config.weight_decay);
  reader.read("clip_norm", config.clip_norm);
  reader.read("seed", config.seed);
  reader.read("eval_interval", config.eval_interval);
  reader.read("checkpoint_interval", config.checkpoint_interval);
  reader.read("early_stop_patience", config.early_stop_patience);
  reader.finish();
  return config;
}

Json to_json(const data::TokenizerSpec& spec) {
  Json json;
  json["kind"] = spec.kind == data::TokenizerKind::kByte ? "byte" : "char_vocab";
  if (spec.kind == data::TokenizerKind::kCharVocab) {
    json["vocab"] = spec.vocab;
  }
  return json;
}

data::TokenizerSpec tokenizer_from_json(const Json& json) {
  FieldReader reader(json, "tokenizer");
  std::string kind = "byte";
  reader.read("kind", kind);
  data::TokenizerSpec spec;
  if (kind == "byte") {
    spec = data::TokenizerSpec::byte();
    reader.finish();
    return spec;
  }
  if (kind != "char_vocab") {
    throw ConfigError("tokenizer.kind: unknown value \"" + kind + "\"");
  }
  spec.kind = data::TokenizerKind::kCharVocab;
  if (const Json* v = reader.find("vocab")) {
    if (!v->is_array()) throw ConfigError("tokenizer.vocab: expected an array");
    for (const Json& item : *v) {
      if (!item.is_number_integer() || item.get<std::int64_t>() < 0 ||
          item.get<std::int64_t>() > 255) {
        throw ConfigError("tokenizer.vocab: expected byte values in [0, 255]");
      }
      spec.vocab.push_back(item.get<std::uint8_t>());
    }
  }
  spec.vocab_size = spec.vocab.size() + 1;
  reader.finish();
  return spec;
}

Json to_json(const model::ParamReport& report) {
  Json json;
  json["embedding_params"] = report.embedding_params;
  json["positional_params"] = report.positional_params;
  json["block_params_unique"] = report.block_params_unique;
  json["block_params_logical"] = report.block_params_logical;
  json["head_params"] = report.head_params;
  json["total_unique"] = report.total_unique;
  json["total_logical"] = report.total_logical;
  json["reduction_ratio"] = report.reduction_ratio;
  return json;
}

RunConfig run_config_from_json(const Json& json) {
  RunConfig config;
  FieldReader reader(json, "config");
  if (const Json* v = reader.find("model")) {
    config.model = model_config_from_json(*v);
  }
  if (const Json* v = reader.find("train")) {
    config.train = train_config_from_json(*v);
  }
  reader.read("data", config.data_paths);
  std::string out;
  reader.read("out", out);
  if (!out.empty()) config.out_dir = out;
  if (const Json* v = reader.find("seed")) {
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
      throw ConfigError("config.seed: expected a non-negative integer");
    }
    config.seed = v->get<std::uint64_t>();
  }
  reader.finish();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(parse_json_file(path));
}

Json to_json(const RunManifest& manifest) {
  Json json;
  json["model"] = to_json(manifest.model);
  json["train"] = to_json(manifest.train);
  json["data"] = manifest.data_paths;
  json["out"] = manifest.out_dir;
  json["seed"] = manifest.seed;
  return json;
}

sweep::SweepGrid sweep_grid_from_json(const Json& json) {
  sweep::SweepGrid grid;
  FieldReader reader(json, "sweep");
  if (const Json* v = reader.find("model")) {
    grid.base_model = model_config_from_json(*v);
  }
  if (const Json* v = reader.find("train")) {
    grid.base_train = train_config_from_json(*v);
  }
  if (const Json* v = reader.find("grid")) {
    FieldReader axes(*v, "sweep.grid");
    axes.read("hidden_sizes", grid.hidden_sizes);
    axes.read("group_counts", grid.group_counts);
    std::vector<std::string> modes;
    axes.read("modes", modes);
    for (const std::string& mode : modes) {
      grid.modes.push_back(model::sharing_mode_from_string(mode));
    }
    axes.read("factorized", grid.factorized);
    axes.read("d_ff_multiplier", grid.d_ff_multiplier);
    axes.read("steps_per_cell", grid.steps_per_cell);
    axes.read("eval_contexts", grid.eval_contexts);
    axes.finish();
  }
  reader.finish();
  return grid;
}

sweep::FitSpace fit_space_from_json(const Json& json) {
  sweep::FitSpace space;
  FieldReader reader(json, "fit");
  if (const Json* v = reader.find("model")) {
    space.base = model_config_from_json(*v);
  }
  if (const Json* v = reader.find("space")) {
    FieldReader axes(*v, "fit.space");
    axes.read("layers", space.layers);
    axes.read("embedding_sizes", space.embedding_sizes);
    axes.read("group_counts", space.group_counts);
    axes.read("vocab_sizes", space.vocab_sizes);
    axes.read("d_ff_multipliers", space.d_ff_multipliers);
    axes.read("factorized", space.factorized);
    axes.finish();
  }
  reader.finish();
  return space;
}

Json parse_json_file(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) {
    throw DataError("cannot open config file: " + path.string());
  }
  try {
    return Json::parse(file);
  } catch (const nlohmann::json::parse_error& err) {
    throw FormatError("malformed JSON in " + path.string() + ": " + err.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw DataError("cannot open for writing: " + path.string());
  }
  file << text;
  if (!file) {
    throw DataError("failed writing: " + path.string());
  }
}

}  // namespace gpte::io
