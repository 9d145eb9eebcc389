#include "gpte/model.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "gpte/error.hpp"

namespace gpte::model {

namespace {
// Finite stand-in for -inf: exp(x - max) underflows to exactly 0, so masked
// positions get probability 0 while tensors stay finite.
constexpr double kMaskValue = -1e30;
constexpr double kInitStd = 0.02;
}  // namespace

std::string to_string(SharingMode mode) {
  switch (mode) {
    case SharingMode::kNone: return "none";
    case SharingMode::kAll: return "all";
    case SharingMode::kAttnOnly: return "attn_only";
    case SharingMode::kFfnOnly: return "ffn_only";
    case SharingMode::kGrouped: return "grouped";
  }
  return "none";
}

SharingMode sharing_mode_from_string(const std::string& name) {
  if (name == "none") return SharingMode::kNone;
  if (name == "all") return SharingMode::kAll;
  if (name == "attn_only") return SharingMode::kAttnOnly;
  if (name == "ffn_only") return SharingMode::kFfnOnly;
  if (name == "grouped") return SharingMode::kGrouped;
  throw ConfigError("sharing_mode: unknown value \"" + name +
                    "\" (expected none|all|attn_only|ffn_only|grouped)");
}

std::string to_string(ActivationKind kind) {
  return kind == ActivationKind::kRelu ? "relu" : "gelu";
}

ActivationKind activation_from_string(const std::string& name) {
  if (name == "relu") return ActivationKind::kRelu;
  if (name == "gelu") return ActivationKind::kGelu;
  throw ConfigError("activation: unknown value \"" + name + "\" (expected relu|gelu)");
}

void ModelConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (hidden_size == 0) throw ConfigError("hidden_size must be positive");
  if (num_layers == 0) throw ConfigError("num_layers must be positive");
  if (num_heads == 0 || hidden_size % num_heads != 0) {
    throw ConfigError("num_heads (" + std::to_string(num_heads) +
                      ") must divide hidden_size (" + std::to_string(hidden_size) + ")");
  }
  if (d_ff == 0) throw ConfigError("d_ff must be positive");
  if (max_seq_len == 0) throw ConfigError("max_seq_len must be positive");
  if (sharing_mode == SharingMode::kGrouped &&
      (group_count < 1 || group_count > num_layers)) {
    throw ConfigError("group_count (" + std::to_string(group_count) + ") must lie in [1, " +
                      std::to_string(num_layers) + "]");
  }
  if (factorize_embedding) {
    if (embedding_size == 0) throw ConfigError("embedding_size must be positive");
    if (embedding_size > hidden_size) {
      throw ConfigError("embedding_size (" + std::to_string(embedding_size) +
                        ") must not exceed hidden_size (" + std::to_string(hidden_size) +
                        ") when factorize_embedding is set");
    }
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("dropout_rate must be in [0, 1), got " + std::to_string(dropout_rate));
  }
}

SharingPlan build_sharing_plan(std::size_t num_layers, SharingMode mode,
                               std::size_t group_count) {
  if (num_layers == 0) throw ConfigError("num_layers must be positive");
  SharingPlan plan;
  plan.layer_to_attn_group.resize(num_layers);
  plan.layer_to_ffn_group.resize(num_layers);
  switch (mode) {
    case SharingMode::kNone:
      std::iota(plan.layer_to_attn_group.begin(), plan.layer_to_attn_group.end(), 0u);
      plan.layer_to_ffn_group = plan.layer_to_attn_group;
      plan.unique_attn_groups = plan.unique_ffn_groups = num_layers;
      break;
    case SharingMode::kAll:
      plan.unique_attn_groups = plan.unique_ffn_groups = 1;
      break;
    case SharingMode::kAttnOnly:
      std::iota(plan.layer_to_ffn_group.begin(), plan.layer_to_ffn_group.end(), 0u);
      plan.unique_attn_groups = 1;
      plan.unique_ffn_groups = num_layers;
      break;
    case SharingMode::kFfnOnly:
      std::iota(plan.layer_to_attn_group.begin(), plan.layer_to_attn_group.end(), 0u);
      plan.unique_attn_groups = num_layers;
      plan.unique_ffn_groups = 1;
      break;
    case SharingMode::kGrouped:
      if (group_count < 1 || group_count > num_layers) {
        throw ConfigError("group_count (" + std::to_string(group_count) + ") must lie in [1, " +
                          std::to_string(num_layers) + "]");
      }
      for (std::size_t i = 0; i < num_layers; ++i) {
        plan.layer_to_attn_group[i] = i * group_count / num_layers;
      }
      plan.layer_to_ffn_group = plan.layer_to_attn_group;
      plan.unique_attn_groups = plan.unique_ffn_groups = group_count;
      break;
  }
  return plan;
}

std::size_t ModelParams::unique_tensor_count() const {
  std::size_t count = 0;
  for_each_tensor([&](const std::string&, const Tensor&) { ++count; });
  return count;
}

ParamReport param_count(const ModelConfig& config) {
  config.validate();
  const std::uint64_t v = config.vocab_size;
  const std::uint64_t e = config.embedding_size;
  const std::uint64_t h = config.hidden_size;
  const std::uint64_t layers = config.num_layers;
  const std::uint64_t dff = config.d_ff;

  ParamReport report;
  report.embedding_params = config.factorize_embedding ? v * e + e * h : v * h;
  report.positional_params = static_cast<std::uint64_t>(config.max_seq_len) * h;

  const std::uint64_t attn_part = 4 * h * h + 4 * h + 2 * h;       // weights+biases+ln1
  const std::uint64_t ffn_part = h * dff + dff + dff * h + h + 2 * h;  // w1,b1,w2,b2,ln2
  const SharingPlan plan = build_sharing_plan(layers, config.sharing_mode, config.group_count);
  report.block_params_unique = plan.unique_attn_groups * attn_part +
                               plan.unique_ffn_groups * ffn_part;
  report.block_params_logical = layers * (attn_part + ffn_part);
  report.head_params = config.tie_output_head ? 0 : h * v;

  const std::uint64_t final_norm = 2 * h;
  report.total_unique = report.embedding_params + report.positional_params +
                        report.block_params_unique + final_norm + report.head_params;
  report.total_logical = report.embedding_params + report.positional_params +
                         report.block_params_logical + final_norm + report.head_params;
  report.reduction_ratio = static_cast<double>(report.total_logical) /
                           static_cast<double>(report.total_unique);
  return report;
}

std::uint64_t count_enumerated(const ModelParams& params) {
  std::uint64_t total = 0;
  params.for_each_tensor([&](const std::string&, const Tensor& t) { total += t.size(); });
  return total;
}

namespace {

Tensor normal_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0, n = t.size(); i < n; ++i) t[i] = rng.normal(0.0, kInitStd);
  return t;
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t v = config.vocab_size;
  const std::size_t e = config.embedding_size;
  const std::size_t h = config.hidden_size;
  const std::size_t dff = config.d_ff;
  const SharingPlan plan =
      build_sharing_plan(config.num_layers, config.sharing_mode, config.group_count);

  ModelParams params;
  if (config.factorize_embedding) {
    params.word_embed = normal_tensor({v, e}, rng);
    params.embed_proj = normal_tensor({e, h}, rng);
  } else {
    params.word_embed = normal_tensor({v, h}, rng);
  }
  params.pos_embed = normal_tensor({config.max_seq_len, h}, rng);

  params.attn_groups.resize(plan.unique_attn_groups);
  for (auto& a : params.attn_groups) {
    a.wq = normal_tensor({h, h}, rng);
    a.bq = Tensor::zeros({h});
    a.wk = normal_tensor({h, h}, rng);
    a.bk = Tensor::zeros({h});
    a.wv = normal_tensor({h, h}, rng);
    a.bv = Tensor::zeros({h});
    a.wo = normal_tensor({h, h}, rng);
    a.bo = Tensor::zeros({h});
    a.ln1_gain = Tensor::full({h}, 1.0);
    a.ln1_bias = Tensor::zeros({h});
  }
  params.ffn_groups.resize(plan.unique_ffn_groups);
  for (auto& f : params.ffn_groups) {
    f.w1 = normal_tensor({h, dff}, rng);
    f.b1 = Tensor::zeros({dff});
    f.w2 = normal_tensor({dff, h}, rng);
    f.b2 = Tensor::zeros({h});
    f.ln2_gain = Tensor::full({h}, 1.0);
    f.ln2_bias = Tensor::zeros({h});
  }
  params.final_ln_gain = Tensor::full({h}, 1.0);
  params.final_ln_bias = Tensor::zeros({h});
  if (!config.tie_output_head) {
    params.head = normal_tensor({h, v}, rng);
  }
  return params;
}

ModelParams zero_params(const ModelConfig& config) {
  config.validate();
  const std::size_t v = config.vocab_size;
  const std::size_t e = config.embedding_size;
  const std::size_t h = config.hidden_size;
  const std::size_t dff = config.d_ff;
  const SharingPlan plan =
      build_sharing_plan(config.num_layers, config.sharing_mode, config.group_count);

  ModelParams params;
  params.word_embed = Tensor::zeros({v, config.factorize_embedding ? e : h});
  if (config.factorize_embedding) params.embed_proj = Tensor::zeros({e, h});
  params.pos_embed = Tensor::zeros({config.max_seq_len, h});
  params.attn_groups.resize(plan.unique_attn_groups);
  for (auto& a : params.attn_groups) {
    a.wq = Tensor::zeros({h, h});
    a.bq = Tensor::zeros({h});
    a.wk = Tensor::zeros({h, h});
    a.bk = Tensor::zeros({h});
    a.wv = Tensor::zeros({h, h});
    a.bv = Tensor::zeros({h});
    a.wo = Tensor::zeros({h, h});
    a.bo = Tensor::zeros({h});
    a.ln1_gain = Tensor::zeros({h});
    a.ln1_bias = Tensor::zeros({h});
  }
  params.ffn_groups.resize(plan.unique_ffn_groups);
  for (auto& f : params.ffn_groups) {
    f.w1 = Tensor::zeros({h, dff});
    f.b1 = Tensor::zeros({dff});
    f.w2 = Tensor::zeros({dff, h});
    f.b2 = Tensor::zeros({h});
    f.ln2_gain = Tensor::zeros({h});
    f.ln2_bias = Tensor::zeros({h});
  }
  params.final_ln_gain = Tensor::zeros({h});
  params.final_ln_bias = Tensor::zeros({h});
  if (!config.tie_output_head) params.head = Tensor::zeros({h, v});
  return params;
}

BoundParams bind_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  BoundParams bound;
  auto bind = [&](const std::string& name, const Tensor& t) {
    Var var = requires_grad ? tape.leaf(t) : tape.constant(t);
    bound.named.emplace_back(name, var);
    return var;
  };
  bound.word_embed = bind("embed.word", params.word_embed);
  if (!params.embed_proj.empty()) bound.embed_proj = bind("embed.proj", params.embed_proj);
  bound.pos_embed = bind("embed.pos", params.pos_embed);
  for (std::size_t g = 0; g < params.attn_groups.size(); ++g) {
    const auto& a = params.attn_groups[g];
    const std::string p = "attn.g" + std::to_string(g) + ".";
    BoundParams::AttnVars vars;
    vars.wq = bind(p + "wq", a.wq);
    vars.bq = bind(p + "bq", a.bq);
    vars.wk = bind(p + "wk", a.wk);
    vars.bk = bind(p + "bk", a.bk);
    vars.wv = bind(p + "wv", a.wv);
    vars.bv = bind(p + "bv", a.bv);
    vars.wo = bind(p + "wo", a.wo);
    vars.bo = bind(p + "bo", a.bo);
    vars.ln1_gain = bind(p + "ln1_gain", a.ln1_gain);
    vars.ln1_bias = bind(p + "ln1_bias", a.ln1_bias);
    bound.attn_groups.push_back(vars);
  }
  for (std::size_t g = 0; g < params.ffn_groups.size(); ++g) {
    const auto& f = params.ffn_groups[g];
    const std::string p = "ffn.g" + std::to_string(g) + ".";
    BoundParams::FfnVars vars;
    vars.w1 = bind(p + "w1", f.w1);
    vars.b1 = bind(p + "b1", f.b1);
    vars.w2 = bind(p + "w2", f.w2);
    vars.b2 = bind(p + "b2", f.b2);
    vars.ln2_gain = bind(p + "ln2_gain", f.ln2_gain);
    vars.ln2_bias = bind(p + "ln2_bias", f.ln2_bias);
    bound.ffn_groups.push_back(vars);
  }
  bound.final_ln_gain = bind("final_ln.gain", params.final_ln_gain);
  bound.final_ln_bias = bind("final_ln.bias", params.final_ln_bias);
  if (!params.head.empty()) bound.head = bind("head.w", params.head);
  return bound;
}

Tensor causal_mask(std::size_t time) {
  Tensor mask = Tensor::zeros({time, time});
  for (std::size_t i = 0; i < time; ++i) {
    for (std::size_t j = i + 1; j < time; ++j) mask.at({i, j}) = kMaskValue;
  }
  return mask;
}

Var attention_sublayer(const BoundParams::AttnVars& vars, const Var& x, std::size_t num_heads,
                       double dropout_rate, Rng& rng, bool training) {
  Tape& tape = *x.tape();
  const auto& shape = x.value().shape();
  const std::size_t batch = shape[0], time = shape[1], hidden = shape[2];
  const std::size_t head_dim = hidden / num_heads;

  Var normed = layer_norm(x, vars.ln1_gain, vars.ln1_bias);
  Var flat = reshape(normed, {batch * time, hidden});
  Var q = add_broadcast(matmul(flat, vars.wq), vars.bq);
  Var k = add_broadcast(matmul(flat, vars.wk), vars.bk);
  Var v = add_broadcast(matmul(flat, vars.wv), vars.bv);

  auto split_heads = [&](const Var& m) {
    return permute(reshape(m, {batch, time, num_heads, head_dim}), {0, 2, 1, 3});
  };
  Var qh = split_heads(q);  // [B, heads, T, head_dim]
  Var kh = split_heads(k);
  Var vh = split_heads(v);

  Var scores = scale(matmul(qh, kh, false, true), 1.0 / std::sqrt(static_cast<double>(head_dim)));
  Var mask = tape.constant(causal_mask(time));
  Var probs = softmax_rows(add_broadcast(scores, mask));
  probs = dropout(probs, dropout_rate, rng, training);

  Var context = matmul(probs, vh);  // [B, heads, T, head_dim]
  Var merged = reshape(permute(context, {0, 2, 1, 3}), {batch * time, hidden});
  Var projected = add_broadcast(matmul(merged, vars.wo), vars.bo);
  return reshape(projected, {batch, time, hidden});
}

Var ffn_sublayer(const BoundParams::FfnVars& vars, const Var& x, ActivationKind kind) {
  const auto& shape = x.value().shape();
  const std::size_t batch = shape[0], time = shape[1], hidden = shape[2];
  Var normed = layer_norm(x, vars.ln2_gain, vars.ln2_bias);
  Var flat = reshape(normed, {batch * time, hidden});
  Var inner = activation(add_broadcast(matmul(flat, vars.w1), vars.b1), kind);
  Var out = add_broadcast(matmul(inner, vars.w2), vars.b2);
  return reshape(out, {batch, time, hidden});
}

Var forward(const BoundParams& bound, const SharingPlan& plan, const ModelConfig& config,
            std::span<const std::int32_t> tokens, std::size_t batch, std::size_t time,
            bool training, Rng& rng) {
  if (time > config.max_seq_len) {
    throw DataError("forward: sequence length " + std::to_string(time) +
                    " exceeds max_seq_len " + std::to_string(config.max_seq_len));
  }
  if (tokens.size() != batch * time) {
    throw ShapeError("forward: got " + std::to_string(tokens.size()) + " tokens for batch " +
                     std::to_string(batch) + " x " + std::to_string(time));
  }
  for (std::int32_t id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw DataError("forward: token id " + std::to_string(id) +
                      " outside vocabulary of size " + std::to_string(config.vocab_size));
    }
  }
  const std::size_t hidden = config.hidden_size;

  Var x = embedding_lookup(bound.word_embed, tokens);  // [B*T, E or H]
  if (config.factorize_embedding) x = matmul(x, bound.embed_proj);
  x = reshape(x, {batch, time, hidden});
  Var positions = narrow_rows(bound.pos_embed, 0, time);  // [T, H]
  x = add_broadcast(x, positions);
  x = dropout(x, config.dropout_rate, rng, training);

  for (std::size_t layer = 0; layer < config.num_layers; ++layer) {
    const auto& attn = bound.attn_groups[plan.layer_to_attn_group[layer]];
    const auto& ffn = bound.ffn_groups[plan.layer_to_ffn_group[layer]];
    Var attn_out = attention_sublayer(attn, x, config.num_heads, config.dropout_rate, rng, training);
    x = add(x, dropout(attn_out, config.dropout_rate, rng, training));
    Var ffn_out = ffn_sublayer(ffn, x, config.activation);
    x = add(x, dropout(ffn_out, config.dropout_rate, rng, training));
  }

  Var final = layer_norm(x, bound.final_ln_gain, bound.final_ln_bias);
  Var flat = reshape(final, {batch * time, hidden});
  Var logits;
  if (!config.tie_output_head) {
    logits = matmul(flat, bound.head);
  } else if (config.factorize_embedding) {
    // Tied head through both factors: h * P^T * We^T.
    logits = matmul(matmul(flat, bound.embed_proj, false, true), bound.word_embed, false, true);
  } else {
    logits = matmul(flat, bound.word_embed, false, true);
  }
  return reshape(logits, {batch, time, config.vocab_size});
}

Tensor forward_logits(const ModelParams& params, const SharingPlan& plan,
                      const ModelConfig& config, std::span<const std::int32_t> tokens,
                      std::size_t batch, std::size_t time) {
  Tape tape;
  BoundParams bound = bind_params(tape, params, /*requires_grad=*/false);
  Rng unused(0);
  Var logits = forward(bound, plan, config, tokens, batch, time, /*training=*/false, unused);
  return logits.value();
}

}  // namespace gpte::model
