#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gpte/rng.hpp"
#include "gpte/tape.hpp"
#include "gpte/tensor.hpp"

namespace gpte::model {

// Which decoder-layer parameters are reused across depth.
//   kNone     every layer owns its parameters
//   kAll      one parameter set serves every layer
//   kAttnOnly attention sub-layers share one set, feed-forward stays per-layer
//   kFfnOnly  feed-forward sub-layers share one set, attention stays per-layer
//   kGrouped  layers are split into `group_count` contiguous groups, one
//             parameter set per group, for both sub-layer types
enum class SharingMode { kNone, kAll, kAttnOnly, kFfnOnly, kGrouped };

std::string to_string(SharingMode mode);
SharingMode sharing_mode_from_string(const std::string& name);

std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(const std::string& name);

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t embedding_size = 128;  // inner dim of the factorized embedding
  std::size_t hidden_size = 128;     // d_model
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t d_ff = 512;
  std::size_t max_seq_len = 128;
  SharingMode sharing_mode = SharingMode::kNone;
  std::size_t group_count = 1;  // meaningful only for kGrouped
  bool factorize_embedding = false;
  bool tie_output_head = true;
  ActivationKind activation = ActivationKind::kGelu;
  double dropout_rate = 0.0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Per-sub-layer-type mapping from layer index to parameter-group id. Group
// ids are contiguous 0..unique-1 and every group is nonempty.
struct SharingPlan {
  std::vector<std::size_t> layer_to_attn_group;
  std::vector<std::size_t> layer_to_ffn_group;
  std::size_t unique_attn_groups = 0;
  std::size_t unique_ffn_groups = 0;
};

// Grouped mode assigns layer i to group floor(i * G / L), giving contiguous
// near-equal groups that reduce to "all shared" at G=1 and "unshared" at G=L.
SharingPlan build_sharing_plan(std::size_t num_layers, SharingMode mode, std::size_t group_count);

// One attention parameter set. The pre-attention norm travels with its
// sub-layer so that sharing a group shares the whole sub-layer.
struct AttnGroupParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // [H x H] weights, [H] biases
  Tensor ln1_gain, ln1_bias;              // [H]
};

struct FfnGroupParams {
  Tensor w1, b1;              // [H x d_ff], [d_ff]
  Tensor w2, b2;              // [d_ff x H], [H]
  Tensor ln2_gain, ln2_bias;  // [H]
};

// Stored (unique) tensors. A layer slot holds a group id, never a copy, so
// mutating a group's tensor changes every layer assigned to that group.
struct ModelParams {
  Tensor word_embed;  // [V x E] factorized, [V x H] otherwise
  Tensor embed_proj;  // [E x H]; empty when unfactorized
  Tensor pos_embed;   // [T_max x H]
  std::vector<AttnGroupParams> attn_groups;
  std::vector<FfnGroupParams> ffn_groups;
  Tensor final_ln_gain, final_ln_bias;  // [H]
  Tensor head;                          // [H x V]; empty when tied

  // Visits every stored tensor as (name, tensor) in a fixed order; the order
  // defines checkpoint layout, optimizer-state layout and gradient packing.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    visit(*this, fn);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    visit(*this, fn);
  }

  std::size_t unique_tensor_count() const;

 private:
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn& fn) {
    fn("embed.word", self.word_embed);
    if (!self.embed_proj.empty()) fn("embed.proj", self.embed_proj);
    fn("embed.pos", self.pos_embed);
    for (std::size_t g = 0; g < self.attn_groups.size(); ++g) {
      auto& a = self.attn_groups[g];
      const std::string p = "attn.g" + std::to_string(g) + ".";
      fn(p + "wq", a.wq);
      fn(p + "bq", a.bq);
      fn(p + "wk", a.wk);
      fn(p + "bk", a.bk);
      fn(p + "wv", a.wv);
      fn(p + "bv", a.bv);
      fn(p + "wo", a.wo);
      fn(p + "bo", a.bo);
      fn(p + "ln1_gain", a.ln1_gain);
      fn(p + "ln1_bias", a.ln1_bias);
    }
    for (std::size_t g = 0; g < self.ffn_groups.size(); ++g) {
      auto& f = self.ffn_groups[g];
      const std::string p = "ffn.g" + std::to_string(g) + ".";
      fn(p + "w1", f.w1);
      fn(p + "b1", f.b1);
      fn(p + "w2", f.w2);
      fn(p + "b2", f.b2);
      fn(p + "ln2_gain", f.ln2_gain);
      fn(p + "ln2_bias", f.ln2_bias);
    }
    fn("final_ln.gain", self.final_ln_gain);
    fn("final_ln.bias", self.final_ln_bias);
    if (!self.head.empty()) fn("head.w", self.head);
  }
};

// Exact integer parameter accounting. The unique/logical totals include the
// final norm's 2H elements, which have no component field of their own.
struct ParamReport {
  std::uint64_t embedding_params = 0;
  std::uint64_t positional_params = 0;
  std::uint64_t block_params_unique = 0;
  std::uint64_t block_params_logical = 0;
  std::uint64_t head_params = 0;
  std::uint64_t total_unique = 0;
  std::uint64_t total_logical = 0;
  double reduction_ratio = 1.0;  // total_logical / total_unique
};

ParamReport param_count(const ModelConfig& config);

// Oracle counterpart of param_count: sums element counts over the stored
// tensors of a constructed model.
std::uint64_t count_enumerated(const ModelParams& params);

// Weights ~ Normal(0, 0.02) drawn from a fixed generator in enumeration
// order; biases and norm offsets zero, norm gains one. Identical
// (config, seed) pairs produce bit-identical parameters.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

// All-zero parameter skeleton with the config's shapes, for loaders that
// overwrite every tensor.
ModelParams zero_params(const ModelConfig& config);

// Tape handles for every unique tensor, plus the (name, Var) list in
// enumeration order used to pull gradients after backward.
struct BoundParams {
  struct AttnVars {
    Var wq, bq, wk, bk, wv, bv, wo, bo, ln1_gain, ln1_bias;
  };
  struct FfnVars {
    Var w1, b1, w2, b2, ln2_gain, ln2_bias;
  };
  Var word_embed, embed_proj, pos_embed;
  std::vector<AttnVars> attn_groups;
  std::vector<FfnVars> ffn_groups;
  Var final_ln_gain, final_ln_bias, head;
  std::vector<std::pair<std::string, Var>> named;
};

// requires_grad=false binds constants, which keeps inference tapes free of
// backward bookkeeping.
BoundParams bind_params(Tape& tape, const ModelParams& params, bool requires_grad = true);

// Full decoder forward pass: factorized embedding + positions, pre-norm
// residual blocks with causal multi-head attention and position-wise FFN,
// final norm, and (tied or separate) vocabulary projection. Returns logits
// of shape [batch, time, vocab].
Var forward(const BoundParams& bound, const SharingPlan& plan, const ModelConfig& config,
            std::span<const std::int32_t> tokens, std::size_t batch, std::size_t time,
            bool training, Rng& rng);

// Inference convenience: binds constants on a temporary tape.
Tensor forward_logits(const ModelParams& params, const SharingPlan& plan,
                      const ModelConfig& config, std::span<const std::int32_t> tokens,
                      std::size_t batch, std::size_t time);

// One pre-norm attention residual branch (norm -> attention -> projection),
// exposed so the gradient-check suite exercises the exact production path.
// x is [batch, time, hidden]; the result has the same shape.
Var attention_sublayer(const BoundParams::AttnVars& vars, const Var& x, std::size_t num_heads,
                       double dropout_rate, Rng& rng, bool training);

Var ffn_sublayer(const BoundParams::FfnVars& vars, const Var& x, ActivationKind kind);

// Additive causal mask: 0 on and below the diagonal, a large negative
// constant strictly above it.
Tensor causal_mask(std::size_t time);

}  // namespace gpte::model
