#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpte/model.hpp"

namespace gpte::eval {

struct EvalReport {
  double nll = 0.0;         // nats per token
  double perplexity = 1.0;  // exp(nll)
  std::optional<double> last_token_accuracy;
  std::uint64_t tokens_evaluated = 0;
  double tokens_per_second = 0.0;
};

// Mean next-token NLL over non-overlapping windows of length seq_len,
// exponentiated. Inference mode: dropout off, parameters untouched.
EvalReport perplexity(const model::ModelParams& params, const model::SharingPlan& plan,
                      const model::ModelConfig& config, std::span<const std::int32_t> tokens,
                      std::size_t seq_len);

struct Context {
  std::vector<std::int32_t> prefix;
  std::int32_t answer = 0;
};

// Fraction of contexts whose final-position greedy argmax (ties resolve to
// the lowest id) equals the answer token.
double last_token_accuracy(const model::ModelParams& params, const model::SharingPlan& plan,
                           const model::ModelConfig& config,
                           const std::vector<Context>& contexts);

// Deterministic held-out contexts: up to `count` prefixes of length
// prefix_len at evenly spaced stream offsets, each answered by the next
// token.
std::vector<Context> contexts_from_stream(std::span<const std::int32_t> tokens,
                                          std::size_t count, std::size_t prefix_len);

// temperature == 0 (or top_k == 1) decodes greedily; otherwise samples from
// the top_k renormalized softmax of logits/temperature. Context beyond
// max_seq_len slides, keeping the most recent tokens. Returns prompt +
// max_new ids.
std::vector<std::int32_t> generate(const model::ModelParams& params,
                                   const model::SharingPlan& plan,
                                   const model::ModelConfig& config,
                                   std::span<const std::int32_t> prompt, std::size_t max_new,
                                   double temperature, std::size_t top_k, std::uint64_t seed);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace gpte::eval
