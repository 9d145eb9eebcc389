#include "gpte/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gpte/data.hpp"
#include "gpte/error.hpp"
#include "gpte/rng.hpp"

namespace gpte::eval {

namespace {

constexpr std::size_t kEvalBatch = 8;

// Sum of -log softmax(logits)[target] over all rows, computed directly from
// the logits tensor.
double nll_sum(const Tensor& logits, std::span<const std::int32_t> targets) {
  const std::size_t vocab = logits.shape().back();
  const std::size_t rows = logits.size() / vocab;
  const double* p = logits.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = p + r * vocab;
    double peak = row[0];
    for (std::size_t i = 1; i < vocab; ++i) peak = std::max(peak, row[i]);
    double sum_exp = 0.0;
    for (std::size_t i = 0; i < vocab; ++i) sum_exp += std::exp(row[i] - peak);
    total += peak + std::log(sum_exp) - row[targets[r]];
  }
  return total;
}

std::size_t argmax_lowest(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EvalReport perplexity(const model::ModelParams& params, const model::SharingPlan& plan,
                      const model::ModelConfig& config, std::span<const std::int32_t> tokens,
                      std::size_t seq_len) {
  const std::size_t windows = data::window_count(tokens.size(), seq_len);
  if (windows == 0) {
    throw DataError("perplexity: stream of " + std::to_string(tokens.size()) +
                    " tokens is shorter than seq_len+1 = " + std::to_string(seq_len + 1));
  }
  const auto started = std::chrono::steady_clock::now();

  double total_nll = 0.0;
  std::uint64_t total_tokens = 0;
  std::vector<std::int32_t> inputs, targets;
  for (std::size_t begin = 0; begin < windows; begin += kEvalBatch) {
    const std::size_t rows = std::min(kEvalBatch, windows - begin);
    inputs.clear();
    targets.clear();
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t start = (begin + r) * seq_len;
      for (std::size_t t = 0; t < seq_len; ++t) {
        inputs.push_back(tokens[start + t]);
        targets.push_back(tokens[start + t + 1]);
      }
    }
    const Tensor logits = model::forward_logits(params, plan, config, inputs, rows, seq_len);
    total_nll += nll_sum(logits, targets);
    total_tokens += rows * seq_len;
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  EvalReport report;
  report.nll = total_nll / static_cast<double>(total_tokens);
  report.perplexity = std::exp(report.nll);
  report.tokens_evaluated = total_tokens;
  report.tokens_per_second = elapsed > 0.0 ? static_cast<double>(total_tokens) / elapsed : 0.0;
  return report;
}

double last_token_accuracy(const model::ModelParams& params, const model::SharingPlan& plan,
                           const model::ModelConfig& config,
                           const std::vector<Context>& contexts) {
  if (contexts.empty()) {
    throw UsageError("last_token_accuracy: context set is empty");
  }
  std::size_t hits = 0;
  for (const Context& context : contexts) {
    if (context.prefix.empty()) {
      throw UsageError("last_token_accuracy: empty prefix");
    }
    if (context.prefix.size() > config.max_seq_len) {
      throw DataError("last_token_accuracy: prefix of " +
                      std::to_string(context.prefix.size()) + " tokens exceeds max_seq_len " +
                      std::to_string(config.max_seq_len));
    }
    const std::size_t time = context.prefix.size();
    const Tensor logits = model::forward_logits(params, plan, config, context.prefix, 1, time);
    const double* final_row = logits.data() + (time - 1) * config.vocab_size;
    if (argmax_lowest(final_row, config.vocab_size) ==
        static_cast<std::size_t>(context.answer)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(contexts.size());
}

std::vector<Context> contexts_from_stream(std::span<const std::int32_t> tokens,
                                          std::size_t count, std::size_t prefix_len) {
  if (count == 0 || prefix_len == 0) {
    throw UsageError("contexts_from_stream: count and prefix_len must be positive");
  }
  if (tokens.size() < prefix_len + 1) {
    throw DataError("contexts_from_stream: stream of " + std::to_string(tokens.size()) +
                    " tokens is shorter than prefix_len+1");
  }
  const std::size_t usable = tokens.size() - prefix_len;  // valid start offsets
  const std::size_t taken = std::min(count, usable);
  const std::size_t stride = usable / taken;
  std::vector<Context> contexts;
  contexts.reserve(taken);
  for (std::size_t i = 0; i < taken; ++i) {
    const std::size_t start = i * stride;
    Context context;
    context.prefix.assign(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                          tokens.begin() + static_cast<std::ptrdiff_t>(start + prefix_len));
    context.answer = tokens[start + prefix_len];
    contexts.push_back(std::move(context));
  }
  return contexts;
}

std::vector<std::int32_t> generate(const model::ModelParams& params,
                                   const model::SharingPlan& plan,
                                   const model::ModelConfig& config,
                                   std::span<const std::int32_t> prompt, std::size_t max_new,
                                   double temperature, std::size_t top_k, std::uint64_t seed) {
  if (prompt.empty()) throw UsageError("generate: prompt must be nonempty");
  if (temperature < 0.0) throw UsageError("generate: temperature must be >= 0");
  if (top_k == 0) throw UsageError("generate: top_k must be >= 1");

  std::vector<std::int32_t> out(prompt.begin(), prompt.end());
  const std::size_t vocab = config.vocab_size;
  const std::size_t k = std::min(top_k, vocab);
  Rng rng(seed);

  for (std::size_t n = 0; n < max_new; ++n) {
    const std::size_t time = std::min(out.size(), config.max_seq_len);
    std::span<const std::int32_t> context(out.data() + (out.size() - time), time);
    const Tensor logits = model::forward_logits(params, plan, config, context, 1, time);
    const double* row = logits.data() + (time - 1) * vocab;

    std::int32_t next;
    if (temperature == 0.0 || k == 1) {
      next = static_cast<std::int32_t>(argmax_lowest(row, vocab));
    } else {
      // Top-k ids by logit, ties to lower id, then sample the renormalized
      // softmax of logits/temperature.
      std::vector<std::size_t> ids(vocab);
      std::iota(ids.begin(), ids.end(), 0u);
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                        [row](std::size_t a, std::size_t b) {
                          if (row[a] != row[b]) return row[a] > row[b];
                          return a < b;
                        });
      std::vector<double> weights(k);
      const double peak = row[ids[0]] / temperature;
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        weights[i] = std::exp(row[ids[i]] / temperature - peak);
        total += weights[i];
      }
      const double draw = rng.next_double() * total;
      double cumulative = 0.0;
      std::size_t pick = k - 1;
      for (std::size_t i = 0; i < k; ++i) {
        cumulative += weights[i];
        if (draw < cumulative) {
          pick = i;
          break;
        }
      }
      next = static_cast<std::int32_t>(ids[pick]);
    }
    out.push_back(next);
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  std::ostringstream os;
  os << "{\"nll\":" << format_double(report.nll)
     << ",\"perplexity\":" << format_double(report.perplexity) << ",\"last_token_accuracy\":";
  if (report.last_token_accuracy) {
    os << format_double(*report.last_token_accuracy);
  } else {
    os << "null";
  }
  os << ",\"tokens_evaluated\":" << report.tokens_evaluated
     << ",\"tokens_per_second\":" << format_double(report.tokens_per_second) << "}";
  return os.str();
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  char line[96];
  std::snprintf(line, sizeof line, "  %-20s %.6f\n", "nll (nats/token)", report.nll);
  os << line;
  std::snprintf(line, sizeof line, "  %-20s %.6f\n", "perplexity", report.perplexity);
  os << line;
  if (report.last_token_accuracy) {
    std::snprintf(line, sizeof line, "  %-20s %.4f\n", "last-token accuracy",
                  *report.last_token_accuracy);
    os << line;
  }
  std::snprintf(line, sizeof line, "  %-20s %llu\n", "tokens evaluated",
                static_cast<unsigned long long>(report.tokens_evaluated));
  os << line;
  std::snprintf(line, sizeof line, "  %-20s %.0f\n", "tokens/second", report.tokens_per_second);
  os << line;
  return os.str();
}

}  // namespace gpte::eval
