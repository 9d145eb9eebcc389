#include "gpte/grad_suite.hpp"

#include <cmath>

#include "gpte/grad_check.hpp"
#include "gpte/model.hpp"
#include "gpte/rng.hpp"

namespace gpte::verify {

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0, n = t.size(); i < n; ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

// relu is not differentiable at 0; keep samples clear of the kink so the
// central difference measures the true one-sided slope.
Tensor random_tensor_away_from_zero(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng);
  for (std::size_t i = 0, n = t.size(); i < n; ++i) {
    if (std::abs(t[i]) < 1e-3) t[i] += t[i] >= 0.0 ? 1e-3 : -1e-3;
  }
  return t;
}

std::vector<std::int32_t> random_ids(std::size_t count, std::size_t vocab, Rng& rng) {
  std::vector<std::int32_t> ids(count);
  for (auto& id : ids) id = static_cast<std::int32_t>(rng.next_below(vocab));
  return ids;
}

// sum(f(x) * weights) turns any tensor-valued op into a scalar whose
// gradient exercises every output coordinate independently.
Var weighted_sum(Tape& tape, const Var& x, const Tensor& weights) {
  return sum(mul(x, tape.constant(weights)));
}

using PointFn = std::function<double(Rng&, double)>;  // returns max rel err at one point

GradSuiteEntry run_entry(const std::string& name, std::size_t points, Rng& rng, double tolerance,
                         double step, const PointFn& one_point) {
  GradSuiteEntry entry;
  entry.op = name;
  entry.points = points;
  for (std::size_t p = 0; p < points; ++p) {
    entry.max_rel_err = std::max(entry.max_rel_err, one_point(rng, step));
  }
  entry.passed = entry.max_rel_err < tolerance;
  return entry;
}

double check_matmul(Rng& rng, double step) {
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 2}, rng);
  const Tensor w = random_tensor({3, 2}, rng);
  return grad_check(
      [&w](Tape& tape, const std::vector<Var>& in) {
        return weighted_sum(tape, matmul(in[0], in[1]), w);
      },
      {a, b}, step);
}

double check_softmax(Rng& rng, double step) {
  const Tensor x = random_tensor({4, 6}, rng);
  const Tensor w = random_tensor({4, 6}, rng);
  return grad_check(
      [&w](Tape& tape, const std::vector<Var>& in) {
        return weighted_sum(tape, softmax_rows(in[0]), w);
      },
      {x}, step);
}

double check_layer_norm(Rng& rng, double step) {
  const Tensor x = random_tensor({3, 5}, rng);
  Tensor gain = random_tensor({5}, rng, 0.2);
  for (std::size_t i = 0; i < gain.size(); ++i) gain[i] += 1.0;
  const Tensor bias = random_tensor({5}, rng, 0.2);
  const Tensor w = random_tensor({3, 5}, rng);
  return grad_check(
      [&w](Tape& tape, const std::vector<Var>& in) {
        return weighted_sum(tape, layer_norm(in[0], in[1], in[2]), w);
      },
      {x, gain, bias}, step);
}

double check_activation(ActivationKind kind, Rng& rng, double step) {
  const Tensor x = kind == ActivationKind::kRelu ? random_tensor_away_from_zero({2, 20}, rng)
                                                 : random_tensor({2, 20}, rng);
  const Tensor w = random_tensor({2, 20}, rng);
  return grad_check(
      [&w, kind](Tape& tape, const std::vector<Var>& in) {
        return weighted_sum(tape, activation(in[0], kind), w);
      },
      {x}, step);
}

double check_embedding(Rng& rng, double step) {
  const Tensor table = random_tensor({7, 4}, rng);
  const Tensor proj = random_tensor({4, 5}, rng);
  const auto ids = random_ids(6, 7, rng);
  const Tensor w = random_tensor({6, 5}, rng);
  return grad_check(
      [&w, ids](Tape& tape, const std::vector<Var>& in) {
        return weighted_sum(tape, matmul(embedding_lookup(in[0], ids), in[1]), w);
      },
      {table, proj}, step);
}

double check_attention(Rng& rng, double step) {
  const std::size_t batch = 1, time = 4, hidden = 8, heads = 2;
  std::vector<Tensor> inputs;
  inputs.push_back(random_tensor({batch, time, hidden}, rng));  // x
  for (int i = 0; i < 4; ++i) {
    inputs.push_back(random_tensor({hidden, hidden}, rng, 0.5));  // wq wk wv wo
    inputs.push_back(random_tensor({hidden}, rng, 0.2));          // bq bk bv bo
  }
  Tensor gain = random_tensor({hidden}, rng, 0.2);
  for (std::size_t i = 0; i < gain.size(); ++i) gain[i] += 1.0;
  inputs.push_back(gain);
  inputs.push_back(random_tensor({hidden}, rng, 0.2));  // ln1 bias
  const Tensor w = random_tensor({batch, time, hidden}, rng);

  return grad_check(
      [&w, heads](Tape& tape, const std::vector<Var>& in) {
        model::BoundParams::AttnVars vars;
        vars.wq = in[1];
        vars.bq = in[2];
        vars.wk = in[3];
        vars.bk = in[4];
        vars.wv = in[5];
        vars.bv = in[6];
        vars.wo = in[7];
        vars.bo = in[8];
        vars.ln1_gain = in[9];
        vars.ln1_bias = in[10];
        Rng no_dropout(0);
        Var out = model::attention_sublayer(vars, in[0], heads, 0.0, no_dropout, false);
        return weighted_sum(tape, out, w);
      },
      inputs, step);
}

double check_cross_entropy(Rng& rng, double step) {
  const Tensor logits = random_tensor({5, 7}, rng);
  const auto targets = random_ids(5, 7, rng);
  return grad_check(
      [targets](Tape&, const std::vector<Var>& in) { return cross_entropy(in[0], targets); },
      {logits}, step);
}

}  // namespace

std::vector<GradSuiteEntry> run_grad_suite(std::size_t points_per_op, std::uint64_t seed,
                                           double tolerance, double step) {
  Rng rng(seed);
  std::vector<GradSuiteEntry> entries;
  entries.push_back(run_entry("matmul", points_per_op, rng, tolerance, step, check_matmul));
  entries.push_back(run_entry("softmax_rows", points_per_op, rng, tolerance, step, check_softmax));
  entries.push_back(run_entry("layer_norm", points_per_op, rng, tolerance, step, check_layer_norm));
  entries.push_back(run_entry("relu", points_per_op, rng, tolerance, step,
                              [](Rng& r, double h) { return check_activation(ActivationKind::kRelu, r, h); }));
  entries.push_back(run_entry("gelu", points_per_op, rng, tolerance, step,
                              [](Rng& r, double h) { return check_activation(ActivationKind::kGelu, r, h); }));
  entries.push_back(run_entry("embedding_projection", points_per_op, rng, tolerance, step,
                              check_embedding));
  entries.push_back(run_entry("attention_block", points_per_op, rng, tolerance, step,
                              check_attention));
  entries.push_back(run_entry("cross_entropy", points_per_op, rng, tolerance, step,
                              check_cross_entropy));
  return entries;
}

bool all_passed(const std::vector<GradSuiteEntry>& entries) {
  for (const auto& e : entries) {
    if (!e.passed) return false;
  }
  return true;
}

}  // namespace gpte::verify
