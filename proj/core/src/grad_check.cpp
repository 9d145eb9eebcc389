#include "gpte/grad_check.hpp"

#include <cmath>

#include "gpte/error.hpp"

namespace gpte {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& points) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(points.size());
  for (const Tensor& p : points) vars.push_back(tape.constant(p));
  Var out = f(tape, vars);
  if (out.value().size() != 1) {
    throw UsageError("grad_check: f must return a scalar, got shape " +
                     shape_str(out.value().shape()));
  }
  return out.value().item();
}

}  // namespace

double grad_check(const ScalarFn& f, const std::vector<Tensor>& points, double h) {
  if (h < 1e-6 || h > 1e-4) {
    throw UsageError("grad_check: step h must lie in [1e-6, 1e-4], got " + std::to_string(h));
  }

  // Analytic gradients from one taped evaluation.
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(points.size());
  for (const Tensor& p : points) vars.push_back(tape.leaf(p));
  Var out = f(tape, vars);
  if (out.value().size() != 1) {
    throw UsageError("grad_check: f must return a scalar, got shape " +
                     shape_str(out.value().shape()));
  }
  tape.backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(points.size());
  for (const Var& v : vars) analytic.push_back(tape.take_grad(v));

  double worst = 0.0;
  std::vector<Tensor> probe = points;
  for (std::size_t input = 0; input < points.size(); ++input) {
    for (std::size_t i = 0, n = points[input].size(); i < n; ++i) {
      const double original = probe[input][i];
      probe[input][i] = original + h;
      const double plus = evaluate(f, probe);
      probe[input][i] = original - h;
      const double minus = evaluate(f, probe);
      probe[input][i] = original;
      const double numeric = (plus - minus) / (2.0 * h);
      const double exact = analytic[input][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
  }
  return worst;
}

double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& point, double h) {
  return grad_check(
      [&f](Tape& tape, const std::vector<Var>& vars) { return f(tape, vars[0]); },
      std::vector<Tensor>{point}, h);
}

}  // namespace gpte
