#pragma once

#include <functional>
#include <vector>

#include "gpte/tape.hpp"
#include "gpte/tensor.hpp"

namespace gpte {

// A differentiable scalar function of one or more tensor inputs. The
// function must be pure: repeated evaluation at the same point must produce
// the same value.
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares tape gradients against central differences at `points`. Returns
// the maximum over every coordinate of every input of
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// The step h must lie in [1e-6, 1e-4]. Throws UsageError if f does not
// return a scalar.
double grad_check(const ScalarFn& f, const std::vector<Tensor>& points, double h = 1e-5);

// Single-input convenience.
double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& point,
                  double h = 1e-5);

}  // namespace gpte
