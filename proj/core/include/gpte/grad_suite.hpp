#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gpte::verify {

struct GradSuiteEntry {
  std::string op;
  std::size_t points = 0;
  double max_rel_err = 0.0;
  bool passed = false;
};

// Central-difference verification of every differentiable building block on
// random inputs: matmul, softmax, layer_norm, relu, gelu, embedding plus
// projection, the full attention sub-layer, and cross_entropy. Each op is
// checked at `points_per_op` random points; an op passes when its worst
// relative error stays below `tolerance`.
std::vector<GradSuiteEntry> run_grad_suite(std::size_t points_per_op, std::uint64_t seed,
                                           double tolerance = 1e-5, double step = 1e-5);

bool all_passed(const std::vector<GradSuiteEntry>& entries);

}  // namespace gpte::verify
