#pragma once

#include <cstddef>

namespace gpte::detail {

// C[m x n] = op(A) * op(B), or += when `accumulate`. Buffers are row-major;
// A is stored [m x k] (or [k x m] when trans_a), B is [k x n] (or [n x k]
// when trans_b). Single-threaded and bit-deterministic for fixed inputs.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

}  // namespace gpte::detail
