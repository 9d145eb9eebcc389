#include "gpte/gemm.hpp"

#include <Eigen/Core>

namespace gpte::detail {

namespace {
using ConstMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  ConstMap lhs(a, trans_a ? ki : mi, trans_a ? mi : ki);
  ConstMap rhs(b, trans_b ? ni : ki, trans_b ? ki : ni);
  MutMap out(c, mi, ni);
  if (!trans_a && !trans_b) {
    if (accumulate) out.noalias() += lhs * rhs;
    else out.noalias() = lhs * rhs;
  } else if (trans_a && !trans_b) {
    if (accumulate) out.noalias() += lhs.transpose() * rhs;
    else out.noalias() = lhs.transpose() * rhs;
  } else if (!trans_a && trans_b) {
    if (accumulate) out.noalias() += lhs * rhs.transpose();
    else out.noalias() = lhs * rhs.transpose();
  } else {
    if (accumulate) out.noalias() += lhs.transpose() * rhs.transpose();
    else out.noalias() = lhs.transpose() * rhs.transpose();
  }
}

}  // namespace gpte::detail
