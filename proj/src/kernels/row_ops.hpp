#pragma once

// Per-row bodies used by both the serial and the OpenMP kernels.

#include <cmath>
#include <limits>

#include "sfe/types.hpp"

namespace sfe::kernels::detail {

inline void gaussian_log_row(const RowMat& x, const RowMat& y, Eigen::Index i, double inv_two_var,
                             double prefactor, RowMat& out) {
  const auto xi = x.row(i);
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    out(i, j) = prefactor - (y.row(j) - xi).squaredNorm() * inv_two_var;
  }
}

inline double row_logsumexp(const RowMat& logk, const Vec& shift, Eigen::Index i) {
  const Eigen::ArrayXd terms = logk.row(i).transpose().array() + shift.array();
  const double top = terms.maxCoeff();
  if (top == -std::numeric_limits<double>::infinity()) return top;
  const Eigen::ArrayXd shifted = terms - top;
  return top + std::log((shifted == -std::numeric_limits<double>::infinity()).select(0.0, shifted.exp()).sum());
}

inline double matvec_row(const RowMat& k, const Vec& v, Eigen::Index i) { return k.row(i).dot(v.transpose()); }

inline void scaled_exp_row(const RowMat& logk, const Vec& a, const Vec& b, Eigen::Index i, RowMat& out) {
  // The vectorized exp does not map -inf to an exact zero.
  const Eigen::ArrayXd arg = logk.row(i).transpose().array() + (a[i] + b.array());
  out.row(i) = (arg == -std::numeric_limits<double>::infinity()).select(0.0, arg.exp()).transpose();
}

}  // namespace sfe::kernels::detail
