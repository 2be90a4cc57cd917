#include <cmath>
#include <limits>

#include "row_ops.hpp"
#include "sfe/kernels.hpp"

namespace sfe::kernels {

namespace serial {

void gaussian_log_kernel(const RowMat& x, const RowMat& y, double variance, double prefactor, RowMat& out) {
  out.resize(x.rows(), y.rows());
  const double inv = 0.5 / variance;
  for (Eigen::Index i = 0; i < x.rows(); ++i) detail::gaussian_log_row(x, y, i, inv, prefactor, out);
}

void row_logsumexp(const RowMat& logk, const Vec& shift, Vec& out) {
  out.resize(logk.rows());
  for (Eigen::Index i = 0; i < logk.rows(); ++i) out[i] = detail::row_logsumexp(logk, shift, i);
}

void matvec(const RowMat& k, const Vec& v, Vec& out) {
  out.resize(k.rows());
  for (Eigen::Index i = 0; i < k.rows(); ++i) out[i] = detail::matvec_row(k, v, i);
}

void scaled_exp(const RowMat& logk, const Vec& a, const Vec& b, RowMat& out) {
  out.resize(logk.rows(), logk.cols());
  for (Eigen::Index i = 0; i < logk.rows(); ++i) detail::scaled_exp_row(logk, a, b, i, out);
}

}  // namespace serial

double logsumexp(const Eigen::Ref<const Vec>& values) {
  if (values.size() == 0) return -std::numeric_limits<double>::infinity();
  const double top = values.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((values.array() - top).exp().sum());
}

}  // namespace sfe::kernels
