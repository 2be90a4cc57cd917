#include "row_ops.hpp"
#include "sfe/kernels.hpp"

namespace sfe::kernels::parallel {

void gaussian_log_kernel(const RowMat& x, const RowMat& y, double variance, double prefactor, RowMat& out) {
  out.resize(x.rows(), y.rows());
  const double inv = 0.5 / variance;
  const Eigen::Index n = x.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) detail::gaussian_log_row(x, y, i, inv, prefactor, out);
}

void row_logsumexp(const RowMat& logk, const Vec& shift, Vec& out) {
  out.resize(logk.rows());
  const Eigen::Index n = logk.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) out[i] = detail::row_logsumexp(logk, shift, i);
}

void matvec(const RowMat& k, const Vec& v, Vec& out) {
  out.resize(k.rows());
  const Eigen::Index n = k.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) out[i] = detail::matvec_row(k, v, i);
}

void scaled_exp(const RowMat& logk, const Vec& a, const Vec& b, RowMat& out) {
  out.resize(logk.rows(), logk.cols());
  const Eigen::Index n = logk.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) detail::scaled_exp_row(logk, a, b, i, out);
}

}  // namespace sfe::kernels::parallel
