#pragma once

// Dense inner loops shared by the solvers and diagnostics. Every routine has
// a serial reference in `serial` and an OpenMP version in `parallel`. The
// parallel versions split work over output rows only, and each output entry
// is reduced in the same order as the serial code, so both produce
// bit-identical results for any thread count.

#include "sfe/types.hpp"

namespace sfe::kernels {

namespace serial {

// out(i, j) = prefactor - |x_i - y_j|^2 / (2 variance)
void gaussian_log_kernel(const RowMat& x, const RowMat& y, double variance, double prefactor, RowMat& out);

// out_i = log sum_j exp(logk(i, j) + shift_j); -inf when every term is -inf.
void row_logsumexp(const RowMat& logk, const Vec& shift, Vec& out);

// out_i = sum_j k(i, j) v_j
void matvec(const RowMat& k, const Vec& v, Vec& out);

// out(i, j) = exp(logk(i, j) + a_i + b_j)
void scaled_exp(const RowMat& logk, const Vec& a, const Vec& b, RowMat& out);

}  // namespace serial

namespace parallel {

void gaussian_log_kernel(const RowMat& x, const RowMat& y, double variance, double prefactor, RowMat& out);
void row_logsumexp(const RowMat& logk, const Vec& shift, Vec& out);
void matvec(const RowMat& k, const Vec& v, Vec& out);
void scaled_exp(const RowMat& logk, const Vec& a, const Vec& b, RowMat& out);

}  // namespace parallel

// Numerically safe log(sum(exp(values))).
double logsumexp(const Eigen::Ref<const Vec>& values);

}  // namespace sfe::kernels
