#include "sfe/kernel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sfe/error.hpp"
#include "sfe/kernels.hpp"

namespace sfe {

namespace {

// exp(x) leaves the normal range below this argument.
constexpr double kExpFloor = -745.0;

double heat_prefactor(const GaussianHeat& g, int dim) {
  return -0.5 * dim * std::log(2.0 * std::numbers::pi * g.eps * g.t);
}

}  // namespace

DenseMatrix DenseMatrix::from_values(RowMat values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!(values.data()[i] > 0.0) || !std::isfinite(values.data()[i]))
      throw InvalidArgument("kernel: dense kernel entries must be finite and strictly positive");
  }
  RowMat logs = values.array().log();
  return {std::move(values), std::move(logs)};
}

DenseMatrix DenseMatrix::from_log_values(RowMat log_values) {
  if (!log_values.allFinite()) throw InvalidArgument("kernel: dense log-kernel entries must be finite");
  RowMat values = log_values.array().exp();
  return {std::move(values), std::move(log_values)};
}

KernelSpec::KernelSpec(Variant variant, SupportPtr source, SupportPtr target)
    : variant_(std::move(variant)), source_(std::move(source)), target_(std::move(target)) {
  if (!source_ || !target_) throw InvalidArgument("kernel: null support");
  if (const auto* d = dense()) {
    if (d->log_values.rows() != static_cast<Eigen::Index>(source_->size()) ||
        d->log_values.cols() != static_cast<Eigen::Index>(target_->size()))
      throw InvalidArgument("kernel: dense matrix is " + std::to_string(d->log_values.rows()) + "x" +
                            std::to_string(d->log_values.cols()) + ", supports are " +
                            std::to_string(source_->size()) + "x" + std::to_string(target_->size()));
  } else {
    const auto& g = std::get<GaussianHeat>(variant_);
    if (!(g.t > 0.0) || !(g.eps > 0.0)) throw InvalidArgument("kernel: heat kernel needs t > 0 and eps > 0");
    if (source_->dim() != target_->dim()) throw InvalidArgument("kernel: heat kernel supports differ in dimension");
  }
}

KernelSpec KernelSpec::transposed() const {
  if (const auto* d = dense()) {
    return {DenseMatrix{d->values.transpose(), d->log_values.transpose()}, target_, source_};
  }
  return {variant_, target_, source_};
}

double gaussian_heat_log(const GaussianHeat& g, PointRef x, PointRef y) {
  return heat_prefactor(g, static_cast<int>(x.size())) - (y - x).squaredNorm() / (2.0 * g.eps * g.t);
}

RowMat log_kernel_matrix(const KernelSpec& k) {
  if (const auto* d = k.dense()) return d->log_values;
  const auto& g = *k.gaussian();
  RowMat out;
  kernels::parallel::gaussian_log_kernel(k.source()->points(), k.target()->points(), g.eps * g.t,
                                         heat_prefactor(g, k.source()->dim()), out);
  return out;
}

KernelMatrix eval_kernel(const KernelSpec& k) {
  if (const auto* d = k.dense()) {
    KernelMatrix out{d->values, false};
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
      if (!(out.values.data()[i] >= std::numeric_limits<double>::min())) {
        out.values.data()[i] = std::numeric_limits<double>::min();
        out.log_domain = true;
      }
    }
    return out;
  }
  const auto& g = *k.gaussian();
  const double prefactor = std::exp(heat_prefactor(g, k.source()->dim()));
  RowMat exponents;
  kernels::parallel::gaussian_log_kernel(k.source()->points(), k.target()->points(), g.eps * g.t, 0.0, exponents);
  KernelMatrix out{RowMat(exponents.rows(), exponents.cols()), false};
  for (Eigen::Index i = 0; i < exponents.size(); ++i) {
    const double e = exponents.data()[i];
    double v = e < kExpFloor ? 0.0 : prefactor * std::exp(e);
    if (!(v >= std::numeric_limits<double>::min())) {
      v = std::numeric_limits<double>::min();
      out.log_domain = true;
    }
    out.values.data()[i] = v;
  }
  return out;
}

}  // namespace sfe
