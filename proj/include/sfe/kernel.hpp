#pragma once

#include <optional>
#include <variant>

#include "sfe/support.hpp"
#include "sfe/types.hpp"

namespace sfe {

// Explicit strictly positive kernel values indexed source x target. Both the
// values and their logarithms are kept so log-domain callers never take
// log of an underflowed entry.
struct DenseMatrix {
  RowMat values;
  RowMat log_values;

  static DenseMatrix from_values(RowMat values);
  static DenseMatrix from_log_values(RowMat log_values);
};

// g_eps(t)(x, y) = (2 pi eps t)^{-d/2} exp(-|y - x|^2 / (2 eps t)).
struct GaussianHeat {
  double t = 1.0;
  double eps = 1.0;
};

class KernelSpec {
 public:
  using Variant = std::variant<DenseMatrix, GaussianHeat>;

  KernelSpec(Variant variant, SupportPtr source, SupportPtr target);

  const Variant& variant() const { return variant_; }
  const SupportPtr& source() const { return source_; }
  const SupportPtr& target() const { return target_; }
  const GaussianHeat* gaussian() const { return std::get_if<GaussianHeat>(&variant_); }
  const DenseMatrix* dense() const { return std::get_if<DenseMatrix>(&variant_); }

  // Same kernel with source and target exchanged (q^T).
  KernelSpec transposed() const;

 private:
  Variant variant_;
  SupportPtr source_;
  SupportPtr target_;
};

struct KernelMatrix {
  RowMat values;
  // Set when some entry underflowed and was clamped; callers must then work
  // from log_kernel_matrix instead of these values.
  bool log_domain = false;
};

KernelMatrix eval_kernel(const KernelSpec& k);

// Exact log q over source x target.
RowMat log_kernel_matrix(const KernelSpec& k);

double gaussian_heat_log(const GaussianHeat& g, PointRef x, PointRef y);

}  // namespace sfe
