#include "sfe/entropy.hpp"

#include <cmath>
#include <limits>

#include "sfe/error.hpp"

namespace sfe {

double entropy_S(const Density& p) {
  const Vec& vol = p.support->cell_volumes();
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.values.size(); ++i) {
    const double v = p.values[i];
    if (v > 0.0) s += v * std::log(v) * vol[i];
  }
  return s;
}

double entropy_S(const std::optional<Density>& p) {
  return p ? entropy_S(*p) : std::numeric_limits<double>::infinity();
}

namespace {

double relative_entropy_flat(const double* m, const double* n, Eigen::Index size) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < size; ++i) {
    if (m[i] <= 0.0) continue;
    if (n[i] <= 0.0) return std::numeric_limits<double>::infinity();
    h += m[i] * std::log(m[i] / n[i]);
  }
  return h;
}

}  // namespace

double relative_entropy(const Vec& m, const Vec& n) {
  if (m.size() != n.size()) throw InvalidArgument("relative_entropy: size mismatch");
  return relative_entropy_flat(m.data(), n.data(), m.size());
}

double relative_entropy(const RowMat& m, const RowMat& n) {
  if (m.rows() != n.rows() || m.cols() != n.cols()) throw InvalidArgument("relative_entropy: shape mismatch");
  return relative_entropy_flat(m.data(), n.data(), m.size());
}

double relative_entropy(const DiscreteMeasure& m, const DiscreteMeasure& n) {
  if (m.support != n.support && m.support->points() != n.support->points())
    throw InvalidArgument("relative_entropy: measures live on different supports");
  return relative_entropy(m.weights, n.weights);
}

}  // namespace sfe
