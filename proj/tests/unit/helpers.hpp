#pragma once

#include <cmath>
#include <memory>
#include <random>

#include "sfe/kernel.hpp"
#include "sfe/measure.hpp"
#include "sfe/support.hpp"

namespace sfe::testing {

inline SupportPtr points_1d(std::initializer_list<double> xs, double volume = 1.0) {
  RowMat p(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) p(i++, 0) = x;
  return std::make_shared<const Support>(p, Vec::Constant(p.rows(), volume));
}

inline DiscreteMeasure measure(const SupportPtr& s, std::initializer_list<double> w) {
  Vec v(static_cast<Eigen::Index>(w.size()));
  Eigen::Index i = 0;
  for (double x : w) v[i++] = x;
  return DiscreteMeasure(s, v);
}

inline KernelSpec dense(const SupportPtr& a, const SupportPtr& b, const RowMat& values) {
  return KernelSpec(DenseMatrix::from_values(values), a, b);
}

// Discretized N(mean, var) on a 1-D support, renormalized on the grid.
inline Density gaussian_density(const SupportPtr& s, double mean, double var) {
  Vec v(s->size());
  for (std::size_t i = 0; i < s->size(); ++i) {
    const double z = s->points()(i, 0) - mean;
    v[i] = std::exp(-z * z / (2.0 * var));
  }
  return Density::normalized(s, v);
}

inline Vec random_weights(std::mt19937_64& rng, std::size_t n, double floor = 0.0) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  Vec w(n);
  for (auto& x : w) x = u(rng);
  return w / w.sum();
}

}  // namespace sfe::testing
