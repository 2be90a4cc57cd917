#pragma once

#include "sfe/support.hpp"
#include "sfe/types.hpp"

namespace sfe {

// Nonnegative weights over a support. When is_probability is set the
// weights sum to one within 1e-12.
struct DiscreteMeasure {
  SupportPtr support;
  Vec weights;
  bool is_probability = true;

  DiscreteMeasure(SupportPtr support, Vec weights, bool is_probability = true);

  // Divides raw nonnegative weights by their sum.
  static DiscreteMeasure normalized(SupportPtr support, const Vec& raw);

  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
  double mass() const { return weights.sum(); }
  // Sum of weights over points with |x| <= radius.
  double mass_in_ball(double radius) const;
  Eigen::RowVectorXd barycenter() const;
};

// Lebesgue density sampled at support points; weights = values * cell_volumes.
struct Density {
  SupportPtr support;
  Vec values;
  bool is_probability = true;

  Density(SupportPtr support, Vec values, bool is_probability = true);

  static Density from_measure(const DiscreteMeasure& m);
  // Normalizes so that sum(values * cell_volumes) == 1.
  static Density normalized(SupportPtr support, const Vec& raw_values);

  Vec weights() const { return values.cwiseProduct(support->cell_volumes()); }
  DiscreteMeasure to_measure() const { return {support, weights(), is_probability}; }
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

}  // namespace sfe
