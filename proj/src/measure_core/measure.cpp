#include "sfe/measure.hpp"

#include <cmath>
#include <string>

#include "sfe/error.hpp"

namespace sfe {

namespace {

constexpr double kProbabilityTol = 1e-12;
constexpr double kDensityTol = 1e-10;

void check_weights(const Vec& w, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(w.size()) != n)
    throw InvalidArgument(std::string(what) + ": size does not match support");
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i]))
      throw InvalidArgument(std::string(what) + ": entry " + std::to_string(i) + " is negative or not finite");
  }
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(SupportPtr s, Vec w, bool prob)
    : support(std::move(s)), weights(std::move(w)), is_probability(prob) {
  if (!support) throw InvalidArgument("measure: null support");
  check_weights(weights, support->size(), "measure weights");
  if (is_probability && std::abs(weights.sum() - 1.0) > kProbabilityTol)
    throw InvalidArgument("measure: probability weights sum to " + std::to_string(weights.sum()));
}

DiscreteMeasure DiscreteMeasure::normalized(SupportPtr s, const Vec& raw) {
  const double total = raw.sum();
  if (!(total > 0.0)) throw InvalidArgument("measure: cannot normalize zero mass");
  return {std::move(s), raw / total, true};
}

double DiscreteMeasure::mass_in_ball(double radius) const {
  const Vec norms = support->norms();
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (norms[i] <= radius) total += weights[i];
  }
  return total;
}

Eigen::RowVectorXd DiscreteMeasure::barycenter() const {
  return (weights.transpose() * support->points()) / weights.sum();
}

Density::Density(SupportPtr s, Vec v, bool prob) : support(std::move(s)), values(std::move(v)), is_probability(prob) {
  if (!support) throw InvalidArgument("density: null support");
  check_weights(values, support->size(), "density values");
  if (is_probability) {
    const double mass = values.dot(support->cell_volumes());
    if (std::abs(mass - 1.0) > kDensityTol)
      throw InvalidArgument("density: integrates to " + std::to_string(mass) + ", expected 1");
  }
}

Density Density::from_measure(const DiscreteMeasure& m) {
  return {m.support, m.weights.cwiseQuotient(m.support->cell_volumes()), m.is_probability};
}

Density Density::normalized(SupportPtr s, const Vec& raw) {
  const double mass = raw.dot(s->cell_volumes());
  if (!(mass > 0.0)) throw InvalidArgument("density: cannot normalize zero mass");
  return {std::move(s), raw / mass, true};
}

}  // namespace sfe
