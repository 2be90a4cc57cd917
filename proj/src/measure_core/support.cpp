#include "sfe/support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sfe/error.hpp"

namespace sfe {

namespace {

constexpr double kRadiusSlack = 1e-12;

}  // namespace

int Lattice::find(const int* multi_index, int dim) const {
  long flat = 0;
  for (int k = 0; k < dim; ++k) {
    if (multi_index[k] < 0 || multi_index[k] >= points_per_axis) return -1;
    flat = flat * points_per_axis + multi_index[k];
  }
  return lookup[static_cast<std::size_t>(flat)];
}

Support::Support(RowMat points, Vec cell_volumes, std::optional<double> bounding_radius)
    : points_(std::move(points)), cell_volumes_(std::move(cell_volumes)) {
  if (points_.rows() == 0 || points_.cols() == 0) throw InvalidArgument("support: empty point set");
  bounding_radius_ = bounding_radius ? *bounding_radius : points_.rowwise().norm().maxCoeff();
  validate(true);
}

Support::Support(RowMat points, Vec cell_volumes, double bounding_radius, Lattice lattice)
    : points_(std::move(points)),
      cell_volumes_(std::move(cell_volumes)),
      bounding_radius_(bounding_radius),
      lattice_(std::move(lattice)) {
  if (points_.rows() == 0 || points_.cols() == 0) throw InvalidArgument("support: empty point set");
  validate(false);
}

void Support::validate(bool check_distinct) const {
  if (cell_volumes_.size() != points_.rows())
    throw InvalidArgument("support: cell_volumes size does not match point count");
  if (!(bounding_radius_ >= 0.0)) throw InvalidArgument("support: negative bounding radius");
  for (Eigen::Index i = 0; i < points_.rows(); ++i) {
    if (!(cell_volumes_[i] > 0.0) || !std::isfinite(cell_volumes_[i]))
      throw InvalidArgument("support: cell volume of point " + std::to_string(i) + " is not positive");
    if (!points_.row(i).allFinite())
      throw InvalidArgument("support: point " + std::to_string(i) + " is not finite");
    if (points_.row(i).norm() > bounding_radius_ * (1.0 + kRadiusSlack) + kRadiusSlack)
      throw InvalidArgument("support: point " + std::to_string(i) + " lies outside the bounding radius");
  }
  if (!check_distinct) return;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points_.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < points_.cols(); ++k) {
      if (points_(a, k) != points_(b, k)) return points_(a, k) < points_(b, k);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (points_.row(order[i]) == points_.row(order[i - 1]))
      throw InvalidArgument("support: duplicate point at index " + std::to_string(order[i]));
  }
}

SupportPtr make_grid(int dim, double radius, int points_per_axis, GridOptions options) {
  if (dim < 1) throw InvalidArgument("make_grid: dim must be positive");
  if (!(radius > 0.0)) throw InvalidArgument("make_grid: radius must be positive");
  if (points_per_axis < 2) throw InvalidArgument("make_grid: points_per_axis must be at least 2");
  if (dim * std::log(static_cast<double>(points_per_axis)) >
      std::log(static_cast<double>(options.max_points)) + 1e-12)
    throw InvalidArgument("make_grid: " + std::to_string(points_per_axis) + "^" + std::to_string(dim) +
                          " lattice points exceed the point budget of " + std::to_string(options.max_points));

  const double h = 2.0 * radius / points_per_axis;
  Lattice lattice;
  lattice.origin = -radius + 0.5 * h;
  lattice.spacing = h;
  lattice.points_per_axis = points_per_axis;

  std::size_t cube = 1;
  for (int k = 0; k < dim; ++k) cube *= static_cast<std::size_t>(points_per_axis);
  lattice.lookup.assign(cube, -1);

  std::vector<double> coords;
  std::vector<int> indices;
  std::vector<int> multi(static_cast<std::size_t>(dim), 0);
  int kept = 0;
  for (std::size_t flat = 0; flat < cube; ++flat) {
    std::size_t rest = flat;
    for (int k = dim - 1; k >= 0; --k) {
      multi[static_cast<std::size_t>(k)] = static_cast<int>(rest % static_cast<std::size_t>(points_per_axis));
      rest /= static_cast<std::size_t>(points_per_axis);
    }
    double norm2 = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double x = lattice.origin + multi[static_cast<std::size_t>(k)] * h;
      norm2 += x * x;
    }
    if (std::sqrt(norm2) > radius * (1.0 + kRadiusSlack)) continue;
    for (int k = 0; k < dim; ++k) {
      coords.push_back(lattice.origin + multi[static_cast<std::size_t>(k)] * h);
      indices.push_back(multi[static_cast<std::size_t>(k)]);
    }
    lattice.lookup[flat] = kept++;
  }

  RowMat points = Eigen::Map<RowMat>(coords.data(), kept, dim);
  lattice.index = Eigen::Map<Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      indices.data(), kept, dim);
  Vec volumes = Vec::Constant(kept, std::pow(h, dim));
  return std::make_shared<const Support>(std::move(points), std::move(volumes), radius, std::move(lattice));
}

SupportPtr translate(const Support& base, PointRef shift) {
  if (shift.size() != base.dim()) throw InvalidArgument("translate: shift dimension mismatch");
  RowMat points = base.points().rowwise() + shift;
  return std::make_shared<const Support>(std::move(points), base.cell_volumes());
}

}  // namespace sfe
