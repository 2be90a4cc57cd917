#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "sfe/types.hpp"

namespace sfe {

// Regular lattice metadata carried by grids built with make_grid. Axis k of
// point i sits at origin + index(i, k) * spacing.
struct Lattice {
  double origin = 0.0;
  double spacing = 0.0;
  int points_per_axis = 0;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> index;
  // Dense table over the full cube, -1 where the lattice point was dropped.
  std::vector<int> lookup;

  // Point id at a multi-index, or -1 when off the lattice / outside the ball.
  int find(const int* multi_index, int dim) const;
};

// A finite set of distinct points in R^d with a quadrature weight per point.
class Support {
 public:
  Support(RowMat points, Vec cell_volumes, std::optional<double> bounding_radius = std::nullopt);
  Support(RowMat points, Vec cell_volumes, double bounding_radius, Lattice lattice);

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const RowMat& points() const { return points_; }
  auto point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)); }
  const Vec& cell_volumes() const { return cell_volumes_; }
  double bounding_radius() const { return bounding_radius_; }
  double total_volume() const { return cell_volumes_.sum(); }
  const Lattice* lattice() const { return lattice_ ? &*lattice_ : nullptr; }

  // Euclidean norms of all points.
  Vec norms() const { return points_.rowwise().norm(); }

 private:
  void validate(bool check_distinct) const;

  RowMat points_;
  Vec cell_volumes_;
  double bounding_radius_ = 0.0;
  std::optional<Lattice> lattice_;
};

using SupportPtr = std::shared_ptr<const Support>;

struct GridOptions {
  std::size_t max_points = 1'000'000;
};

// Cell-centred lattice over [-radius, radius]^dim with spacing
// 2 radius / points_per_axis, restricted to the closed ball of that radius.
SupportPtr make_grid(int dim, double radius, int points_per_axis, GridOptions options = {});

// Same points as `base` translated by `shift`; lattice metadata is dropped.
SupportPtr translate(const Support& base, PointRef shift);

}  // namespace sfe
