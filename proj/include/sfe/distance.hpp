#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sfe/measure.hpp"
#include "sfe/types.hpp"

namespace sfe {

struct W2Options {
  // Cap on the number of positive-weight points across both measures.
  std::size_t max_points = 400;
};

// Exact W2 by min-cost flow on the quadratic cost. Intended as a
// verification oracle; throws OracleTooLarge above the cap.
double w2_distance(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, W2Options options = {});

// Piecewise-linear quantile function of a law on the real line.
class Quantile1D {
 public:
  struct Segment {
    double u_end;
    double q_start;
    double q_end;
  };

  // Atoms at `points` carrying `weights` (need not be normalized or sorted).
  static Quantile1D atoms(std::span<const double> points, std::span<const double> weights);
  static Quantile1D atoms(const DiscreteMeasure& mu);
  // Uniform mass inside each cell [x - vol/2, x + vol/2] of a 1-D density.
  static Quantile1D cells(const Density& p);

  const std::vector<Segment>& segments() const { return segments_; }

 private:
  std::vector<Segment> segments_;
};

// Exact W2 between two 1-D laws from their quantile functions.
double w2_1d(const Quantile1D& a, const Quantile1D& b);

// Fixed test-function dictionary for the bounded-Lipschitz distance. Every
// function has sup norm and Lipschitz constant at most one. The dictionary
// depends only on the dimension and the dyadic domain scale.
class BlDictionary {
 public:
  static constexpr std::string_view kVersion = "bl-dict-v1";
  static constexpr int kAffineOffsets = 33;
  static constexpr std::size_t kMaxBumps = 1024;

  BlDictionary(int dim, double domain_scale);

  // Smallest power of two >= max(1, max |x|_inf) over the given point sets.
  static double domain_scale_for(std::initializer_list<const RowMat*> point_sets);

  int dim() const { return dim_; }
  double domain_scale() const { return scale_; }
  int bump_levels() const { return levels_; }
  std::size_t size() const;

  // max_f |sum_i f(x_i) w_i| for every column of `signed_weights`.
  Vec sup(const RowMat& points, const Eigen::MatrixXd& signed_weights) const;

 private:
  int dim_;
  double scale_;
  int levels_;
  std::vector<Vec> directions_;
};

// Bounded-Lipschitz distance approximated over BlDictionary.
double bl_distance(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2);

// Dictionary sup of a finite signed measure given as two weighted point sets
// (first minus second). Works for non-probability measures.
double bl_discrepancy(const RowMat& points1, const Vec& w1, const RowMat& points2, const Vec& w2);

}  // namespace sfe
