#include "sfe/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sfe/error.hpp"

namespace sfe {

namespace {

constexpr double kMassEps = 1e-15;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Active {
  std::vector<Eigen::Index> index;
  std::vector<double> mass;
};

Active active_points(const DiscreteMeasure& mu) {
  Active out;
  const double total = mu.weights.sum();
  if (!(total > 0.0)) throw InvalidArgument("w2_distance: measure has zero mass");
  for (Eigen::Index i = 0; i < mu.weights.size(); ++i) {
    if (mu.weights[i] > 0.0) {
      out.index.push_back(i);
      out.mass.push_back(mu.weights[i] / total);
    }
  }
  return out;
}

}  // namespace

// Successive shortest paths on the complete bipartite graph. Node potentials
// keep reduced costs nonnegative so every augmentation uses a dense O(V^2)
// Dijkstra; residual backward arcs exist wherever flow is positive.
double w2_distance(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, W2Options options) {
  if (mu1.support->dim() != mu2.support->dim()) throw InvalidArgument("w2_distance: dimension mismatch");
  Active a = active_points(mu1);
  Active b = active_points(mu2);
  const std::size_t n1 = a.index.size();
  const std::size_t n2 = b.index.size();
  if (n1 + n2 > options.max_points)
    throw OracleTooLarge("w2_distance: oracle too large (" + std::to_string(n1 + n2) + " points, cap " +
                         std::to_string(options.max_points) + "); subsample first");

  RowMat cost(n1, n2);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      cost(i, j) = (mu1.support->point(a.index[i]) - mu2.support->point(b.index[j])).squaredNorm();
    }
  }

  RowMat flow = RowMat::Zero(n1, n2);
  std::vector<double> supply = a.mass;
  std::vector<double> demand = b.mass;
  // Nodes 0..n1-1 are sources, n1..n1+n2-1 are sinks.
  const std::size_t nv = n1 + n2;
  std::vector<double> potential(nv, 0.0), dist(nv);
  std::vector<long> parent(nv);
  std::vector<char> done(nv);

  for (std::size_t guard = 0; guard < 4 * nv * nv + 16; ++guard) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    bool any_supply = false;
    for (std::size_t i = 0; i < n1; ++i) {
      if (supply[i] > kMassEps) {
        dist[i] = 0.0;
        any_supply = true;
      }
    }
    if (!any_supply) break;

    long target = -1;
    for (;;) {
      long u = -1;
      for (std::size_t v = 0; v < nv; ++v) {
        if (!done[v] && dist[v] < kInf && (u < 0 || dist[v] < dist[u])) u = static_cast<long>(v);
      }
      if (u < 0) break;
      done[u] = 1;
      const auto uu = static_cast<std::size_t>(u);
      if (uu >= n1) {
        if (demand[uu - n1] > kMassEps) {
          target = u;
          break;
        }
        const std::size_t j = uu - n1;
        for (std::size_t i = 0; i < n1; ++i) {
          if (done[i] || flow(i, j) <= 0.0) continue;
          const double d = dist[uu] - cost(i, j) + potential[uu] - potential[i];
          if (d < dist[i]) {
            dist[i] = d;
            parent[i] = u;
          }
        }
      } else {
        for (std::size_t j = 0; j < n2; ++j) {
          const std::size_t v = n1 + j;
          if (done[v]) continue;
          const double d = dist[uu] + cost(uu, j) + potential[uu] - potential[v];
          if (d < dist[v]) {
            dist[v] = d;
            parent[v] = u;
          }
        }
      }
    }
    if (target < 0) break;

    const double reach = dist[target];
    for (std::size_t v = 0; v < nv; ++v) potential[v] += std::min(dist[v], reach);

    double push = demand[target - n1];
    long v = target;
    while (parent[v] >= 0) {
      const long u = parent[v];
      if (static_cast<std::size_t>(u) >= n1) push = std::min(push, flow(v, u - n1));
      v = u;
    }
    push = std::min(push, supply[v]);

    demand[target - n1] -= push;
    supply[v] -= push;
    v = target;
    while (parent[v] >= 0) {
      const long u = parent[v];
      if (static_cast<std::size_t>(u) < n1) {
        flow(u, v - n1) += push;
      } else {
        flow(v, u - n1) -= push;
      }
      v = u;
    }
  }

  const double total = (flow.array() * cost.array()).sum();
  return std::sqrt(std::max(0.0, total));
}

Quantile1D Quantile1D::atoms(std::span<const double> points, std::span<const double> weights) {
  if (points.size() != weights.size()) throw InvalidArgument("quantile: points and weights differ in length");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return points[l] < points[r]; });
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidArgument("quantile: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("quantile: zero mass");
  Quantile1D q;
  double cum = 0.0;
  for (std::size_t k : order) {
    if (weights[k] <= 0.0) continue;
    cum += weights[k];
    q.segments_.push_back({cum / total, points[k], points[k]});
  }
  q.segments_.back().u_end = 1.0;
  return q;
}

Quantile1D Quantile1D::atoms(const DiscreteMeasure& mu) {
  if (mu.support->dim() != 1) throw InvalidArgument("quantile: support is not one-dimensional");
  const auto& pts = mu.support->points();
  return atoms(std::span<const double>(pts.data(), pts.size()),
               std::span<const double>(mu.weights.data(), static_cast<std::size_t>(mu.weights.size())));
}

Quantile1D Quantile1D::cells(const Density& p) {
  const Support& s = *p.support;
  if (s.dim() != 1) throw InvalidArgument("quantile: support is not one-dimensional");
  const Vec w = p.weights();
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return s.points()(l, 0) < s.points()(r, 0); });
  const double total = w.sum();
  if (!(total > 0.0)) throw InvalidArgument("quantile: zero mass");
  Quantile1D q;
  double cum = 0.0;
  for (std::size_t k : order) {
    if (w[k] <= 0.0) continue;
    cum += w[k];
    const double x = s.points()(k, 0);
    const double half = 0.5 * s.cell_volumes()[k];
    q.segments_.push_back({cum / total, x - half, x + half});
  }
  q.segments_.back().u_end = 1.0;
  return q;
}

// Both quantile functions are linear between merged breakpoints, so the
// squared difference integrates exactly on every piece.
double w2_1d(const Quantile1D& a, const Quantile1D& b) {
  const auto& sa = a.segments();
  const auto& sb = b.segments();
  auto value = [](const std::vector<Quantile1D::Segment>& s, std::size_t k, double u) {
    const double u0 = k == 0 ? 0.0 : s[k - 1].u_end;
    const double width = s[k].u_end - u0;
    if (!(width > 0.0)) return s[k].q_start;
    const double t = std::clamp((u - u0) / width, 0.0, 1.0);
    return s[k].q_start + t * (s[k].q_end - s[k].q_start);
  };
  double total = 0.0;
  double u = 0.0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    const double u_next = std::min(sa[i].u_end, sb[j].u_end);
    if (u_next > u) {
      const double d0 = value(sa, i, u) - value(sb, j, u);
      const double d1 = value(sa, i, u_next) - value(sb, j, u_next);
      total += (u_next - u) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
      u = u_next;
    }
    if (sa[i].u_end <= u) ++i;
    if (j < sb.size() && sb[j].u_end <= u) ++j;
  }
  return std::sqrt(total);
}

BlDictionary::BlDictionary(int dim, double domain_scale) : dim_(dim), scale_(domain_scale), levels_(0) {
  if (dim < 1) throw InvalidArgument("bl dictionary: dimension must be positive");
  if (!(domain_scale > 0.0)) throw InvalidArgument("bl dictionary: domain scale must be positive");
  for (int k = 0; k < dim; ++k) directions_.push_back(Vec::Unit(dim, k));
  for (int k = 0; k < dim; ++k) {
    for (int l = k + 1; l < dim; ++l) {
      directions_.push_back((Vec::Unit(dim, k) + Vec::Unit(dim, l)) / std::sqrt(2.0));
      directions_.push_back((Vec::Unit(dim, k) - Vec::Unit(dim, l)) / std::sqrt(2.0));
    }
  }
  std::size_t count = 0;
  for (int k = 0;; ++k) {
    const double per_axis = std::pow(2.0, k + 1) + 1.0;
    const double n = std::pow(per_axis, dim);
    if (static_cast<double>(count) + n > static_cast<double>(kMaxBumps)) break;
    count += static_cast<std::size_t>(n);
    levels_ = k + 1;
  }
}

double BlDictionary::domain_scale_for(std::initializer_list<const RowMat*> point_sets) {
  double extent = 0.0;
  for (const RowMat* pts : point_sets) {
    if (pts->size() > 0) extent = std::max(extent, pts->cwiseAbs().maxCoeff());
  }
  double r = 1.0;
  while (r < extent) r *= 2.0;
  return r;
}

std::size_t BlDictionary::size() const {
  std::size_t n = directions_.size() * kAffineOffsets;
  for (int k = 0; k < levels_; ++k) {
    n += static_cast<std::size_t>(std::pow(std::pow(2.0, k + 1) + 1.0, dim_));
  }
  return n;
}

namespace {

// Accumulates |sum_i w_i prod_a exp(-(x_ia - c_a)^2 / 2s^2)| over all centre
// tuples by contracting one axis at a time.
void contract_bumps(const RowMat& points, const Eigen::MatrixXd& w, int axis, double s, double lo, int per_axis,
                    double amplitude, Eigen::ArrayXd& best) {
  const int dim = static_cast<int>(points.cols());
  const double inv = 1.0 / (2.0 * s * s);
  for (int c = 0; c < per_axis; ++c) {
    const double centre = lo + c * s;
    const Eigen::ArrayXd factor = (-(points.col(axis).array() - centre).square() * inv).exp();
    Eigen::MatrixXd scaled = w.array().colwise() * factor;
    if (axis + 1 == dim) {
      best = best.max(amplitude * scaled.colwise().sum().transpose().array().abs());
    } else {
      contract_bumps(points, scaled, axis + 1, s, lo, per_axis, amplitude, best);
    }
  }
}

}  // namespace

Vec BlDictionary::sup(const RowMat& points, const Eigen::MatrixXd& signed_weights) const {
  if (points.cols() != dim_) throw InvalidArgument("bl dictionary: point dimension mismatch");
  if (points.rows() != signed_weights.rows()) throw InvalidArgument("bl dictionary: weight rows mismatch");
  Eigen::ArrayXd best = Eigen::ArrayXd::Zero(signed_weights.cols());

  for (const Vec& dir : directions_) {
    const Eigen::ArrayXd proj = (points * dir).array();
    const double reach = scale_ * dir.cwiseAbs().sum();
    for (int k = 0; k < kAffineOffsets; ++k) {
      const double offset = -reach + 2.0 * reach * k / (kAffineOffsets - 1);
      const Eigen::ArrayXd f = (proj - offset).max(-1.0).min(1.0);
      best = best.max((signed_weights.transpose() * f.matrix()).array().abs());
    }
  }

  for (int k = 0; k < levels_; ++k) {
    const double s = scale_ * std::pow(2.0, -k);
    const int per_axis = (1 << (k + 1)) + 1;
    const double amplitude = std::min(1.0, s * std::sqrt(std::exp(1.0)));
    contract_bumps(points, signed_weights, 0, s, -scale_, per_axis, amplitude, best);
  }
  return best.matrix();
}

double bl_discrepancy(const RowMat& points1, const Vec& w1, const RowMat& points2, const Vec& w2) {
  if (points1.cols() != points2.cols()) throw InvalidArgument("bl_distance: dimension mismatch");
  RowMat pts(points1.rows() + points2.rows(), points1.cols());
  pts << points1, points2;
  Eigen::MatrixXd w(pts.rows(), 1);
  w << w1, -w2;
  const BlDictionary dict(static_cast<int>(pts.cols()), BlDictionary::domain_scale_for({&points1, &points2}));
  return dict.sup(pts, w)[0];
}

double bl_distance(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2) {
  if (mu1.support == mu2.support) {
    const RowMat& pts = mu1.support->points();
    const BlDictionary dict(mu1.support->dim(), BlDictionary::domain_scale_for({&pts}));
    Eigen::MatrixXd w = mu1.weights - mu2.weights;
    return dict.sup(pts, w)[0];
  }
  return bl_discrepancy(mu1.support->points(), mu1.weights, mu2.support->points(), mu2.weights);
}

}  // namespace sfe
