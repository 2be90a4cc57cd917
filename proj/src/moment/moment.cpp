#include "sfe/moment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "sfe/distance.hpp"
#include "sfe/entropy.hpp"
#include "sfe/error.hpp"
#include "sfe/functionals.hpp"
#include "sfe/random.hpp"

namespace sfe {

namespace {

constexpr double kRadiusSlack = 1e-12;
// Barycenters smaller than this are treated as already centred, so a
// symmetric input keeps its exact grid instead of a shift by rounding noise.
constexpr double kCentredTol = 1e-13;
// Jensen slack below -kJensenTol * (1 + scale) is reported as a violation.
constexpr double kJensenTol = 1e-9;

double sup_gap(const Vec& a, const Vec& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Normalized density proportional to exp(log_values) on the grid.
Density density_from_logs(const SupportPtr& grid, const Vec& log_values, double* log_C = nullptr) {
  const double top = log_values.maxCoeff();
  if (!std::isfinite(top)) throw InvalidArgument("fixed point: log density has no finite entry");
  const Vec shifted = (log_values.array() - top).exp().matrix();
  const double mass = shifted.dot(grid->cell_volumes());
  if (log_C) *log_C = top + std::log(mass);
  return {grid, shifted / mass, true};
}

Vec half_sq_norms(const Support& s) { return 0.5 * s.points().rowwise().squaredNorm(); }

void check_grid(const Density& p, double r) {
  if (!(r > 0.0)) throw InvalidArgument("fixed point: r must be positive");
  if (p.support->norms().maxCoeff() > r * (1.0 + kRadiusSlack))
    throw InvalidArgument("fixed point: density is not supported in B_r");
}

// int ubar2 dP1 - ubar2(y0) for the solve's target.
double jensen_slack(const SchroedingerSolution& sol, double eps) {
  const Support& t = *sol.mu2.support;
  const Vec& w = sol.mu2.weights;
  const Vec ubar = eps * sol.u2 + half_sq_norms(t);
  double mean = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] > 0.0) mean += w[j] * ubar[j];
  }
  const RowMat y0 = sol.mu2.barycenter();
  const double at_y0 = eps * potential_u2_at(sol, y0)[0] + 0.5 * y0.squaredNorm();
  const double slack = mean - at_y0;
  if (slack < -kJensenTol * (1.0 + std::abs(mean)))
    throw BoundViolation("fixed point: Jensen inequality fails with slack " + std::to_string(slack));
  return slack;
}

double psi_from_step(const Density& p, const FixedPointStep& step, const Density& P1, double eps) {
  const ControlValueReport rep = control_report(step.solution, P1);
  const Vec w = p.weights();
  return entropy_S(p) - eps * rep.v_eps + w.dot(half_sq_norms(*p.support));
}

SupportPtr default_grid(const SupportPtr& grid, const Density& P1, double r) {
  SupportPtr g = grid ? grid : restrict_to_ball(P1.support, r);
  if (g->norms().maxCoeff() > r * (1.0 + kRadiusSlack)) throw InvalidArgument("fixed point: grid leaves B_r");
  return g;
}

Density uniform_on(const SupportPtr& grid) { return Density::normalized(grid, Vec::Ones(grid->size())); }

const Lattice& require_lattice(const Support& grid, const char* what) {
  if (!grid.lattice()) throw InvalidArgument(std::string(what) + ": grid must be a regular lattice");
  return *grid.lattice();
}

// Merges atoms at identical points so the result is a valid support.
DiscreteMeasure merged_measure(const RowMat& points, const Vec& weights) {
  std::map<std::vector<double>, double> acc;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (!(weights[i] > 0.0)) continue;
    std::vector<double> key(points.row(i).data(), points.row(i).data() + points.cols());
    acc[key] += weights[i];
  }
  RowMat pts(static_cast<Eigen::Index>(acc.size()), points.cols());
  Vec w(static_cast<Eigen::Index>(acc.size()));
  Eigen::Index row = 0;
  for (const auto& [key, mass] : acc) {
    for (Eigen::Index k = 0; k < points.cols(); ++k) pts(row, k) = key[static_cast<std::size_t>(k)];
    w[row++] = mass;
  }
  auto support = std::make_shared<const Support>(std::move(pts), Vec::Ones(w.size()));
  return DiscreteMeasure::normalized(support, w);
}

// Equal-weight resample of n atoms, merged.
DiscreteMeasure resample(const RowMat& points, const Vec& weights, std::size_t n, Rng& rng) {
  std::discrete_distribution<Eigen::Index> pick(weights.data(), weights.data() + weights.size());
  RowMat pts(static_cast<Eigen::Index>(n), points.cols());
  for (std::size_t i = 0; i < n; ++i) pts.row(static_cast<Eigen::Index>(i)) = points.row(pick(rng));
  return merged_measure(pts, Vec::Ones(static_cast<Eigen::Index>(n)));
}

double w2_between(const RowMat& pa, const Vec& wa, const RowMat& pb, const Vec& wb, const PushforwardOptions& opt,
                  std::uint64_t stream) {
  if (pa.cols() == 1) {
    const Quantile1D qa = Quantile1D::atoms(std::span<const double>(pa.data(), static_cast<std::size_t>(pa.rows())),
                                            std::span<const double>(wa.data(), static_cast<std::size_t>(wa.size())));
    const Quantile1D qb = Quantile1D::atoms(std::span<const double>(pb.data(), static_cast<std::size_t>(pb.rows())),
                                            std::span<const double>(wb.data(), static_cast<std::size_t>(wb.size())));
    return w2_1d(qa, qb);
  }
  Rng rng(stream_seed(opt.seed, stream));
  return w2_distance(resample(pa, wa, opt.w2_subsample, rng), resample(pb, wb, opt.w2_subsample, rng));
}

}  // namespace

SupportPtr restrict_to_ball(const SupportPtr& support, double r) {
  if (!(r > 0.0)) throw InvalidArgument("restrict_to_ball: r must be positive");
  const Vec norms = support->norms();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (norms[i] <= r * (1.0 + kRadiusSlack)) keep.push_back(i);
  }
  if (keep.size() == support->size()) return support;
  if (keep.empty()) throw InvalidArgument("restrict_to_ball: no support point inside B_r");

  const int d = support->dim();
  RowMat pts(static_cast<Eigen::Index>(keep.size()), d);
  Vec vol(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t n = 0; n < keep.size(); ++n) {
    pts.row(static_cast<Eigen::Index>(n)) = support->point(static_cast<std::size_t>(keep[n]));
    vol[static_cast<Eigen::Index>(n)] = support->cell_volumes()[keep[n]];
  }
  const double radius = std::min(r, support->bounding_radius());
  const Lattice* old = support->lattice();
  if (!old) return std::make_shared<const Support>(std::move(pts), std::move(vol), radius);

  Lattice lat;
  lat.origin = old->origin;
  lat.spacing = old->spacing;
  lat.points_per_axis = old->points_per_axis;
  lat.lookup.assign(old->lookup.size(), -1);
  lat.index.resize(static_cast<Eigen::Index>(keep.size()), d);
  for (std::size_t n = 0; n < keep.size(); ++n) {
    lat.index.row(static_cast<Eigen::Index>(n)) = old->index.row(keep[n]);
    long flat = 0;
    for (int k = 0; k < d; ++k) flat = flat * lat.points_per_axis + lat.index(static_cast<Eigen::Index>(n), k);
    lat.lookup[static_cast<std::size_t>(flat)] = static_cast<int>(n);
  }
  return std::make_shared<const Support>(std::move(pts), std::move(vol), radius, std::move(lat));
}

FixedPointStep fixed_point_step_detailed(const Density& p, const Density& P1, double eps, double r,
                                         SolveOptions options) {
  if (!(eps > 0.0)) throw InvalidArgument("fixed point: eps must be positive");
  check_grid(p, r);
  if (p.support->dim() != P1.support->dim()) throw InvalidArgument("fixed point: dimension mismatch");
  KernelSpec q(GaussianHeat{1.0, eps}, p.support, P1.support);
  SchroedingerSolution sol = solve(q, p.to_measure(), P1.to_measure(), std::move(options));
  if (!sol.converged)
    throw NotConverged("fixed point: inner solve stopped at defect " + std::to_string(sol.final_residual));
  const Vec logs = -eps * sol.u1 - half_sq_norms(*p.support);
  double log_C = 0.0;
  Density next = density_from_logs(p.support, logs, &log_C);
  return {std::move(next), std::move(sol), log_C};
}

Density fixed_point_step(const Density& p, const Density& P1, double eps, double r, SolveOptions options) {
  return fixed_point_step_detailed(p, P1, eps, r, std::move(options)).next;
}

double fixed_point_consistency_value(const FixedPointStep& step, const Density& P1, double eps) {
  const Vec& w = step.solution.mu2.weights;
  double u2_mean = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] > 0.0) u2_mean += w[j] * step.solution.u2[j];
  }
  return -step.log_C - eps * entropy_S(P1) + eps * u2_mean;
}

FixedPointTrace solve_fixed_point(const Density& P1, double eps, double r, FixedPointOptions options) {
  if (!(options.damping > 0.0 && options.damping <= 1.0))
    throw InvalidArgument("fixed point: damping must lie in (0, 1]");
  if (!(options.tol > 0.0)) throw InvalidArgument("fixed point: tol must be positive");
  if (options.max_outer < 1) throw InvalidArgument("fixed point: max_outer must be at least 1");
  const SupportPtr grid = default_grid(options.grid, P1, r);
  Density p = options.init ? *options.init : uniform_on(grid);
  if (p.support != grid) throw InvalidArgument("fixed point: initial density must live on the grid");
  if (options.damping < 1.0 && !(p.values.minCoeff() > 0.0))
    throw InvalidArgument("fixed point: damped iteration needs a positive initial density");

  FixedPointTrace trace;
  trace.eps = eps;
  trace.damping = options.damping;
  trace.tol = options.tol;
  trace.iterates.push_back(p);
  SolveOptions inner = options.solve;

  // The loop takes one extra step after convergence so that the returned
  // density comes with its own solve and objective.
  for (int k = 0;; ++k) {
    FixedPointStep step = fixed_point_step_detailed(p, P1, eps, r, inner);
    inner.warm_start_b = step.solution.log_nu2;
    trace.objective_values.push_back(psi_from_step(p, step, P1, eps));
    trace.jensen_slack.push_back(jensen_slack(step.solution, eps));
    trace.fixed_point_residual = sup_gap(step.next.values, p.values);
    if (trace.converged || k == options.max_outer) {
      trace.consistency_value = fixed_point_consistency_value(step, P1, eps);
      trace.final_step = std::move(step);
      break;
    }
    const Vec logs = (1.0 - options.damping) * p.values.array().log().matrix() +
                     options.damping * step.next.values.array().log().matrix();
    Density next = options.damping == 1.0 ? step.next : density_from_logs(grid, logs);
    trace.gaps.push_back(sup_gap(next.values, p.values));
    trace.residual = trace.gaps.back();
    p = std::move(next);
    trace.iterates.push_back(p);
    trace.converged = trace.residual <= options.tol;
  }
  return trace;
}

RowMat lattice_gradient(const Vec& u, const Support& grid) {
  const Lattice& lat = require_lattice(grid, "gradient");
  const int d = grid.dim();
  if (static_cast<std::size_t>(u.size()) != grid.size()) throw InvalidArgument("gradient: size does not match grid");
  RowMat g(u.size(), d);
  std::vector<int> multi(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) multi[static_cast<std::size_t>(l)] = lat.index(i, l);
      multi[static_cast<std::size_t>(k)] += 1;
      const int up = lat.find(multi.data(), d);
      multi[static_cast<std::size_t>(k)] -= 2;
      const int down = lat.find(multi.data(), d);
      double slope = 0.0;
      if (up >= 0 && down >= 0) {
        slope = (u[up] - u[down]) / (2.0 * lat.spacing);
      } else if (up >= 0) {
        slope = (u[up] - u[i]) / lat.spacing;
      } else if (down >= 0) {
        slope = (u[i] - u[down]) / lat.spacing;
      } else {
        throw InvalidArgument("gradient: point " + std::to_string(i) + " has no lattice neighbour on axis " +
                              std::to_string(k));
      }
      if (!std::isfinite(slope))
        throw InvalidArgument("gradient: non-finite difference at point " + std::to_string(i));
      g(i, k) = slope;
    }
  }
  return g;
}

PushforwardReport verify_moment_measure(const Vec& u_bar, const SupportPtr& grid, const Density& P1,
                                        PushforwardOptions options) {
  if (!u_bar.allFinite()) throw InvalidArgument("pushforward: u_bar must be finite on the grid");
  if (grid->dim() != P1.support->dim()) throw InvalidArgument("pushforward: dimension mismatch");
  PushforwardReport rep;
  rep.gradient = lattice_gradient(u_bar, *grid);
  const Vec raw = (-(u_bar.array() - u_bar.minCoeff())).exp().matrix().cwiseProduct(grid->cell_volumes());
  rep.weights = raw / raw.sum();
  rep.barycenter = rep.weights.transpose() * rep.gradient;

  const RowMat& target = P1.support->points();
  const Vec target_w = P1.weights();
  rep.pushforward_error = bl_discrepancy(rep.gradient, rep.weights, target, target_w);
  rep.pushforward_w2 = w2_between(rep.gradient, rep.weights, target, target_w, options, 0);
  const double w2 = w2_between(grid->points(), rep.weights, target, target_w, options, 1);
  rep.w2_squared = w2 * w2;
  rep.coupling_cost = rep.weights.dot((grid->points() - rep.gradient).rowwise().squaredNorm());
  rep.w2_check = rep.coupling_cost - rep.w2_squared;
  const double self = w2_between(grid->points(), rep.weights, rep.gradient, rep.weights, options, 2);
  rep.w2_check_pushforward = rep.coupling_cost - self * self;
  return rep;
}

double check_convexity(const Vec& u_bar, const Support& grid) {
  const Lattice& lat = require_lattice(grid, "convexity");
  const int d = grid.dim();
  if (static_cast<std::size_t>(u_bar.size()) != grid.size())
    throw InvalidArgument("convexity: size does not match grid");

  std::vector<std::vector<int>> steps;
  for (int k = 0; k < d; ++k) {
    std::vector<int> e(static_cast<std::size_t>(d), 0);
    e[static_cast<std::size_t>(k)] = 1;
    steps.push_back(e);
    for (int l = k + 1; l < d; ++l) {
      for (int sign : {1, -1}) {
        std::vector<int> diag(static_cast<std::size_t>(d), 0);
        diag[static_cast<std::size_t>(k)] = 1;
        diag[static_cast<std::size_t>(l)] = sign;
        steps.push_back(diag);
      }
    }
  }

  double worst = 0.0;
  std::vector<int> fwd(static_cast<std::size_t>(d)), bwd(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < u_bar.size(); ++i) {
    for (const auto& h : steps) {
      for (int k = 0; k < d; ++k) {
        fwd[static_cast<std::size_t>(k)] = lat.index(i, k) + h[static_cast<std::size_t>(k)];
        bwd[static_cast<std::size_t>(k)] = lat.index(i, k) - h[static_cast<std::size_t>(k)];
      }
      const int a = lat.find(fwd.data(), d);
      const int b = lat.find(bwd.data(), d);
      if (a < 0 || b < 0) continue;
      worst = std::max(worst, u_bar[i] - 0.5 * (u_bar[a] + u_bar[b]));
    }
  }
  return worst;
}

std::vector<double> geometric_schedule(double eps0, int steps) {
  if (!(eps0 > 0.0) || steps < 1) throw InvalidArgument("schedule: need eps0 > 0 and at least one step");
  std::vector<double> out;
  for (int k = 0; k < steps; ++k) out.push_back(std::ldexp(eps0, -k));
  return out;
}

MomentMeasureResult zero_noise_continuation(const Density& P1, double r, const std::vector<double>& eps_schedule,
                                            ContinuationOptions options) {
  if (eps_schedule.empty()) throw InvalidArgument("continuation: empty eps schedule");
  for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
    if (!(eps_schedule[k] > 0.0)) throw InvalidArgument("continuation: eps must be positive");
    if (k > 0 && !(eps_schedule[k] < eps_schedule[k - 1]))
      throw InvalidArgument("continuation: eps schedule must be strictly decreasing");
  }
  const SupportPtr grid = default_grid(options.grid, P1, r);
  require_lattice(*grid, "continuation");

  MomentMeasureResult res{Density(grid, Vec::Ones(grid->size()), false), Vec(), eps_schedule, 0.0, 0.0, 0.0, 0.0, 0.0,
                          Eigen::RowVectorXd(), false, {}, {}};
  res.shift = P1.to_measure().barycenter();
  Density target = P1;
  if (res.shift.cwiseAbs().maxCoeff() > kCentredTol) {
    target = Density(translate(*P1.support, -res.shift), P1.values, P1.is_probability);
  } else {
    res.shift.setZero();
  }

  const Vec half_sq = half_sq_norms(*grid);
  const double bound = psi_upper_bound(*grid, r);
  std::optional<Density> start = options.init;
  std::optional<Vec> warm_b = options.solve.warm_start_b;
  std::optional<Density> previous;
  res.converged = true;
  for (double eps : eps_schedule) {
    FixedPointOptions fp;
    fp.damping = options.damping;
    fp.tol = options.tol;
    fp.max_outer = options.max_outer;
    fp.solve = options.solve;
    fp.solve.warm_start_b = warm_b;
    fp.grid = grid;
    fp.init = start;
    const FixedPointTrace trace = solve_fixed_point(target, eps, r, fp);
    const FixedPointStep& last = *trace.final_step;

    ContinuationStep step;
    step.eps = eps;
    step.residual = trace.residual;
    step.fixed_point_residual = trace.fixed_point_residual;
    step.objective = trace.objective();
    step.consistency_value = trace.consistency_value;
    step.psi_bound = bound;
    step.outer_iterations = static_cast<int>(trace.gaps.size());
    step.converged = trace.converged;
    const Density& p = trace.density();
    if (previous) step.bl_drift = bl_distance(p.to_measure(), previous->to_measure());
    Vec u1_bar = eps * last.solution.u1 + half_sq;
    step.convexity_defect = check_convexity(u1_bar, *grid);
    step.pushforward_error = verify_moment_measure(u1_bar, grid, target, options.pushforward).pushforward_error;
    res.steps.push_back(step);
    res.u1_bar.push_back(std::move(u1_bar));
    res.p0 = p;
    previous = p;
    start = p;
    warm_b = last.solution.log_nu2;
    if (!trace.converged) {
      res.converged = false;
      res.eps_schedule.resize(res.steps.size());
      break;
    }
  }

  res.u_bar = -res.p0.values.array().log().matrix();
  res.u_bar.array() -= res.u_bar.minCoeff();
  res.convexity_defect = check_convexity(res.u_bar, *grid);
  const PushforwardReport push = verify_moment_measure(res.u_bar, grid, target, options.pushforward);
  res.pushforward_error = push.pushforward_error;
  res.pushforward_w2 = push.pushforward_w2;
  res.w2_check = push.w2_check;
  res.w2_check_pushforward = push.w2_check_pushforward;
  return res;
}

}  // namespace sfe
