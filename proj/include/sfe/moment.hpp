#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sfe/measure.hpp"
#include "sfe/solver.hpp"
#include "sfe/types.hpp"

namespace sfe {

// The points of `support` inside the closed ball B_r, keeping lattice
// metadata. Returns `support` itself when nothing is dropped.
SupportPtr restrict_to_ball(const SupportPtr& support, double r);

// One application of the map p -> C^{-1} 1_{B_r} exp(-eps u1 - |x|^2 / 2)
// together with the solve it was read from.
struct FixedPointStep {
  Density next;
  SchroedingerSolution solution;
  double log_C = 0.0;  // log of the normalizing constant
};

FixedPointStep fixed_point_step_detailed(const Density& p, const Density& P1, double eps, double r,
                                         SolveOptions options = {});
Density fixed_point_step(const Density& p, const Density& P1, double eps, double r, SolveOptions options = {});

// Psi at a fixed point written through the normalizing constant:
// -log C - eps S(P1) + eps int u2 dP1. Agrees with the objective when p is
// the density the step was taken from and the step returned p.
double fixed_point_consistency_value(const FixedPointStep& step, const Density& P1, double eps);

struct FixedPointOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_outer = 1000;
  SolveOptions solve;
  // Lattice for p. Defaults to the support of P1 cut down to B_r.
  SupportPtr grid;
  // Starting density on the grid. Defaults to uniform on the grid.
  std::optional<Density> init;
};

struct FixedPointTrace {
  double eps = 0.0;
  double damping = 0.0;
  double tol = 0.0;
  // p^(0), p^(1), ...; the last entry is the returned density.
  std::vector<Density> iterates;
  // Psi objective at each iterate.
  std::vector<double> objective_values;
  // sup |p^(k+1) - p^(k)| for each update.
  std::vector<double> gaps;
  // int ubar2 dP1 - ubar2(y0) at each iterate; nonnegative by convexity.
  std::vector<double> jensen_slack;
  bool converged = false;
  double residual = 0.0;             // last entry of gaps
  double fixed_point_residual = 0.0;  // sup |T(p) - p| at the returned p
  double consistency_value = 0.0;
  // Step taken from the returned density.
  std::optional<FixedPointStep> final_step;

  const Density& density() const { return iterates.back(); }
  double objective() const { return objective_values.back(); }
};

// Damped iteration log p <- (1 - damping) log p + damping log T(p), then
// renormalized, until the sup gap between successive iterates is <= tol.
FixedPointTrace solve_fixed_point(const Density& P1, double eps, double r, FixedPointOptions options = {});

struct PushforwardReport {
  double pushforward_error = 0.0;  // BL distance of (Du)_#(e^{-u} dx) to P1
  double pushforward_w2 = 0.0;     // W2 of the same pair
  double w2_squared = 0.0;         // W2(e^{-u} dx, P1)^2
  double coupling_cost = 0.0;      // int |x - Du(x)|^2 e^{-u} dx
  double w2_check = 0.0;           // coupling_cost - w2_squared
  // coupling_cost - W2(e^{-u} dx, (Du)_# e^{-u} dx)^2; zero up to rounding
  // when the discrete coupling is optimal, which holds for monotone Du in 1-D.
  double w2_check_pushforward = 0.0;
  RowMat gradient;                 // Du at every grid point
  Vec weights;                     // normalized e^{-u} * cell volume
  Eigen::RowVectorXd barycenter;   // of the pushforward
};

struct PushforwardOptions {
  // W2 against P1 uses the exact quantile route in one dimension and the
  // min-cost-flow oracle on a seeded resample of this size otherwise.
  std::size_t w2_subsample = 200;
  std::uint64_t seed = 0;
};

// Du by central differences along each lattice axis, one-sided where a
// neighbour is missing.
RowMat lattice_gradient(const Vec& u, const Support& grid);

PushforwardReport verify_moment_measure(const Vec& u_bar, const SupportPtr& grid, const Density& P1,
                                        PushforwardOptions options = {});

// Worst midpoint violation u(x) - (u(x - h) + u(x + h)) / 2 over lattice
// triples along the axes and the diagonals e_k +- e_l; clipped at zero.
double check_convexity(const Vec& u_bar, const Support& grid);

struct ContinuationOptions {
  double tol = 1e-10;
  double damping = 0.5;
  int max_outer = 1000;
  SolveOptions solve;
  SupportPtr grid;
  std::optional<Density> init;
  PushforwardOptions pushforward;
};

struct ContinuationStep {
  double eps = 0.0;
  double residual = 0.0;
  double fixed_point_residual = 0.0;
  double objective = 0.0;
  double consistency_value = 0.0;
  double psi_bound = 0.0;
  double bl_drift = 0.0;  // BL distance to the previous eps's density; 0 first
  double convexity_defect = 0.0;
  double pushforward_error = 0.0;
  int outer_iterations = 0;
  bool converged = false;
};

struct MomentMeasureResult {
  Density p0;
  Vec u_bar;  // -log p0 with min over the grid = 0
  std::vector<double> eps_schedule;
  double pushforward_error = 0.0;
  double pushforward_w2 = 0.0;
  double w2_check = 0.0;
  double w2_check_pushforward = 0.0;
  double convexity_defect = 0.0;
  // Barycenter of the input; the solve ran on P1 translated by -shift.
  Eigen::RowVectorXd shift;
  bool converged = false;
  std::vector<ContinuationStep> steps;
  // eps u1 + |x|^2 / 2 on the grid for each completed eps.
  std::vector<Vec> u1_bar;
};

// Runs solve_fixed_point down a decreasing eps schedule, each solve warm
// started from the previous density and potentials. Stops at the first
// non-converged eps and returns the partial schedule with converged = false.
MomentMeasureResult zero_noise_continuation(const Density& P1, double r, const std::vector<double>& eps_schedule,
                                            ContinuationOptions options = {});

// eps0 2^{-k}, k = 0..steps-1.
std::vector<double> geometric_schedule(double eps0 = 1.0, int steps = 8);

}  // namespace sfe
