#pragma once

#include "sfe/measure.hpp"
#include "sfe/solver.hpp"
#include "sfe/types.hpp"

namespace sfe {

// Three finite forms of the control value V_eps(P0, P1) with kernel g_eps(1).
struct ControlValueReport {
  double v_eps = 0.0;              // reported value, equal to h_plan_vs_product
  double h_plan_vs_product = 0.0;  // H(plan | P0 x g_eps(1) dy)
  double entropy_form = 0.0;       // S(P1) - int u2 dP1 - int u1 dP0
  double dual_form = 0.0;          // int f_o dP1 - int phi(0, .; f_o) dP0
  double max_pairwise_gap = 0.0;
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;
};

struct ControlValue {
  ControlValueReport report;
  SchroedingerSolution solution;
};

ControlValue control_value(const Density& P0, const Density& P1, double eps, SolveOptions options = {});
ControlValueReport v_eps(const Density& P0, const Density& P1, double eps, SolveOptions options = {});

// Reads the three forms off an existing solve with kernel g_eps(1).
ControlValueReport control_report(const SchroedingerSolution& sol, const Density& P1);

// Upper bound S(P1) - sum_{x,y} log g_eps(1, y - x) P0(x) P1(y) on V_eps.
double v_eps_upper_bound(const Density& P0, const Density& P1, double eps);

struct DualVariables {
  Vec f_o;   // log p1 - u2 over the target support (-inf where p1 = 0)
  Vec phi0;  // u1 over the source support
};

// f_o(y) - phi0(x) = log p1(y) - u2(y) - u1(x) with the additive constant
// chosen so that int f_o dP1 - int phi0 dP0 equals the entropy form.
DualVariables dual_variables(const SchroedingerSolution& sol, const Density& P1);

struct PsiTerms {
  double entropy = 0.0;        // S(P)
  double control = 0.0;        // V_eps(P, P1)
  double second_moment = 0.0;  // (1/2) int |x|^2 dP
  double value = 0.0;          // entropy - eps * control + second_moment
  ControlValueReport report;
};

// Objective of Psi_{eps,r} at the candidate P (not the infimum).
PsiTerms psi_terms(const Density& P, const Density& P1, double eps, double r, SolveOptions options = {});
double psi_objective(const Density& P, const Density& P1, double eps, double r, SolveOptions options = {});

// -log Vol(B_r) + (1/2) int_{B_r} |x|^2 dx / Vol(B_r) with the grid's cells
// inside B_r standing in for the ball.
double psi_upper_bound(const Support& grid, double r);
double psi_upper_bound(const Density& P1, double eps, double r);

// The same bound for the continuous ball.
double psi_upper_bound_exact(int dim, double r);

}  // namespace sfe
