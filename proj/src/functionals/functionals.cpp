#include "sfe/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sfe/entropy.hpp"
#include "sfe/error.hpp"

namespace sfe {

namespace {

void check_target(const SchroedingerSolution& sol, const Density& P1) {
  if (P1.support != sol.mu2.support) throw InvalidArgument("P1 must live on the solution's target support");
  for (std::size_t j = 0; j < P1.size(); ++j) {
    if (sol.mu2.weights[j] > 0.0 && !(P1.values[j] > 0.0))
      throw InvalidArgument("dual variables: p1 vanishes at target point " + std::to_string(j) + " which carries mass");
  }
}

// Sum of w_i v_i over w_i > 0, so -inf entries on null points drop out.
double integrate(const Vec& w, const Vec& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) s += w[i] * v[i];
  }
  return s;
}

void check_in_ball(const Support& s, double r) {
  if (!(r > 0.0)) throw InvalidArgument("r must be positive");
  if (s.norms().maxCoeff() > r * (1.0 + 1e-12)) throw InvalidArgument("support leaves B_r");
}

}  // namespace

DualVariables dual_variables(const SchroedingerSolution& sol, const Density& P1) {
  check_target(sol, P1);
  DualVariables dv;
  dv.f_o = P1.values.unaryExpr([](double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }) -
           sol.u2;
  // The relation only fixes f_o - phi0; phi0 = u1 is the gauge in which the
  // dual form reproduces the entropy form term by term.
  dv.phi0 = sol.u1;
  return dv;
}

ControlValueReport control_report(const SchroedingerSolution& sol, const Density& P1) {
  if (!sol.kernel.gaussian()) throw InvalidArgument("control value needs the heat kernel g_eps(1)");
  check_target(sol, P1);
  const Vec& w0 = sol.mu1.weights;
  const Vec& w1 = sol.mu2.weights;
  const Vec& vol = sol.mu2.support->cell_volumes();
  const RowMat p = plan(sol);
  const RowMat& l = *sol.log_q;

  ControlValueReport rep;
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (!(w0[i] > 0.0)) continue;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double m = p(i, j);
      if (m > 0.0) h += m * (std::log(m) - std::log(w0[i]) - l(i, j) - std::log(vol[j]));
    }
  }
  rep.h_plan_vs_product = h;
  rep.entropy_form = entropy_S(P1) - integrate(w1, sol.u2) - integrate(w0, sol.u1);
  const DualVariables dv = dual_variables(sol, P1);
  rep.dual_form = integrate(w1, dv.f_o) - integrate(w0, dv.phi0);
  rep.v_eps = rep.h_plan_vs_product;
  rep.max_pairwise_gap = std::max({std::abs(rep.h_plan_vs_product - rep.entropy_form),
                                   std::abs(rep.h_plan_vs_product - rep.dual_form),
                                   std::abs(rep.entropy_form - rep.dual_form)});
  rep.converged = sol.converged;
  rep.iterations = sol.iterations;
  rep.final_residual = sol.final_residual;
  return rep;
}

ControlValue control_value(const Density& P0, const Density& P1, double eps, SolveOptions options) {
  if (!(eps > 0.0)) throw InvalidArgument("control value: eps must be positive");
  if (P0.support->dim() != P1.support->dim()) throw InvalidArgument("control value: dimension mismatch");
  KernelSpec q(GaussianHeat{1.0, eps}, P0.support, P1.support);
  SchroedingerSolution sol = solve(q, P0.to_measure(), P1.to_measure(), options);
  ControlValueReport rep = control_report(sol, P1);
  return {rep, std::move(sol)};
}

ControlValueReport v_eps(const Density& P0, const Density& P1, double eps, SolveOptions options) {
  return control_value(P0, P1, eps, options).report;
}

double v_eps_upper_bound(const Density& P0, const Density& P1, double eps) {
  const RowMat l = log_kernel_matrix(KernelSpec(GaussianHeat{1.0, eps}, P0.support, P1.support));
  const Vec w0 = P0.weights();
  const Vec w1 = P1.weights();
  return entropy_S(P1) - w0.dot(l * w1);
}

PsiTerms psi_terms(const Density& P, const Density& P1, double eps, double r, SolveOptions options) {
  check_in_ball(*P.support, r);
  PsiTerms t;
  t.entropy = entropy_S(P);
  t.report = v_eps(P, P1, eps, options);
  t.control = t.report.v_eps;
  t.second_moment = 0.5 * P.weights().dot(P.support->points().rowwise().squaredNorm());
  t.value = t.entropy - eps * t.control + t.second_moment;
  return t;
}

double psi_objective(const Density& P, const Density& P1, double eps, double r, SolveOptions options) {
  return psi_terms(P, P1, eps, r, options).value;
}

double psi_upper_bound(const Support& grid, double r) {
  if (!(r > 0.0)) throw InvalidArgument("psi bound: r must be positive");
  const Vec norms = grid.norms();
  double vol = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (norms[i] > r * (1.0 + 1e-12)) continue;
    vol += grid.cell_volumes()[i];
    moment += grid.cell_volumes()[i] * norms[i] * norms[i];
  }
  if (!(vol > 0.0)) throw InvalidArgument("psi bound: no grid cells inside B_r");
  return -std::log(vol) + 0.5 * moment / vol;
}

double psi_upper_bound(const Density& P1, double /*eps*/, double r) { return psi_upper_bound(*P1.support, r); }

double psi_upper_bound_exact(int dim, double r) {
  const double d = dim;
  const double log_vol = 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d + 1.0) + d * std::log(r);
  return -log_vol + 0.5 * d * r * r / (d + 2.0);
}

}  // namespace sfe
