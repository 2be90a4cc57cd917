#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfe/kernel.hpp"
#include "sfe/measure.hpp"
#include "sfe/types.hpp"

namespace sfe {

// Exhaustion {K_m} used to fix the free constant in (nu1, nu2).
enum class Exhaustion {
  kBalls,    // K_m = B_m intersected with the support
  kCompact,  // K_m = whole support, so nu1(S) = nu2(S)
};

struct SolveOptions {
  double tol = 1e-10;
  int max_iters = 5000;
  Exhaustion exhaustion = Exhaustion::kBalls;
  // Initial log nu2 over the target support (entries for zero-mass target
  // points are ignored). Defaults to b = 0.
  std::optional<Vec> warm_start_b;
};

struct SchroedingerSolution {
  KernelSpec kernel;
  std::shared_ptr<const RowMat> log_q;
  DiscreteMeasure mu1, mu2;
  DiscreteMeasure nu1, nu2;
  // log nu_i, -inf where the marginal has no mass.
  Vec log_nu1, log_nu2;
  Vec u1, u2;
  int m_index = 1;
  double scale_C = 1.0;
  Exhaustion exhaustion = Exhaustion::kBalls;
  int iterations = 0;
  double final_residual = 0.0;
  bool converged = false;
  // Marginal defect measured before each sweep.
  std::vector<double> residual_history;
};

// Log-domain IPFP. The defect is the larger of the two L1 marginal errors.
SchroedingerSolution solve(const KernelSpec& q, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                           SolveOptions options = {});

// Plain multiplicative iteration on kernel values; kept to cross-check solve
// on well-conditioned instances.
SchroedingerSolution solve_plain(const KernelSpec& q, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                                 SolveOptions options = {});

// Smallest m >= 1 with mu1(B_m) mu2(B_m) > 0.
int exhaustion_index(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2);

// Re-applies the normalization for another exhaustion.
SchroedingerSolution renormalize(const SchroedingerSolution& sol, Exhaustion exhaustion);

// (c nu1, nu2 / c) with potentials updated to match.
SchroedingerSolution rescale(const SchroedingerSolution& sol, double c);

// plan(i, j) = nu1_i q_ij nu2_j.
RowMat plan(const SchroedingerSolution& sol);

// Same plan from exp(-u1 - u2) q mu1 mu2.
RowMat plan_from_potentials(const SchroedingerSolution& sol);

// Product support (x_i, y_j) flattened row-major, cell volume vol_i * vol_j.
SupportPtr product_support(const Support& a, const Support& b);
DiscreteMeasure plan_measure(const SchroedingerSolution& sol, const SupportPtr& product);

// Hat function: 1 on B_m, linear down to 0 on the sphere of radius m + 1.
double hat(double norm, int m);

// (u1|m, u2|m) with the hat cutoff applied to the opposite factor.
std::pair<Vec, Vec> truncated_potentials(const SchroedingerSolution& sol, int m);

// u1 (resp. u2) at arbitrary points; requires a heat kernel.
Vec potential_u1_at(const SchroedingerSolution& sol, const RowMat& points);
Vec potential_u2_at(const SchroedingerSolution& sol, const RowMat& points);

struct BeurlingReport {
  double q_min = 0.0;
  double q_max = 0.0;
  double lower = 0.0;  // m / sqrt(M)
  double upper = 0.0;  // M / sqrt(m)
  double worst_slack = 0.0;
  std::size_t points_checked = 0;
};

// Checks m/sqrt(M) <= exp(u_i) <= M/sqrt(m) at every support point in B_r,
// after normalizing so that nu1(S) = nu2(S). Throws BoundViolation.
BeurlingReport check_beurling_bounds(const SchroedingerSolution& sol, double r);

struct ProductIdentityRow {
  std::size_t i = 0;  // source index of x_1
  std::size_t k = 0;  // target index of x_2
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct ProductIdentityReport {
  std::vector<ProductIdentityRow> rows;
  double max_rel_error = 0.0;
};

// exp(u1|m(x1) + u2|m(x2)) against the plan integral of
// q(x1, y) q(x, x2) / q(x, y) phi_m(x) phi_m(y). Throws BoundViolation when
// the relative error exceeds rel_tol or the min/max sandwich fails.
ProductIdentityReport check_product_identity(const SchroedingerSolution& sol, int m,
                                             const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                             double rel_tol = 1e-8);

struct LevelReport {
  double lower = 0.0;   // min_{K_m x K_m} q^{-1} * plan(K_m x K_m)
  double middle = 0.0;  // int phi_m dnu1 * int phi_m dnu2
  double upper = 0.0;   // max of q^{-1} over supp(phi_m)^2
};

LevelReport check_level_bounds(const SchroedingerSolution& sol, int m);

// L1 marginal defects (rows vs mu1, columns vs mu2) of a plan.
std::pair<double, double> marginal_defects(const RowMat& plan, const Vec& mu1, const Vec& mu2);

}  // namespace sfe
