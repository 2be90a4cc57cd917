#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfe/kernel.hpp"
#include "sfe/measure.hpp"
#include "sfe/solver.hpp"
#include "sfe/types.hpp"

namespace sfe {

enum class FamilyKind {
  kKernelPerturbation,     // q_n = q exp((A / n) psi), psi(x, y) = sin(sum x) cos(sum y)
  kMarginalMollification,  // mu_{i,n} = mu_i smoothed by a Gaussian of bandwidth h / n, on the same grid
  kMarginalEmpirical,      // mu_{i,n} = empirical law of n seeded draws from mu_i
};

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

struct FamilyParams {
  std::vector<int> index_set{4, 8, 16, 32, 64};
  double amplitude = 1.0;  // A
  double bandwidth = 0.5;  // h
  std::uint64_t seed = 0;
};

struct FamilyMember {
  int n = 0;
  KernelSpec q;
  DiscreteMeasure mu1, mu2;
  double a_n = 0.0;            // kernel perturbation amplitude, 0 for marginal families
  double kernel_sup_gap = 0.0;  // max |q_n - q| over the grid
};

struct PerturbationFamily {
  FamilyKind kind = FamilyKind::kKernelPerturbation;
  FamilyParams params;
  KernelSpec base_q;
  DiscreteMeasure base_mu1, base_mu2;
  std::vector<FamilyMember> members;
};

PerturbationFamily make_family(const KernelSpec& base_q, const DiscreteMeasure& base_mu1,
                               const DiscreteMeasure& base_mu2, FamilyKind kind, FamilyParams params = {});

// Probe pair for the potential sums: source index i and target index k. The
// probe used for member n is (x_i + shift / n, y_k + shift / n).
struct Probe {
  std::size_t i = 0;
  std::size_t k = 0;
};

// `count` seeded probe pairs drawn from grid points with positive mass.
std::vector<Probe> random_probes(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, std::size_t count,
                                 std::uint64_t seed);

struct ConvergenceOptions {
  std::vector<Probe> probes;
  // Direction of the moving probes; zero keeps the probes on the grid. Off
  // grid probes need a heat base kernel.
  std::optional<Eigen::RowVectorXd> probe_shift;
  int m = 1;
  SolveOptions solve;
  // When set, also fills supnorm_gap over B_{r'}.
  std::optional<double> r_prime;
  // Rescales each member's (nu1, nu2) by a seeded random constant before
  // the diagnostics; the asserted gaps must not move.
  std::optional<std::uint64_t> rescale_seed;
};

struct ConvergenceRow {
  int n = 0;
  double plan_bl = 0.0;
  double product_gap = 0.0;
  double potential_gap = 0.0;             // sum u1|m + u2|m at moving probes
  double individual_potential_gap = 0.0;  // |u1 gap| + |u2 gap|, compact normalization
  double supnorm_gap = 0.0;               // NaN unless requested
  double kernel_sup_gap = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string error;  // non-empty when the member could not be solved
};

struct TrendSummary {
  double first = 0.0;
  double last = 0.0;
  double ratio = 0.0;  // first / last, +inf when last is 0 and first is not
  bool non_increasing = false;
};

struct ConvergenceReport {
  FamilyKind kind = FamilyKind::kKernelPerturbation;
  std::vector<ConvergenceRow> rows;
  TrendSummary plan_bl, product_gap, potential_gap, supnorm_gap;
  int m = 1;
};

// Solves the base and every member and fills one row per member.
ConvergenceReport run_convergence(const PerturbationFamily& family, const ConvergenceOptions& options);

struct A3rEstimate {
  bool satisfied = false;
  bool analytic = false;
  double C_r = 0.0;
  std::string reason;  // why the estimate is unavailable
};

// Smallest C with x -> C |x|^2 + log q(x, y) and y -> C |y|^2 + log q(x, y)
// convex on B_r: closed form for the heat kernel, otherwise from second
// differences along lattice axes and diagonals.
A3rEstimate check_a3r(const KernelSpec& q, double r);

// Per member: sup over source points in B_{r'} of |u1_n - u1| plus the
// same over target points for u2, both in the compact normalization.
std::vector<double> run_supnorm_convergence(const PerturbationFamily& family, double r_prime,
                                            SolveOptions options = {});

TrendSummary summarize_trend(const std::vector<double>& values);

}  // namespace sfe
