#pragma once

#include <cstdint>
#include <vector>

#include "sfe/measure.hpp"
#include "sfe/solver.hpp"
#include "sfe/types.hpp"

namespace sfe {

struct PathEnsemble {
  Vec times;  // n_steps + 1 entries from 0 to 1
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  int dim = 0;
  std::uint64_t seed = 0;
  double eps = 0.0;
  RowMat initial;   // n_paths x dim
  RowMat terminal;  // n_paths x dim
  // Row-major n_paths x (n_steps + 1) x dim, filled only when requested.
  std::vector<double> paths;

  bool has_paths() const { return !paths.empty(); }
};

struct SimulateOptions {
  bool keep_paths = false;
};

// log h(t, x) = log sum_j g_eps(1 - t, y_j - x) nu2_j.
double log_h(double t, PointRef x, const SchroedingerSolution& sol, double eps);

// eps grad_x log h(t, x) = sum_j w_j (y_j - x) / (1 - t) with softmax weights
// w_j proportional to g_eps(1 - t, y_j - x) nu2_j.
Eigen::RowVectorXd drift(double t, PointRef x, const SchroedingerSolution& sol, double eps);

// Euler-Maruyama for dX = drift dt + sqrt(eps) dW with X(0) ~ P0. Path p
// draws its start and all increments from stream_seed(seed, p).
PathEnsemble simulate(const Density& P0, const SchroedingerSolution& sol, double eps, std::size_t n_paths,
                      std::size_t n_steps, std::uint64_t seed, SimulateOptions options = {});

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;  // bootstrap standard deviation
};

struct EndpointOptions {
  int bins = 50;            // per axis, over [-R, R]^d
  double range = 0.0;       // R; 0 means the target support's bounding radius
  int bootstrap = 20;
  std::uint64_t seed = 0;
  std::size_t w2_subsample = 200;  // per side, used when dim > 1
};

struct EndpointReport {
  Estimate terminal_bl;
  Estimate terminal_w2;
  double w2_floor = 0.0;  // W2 of as many direct P1 draws
  bool w2_exact = false;  // exact 1-D route rather than a subsample
  Estimate joint_tv;
  Estimate joint_kl;  // H(empirical joint | binned plan)
  std::size_t n_paths = 0;
  int bins = 0;
};

EndpointReport endpoint_diagnostics(const PathEnsemble& ens, const SchroedingerSolution& sol, const Density& P1,
                                    EndpointOptions options = {});

// W2 between n direct draws of P1 and P1 itself (exact in 1-D, otherwise a
// subsample of `subsample` draws against as many draws from P1).
double w2_monte_carlo_floor(const Density& P1, std::size_t n, std::uint64_t seed, std::size_t subsample = 200);

}  // namespace sfe
