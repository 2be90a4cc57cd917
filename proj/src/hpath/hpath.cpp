#include "sfe/hpath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>

#include "sfe/distance.hpp"
#include "sfe/error.hpp"
#include "sfe/random.hpp"

namespace sfe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Paths advanced together. Vectorized exp and the softmax reductions round
// differently for different block shapes, so the block size is fixed and
// threads only pick up whole blocks.
constexpr std::size_t kBlock = 256;

// Target atoms with nu2 > 0, ready for batched drift evaluation.
struct Terminal {
  RowMat y;
  Vec log_nu;
  Vec sq_norm;
};

Terminal terminal_atoms(const SchroedingerSolution& sol) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < sol.log_nu2.size(); ++j) {
    if (sol.log_nu2[j] > kNegInf) keep.push_back(j);
  }
  const RowMat& pts = sol.mu2.support->points();
  Terminal t{RowMat(keep.size(), pts.cols()), Vec(keep.size()), Vec(keep.size())};
  for (std::size_t k = 0; k < keep.size(); ++k) {
    t.y.row(k) = pts.row(keep[k]);
    t.log_nu[k] = sol.log_nu2[keep[k]];
    t.sq_norm[k] = pts.row(keep[k]).squaredNorm();
  }
  return t;
}

void check_solution(const SchroedingerSolution& sol, double eps) {
  const auto* g = sol.kernel.gaussian();
  if (!g || g->t != 1.0 || g->eps != eps) throw InvalidArgument("h-path: solution must use the kernel g_eps(1) for this eps");
}

// Drift for every row of x at time t. The |x|^2 term of the Gaussian
// exponent is common to all atoms and cancels in the softmax.
void drift_block(double t, const RowMat& x, const Terminal& term, double eps, RowMat& out) {
  const double rem = 1.0 - t;
  const double s = eps * rem;
  // Atoms down the rows, paths across the columns, so each path's softmax
  // runs over contiguous memory.
  Eigen::ArrayXXd w = (term.y * x.transpose() / s).array();
  w.colwise() += term.log_nu.array() - term.sq_norm.array() / (2.0 * s);
  const Eigen::RowVectorXd top = w.colwise().maxCoeff();
  w.rowwise() -= top.array();
  w = w.exp();
  const Eigen::RowVectorXd total = w.colwise().sum();
  out = (term.y.transpose() * w.matrix()).transpose();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!(total[i] > 0.0) || !std::isfinite(total[i])) {
      // Every Gaussian term underflowed: head for the nearest atom.
      Eigen::Index best = 0;
      (term.y.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      out.row(i) = term.y.row(best);
    } else {
      out.row(i) /= total[i];
    }
  }
  out = (out - x) / rem;
}

}  // namespace

double log_h(double t, PointRef x, const SchroedingerSolution& sol, double eps) {
  check_solution(sol, eps);
  if (!(t < 1.0)) throw InvalidArgument("log_h: t must be < 1");
  const double s = eps * (1.0 - t);
  const RowMat& y = sol.mu2.support->points();
  const int d = static_cast<int>(y.cols());
  double top = kNegInf;
  Vec terms(y.rows());
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    terms[j] = sol.log_nu2[j] - (y.row(j) - x).squaredNorm() / (2.0 * s);
    top = std::max(top, terms[j]);
  }
  double sum = 0.0;
  for (Eigen::Index j = 0; j < y.rows(); ++j) sum += terms[j] > kNegInf ? std::exp(terms[j] - top) : 0.0;
  return top + std::log(sum) - 0.5 * d * std::log(2.0 * std::numbers::pi * s);
}

Eigen::RowVectorXd drift(double t, PointRef x, const SchroedingerSolution& sol, double eps) {
  check_solution(sol, eps);
  if (!(t < 1.0)) throw InvalidArgument("drift: t must be < 1");
  if (x.size() != sol.mu2.support->dim()) throw InvalidArgument("drift: point dimension mismatch");
  const Terminal term = terminal_atoms(sol);
  RowMat out;
  drift_block(t, RowMat(x), term, eps, out);
  return out.row(0);
}

PathEnsemble simulate(const Density& P0, const SchroedingerSolution& sol, double eps, std::size_t n_paths,
                      std::size_t n_steps, std::uint64_t seed, SimulateOptions options) {
  check_solution(sol, eps);
  if (n_steps < 2) throw InvalidArgument("simulate: n_steps must be at least 2");
  if (n_paths < 1) throw InvalidArgument("simulate: n_paths must be positive");
  if (P0.support->dim() != sol.mu2.support->dim()) throw InvalidArgument("simulate: dimension mismatch");

  const int d = P0.support->dim();
  const Terminal term = terminal_atoms(sol);
  const DensitySampler sampler(P0);
  const double dt = 1.0 / static_cast<double>(n_steps);
  const double t_last = 1.0 - dt;
  const double noise = std::sqrt(eps * dt);

  PathEnsemble ens;
  ens.times = Vec::LinSpaced(static_cast<Eigen::Index>(n_steps + 1), 0.0, 1.0);
  ens.n_paths = n_paths;
  ens.n_steps = n_steps;
  ens.dim = d;
  ens.seed = seed;
  ens.eps = eps;
  ens.initial.resize(n_paths, d);
  ens.terminal.resize(n_paths, d);
  if (options.keep_paths) ens.paths.assign(n_paths * (n_steps + 1) * d, 0.0);
  const std::size_t stride = (n_steps + 1) * d;

  const auto n_blocks = static_cast<long>((n_paths + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(dynamic, 1)
  for (long b = 0; b < n_blocks; ++b) {
    const std::size_t first = static_cast<std::size_t>(b) * kBlock;
    const std::size_t count = std::min(kBlock, n_paths - first);
    std::vector<Rng> rngs;
    rngs.reserve(count);
    RowMat x(count, d), v;
    for (std::size_t p = 0; p < count; ++p) {
      rngs.emplace_back(stream_seed(seed, first + p));
      x.row(p) = sampler(rngs[p]);
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto record = [&](std::size_t k) {
      if (!options.keep_paths) return;
      for (std::size_t p = 0; p < count; ++p) {
        double* dst = ens.paths.data() + (first + p) * stride + k * d;
        for (int c = 0; c < d; ++c) dst[c] = x(p, c);
      }
    };
    ens.initial.middleRows(first, count) = x;
    record(0);
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double t = std::min(ens.times[k], t_last);
      drift_block(t, x, term, eps, v);
      x += v * dt;
      for (std::size_t p = 0; p < count; ++p) {
        for (int c = 0; c < d; ++c) x(p, c) += noise * gauss(rngs[p]);
      }
      record(k + 1);
    }
    ens.terminal.middleRows(first, count) = x;
  }
  return ens;
}

namespace {

// Flat bin index of x over [-R, R]^d with `bins` per axis.
std::size_t bin_of(const double* x, int d, double range, int bins) {
  std::size_t flat = 0;
  for (int c = 0; c < d; ++c) {
    long k = static_cast<long>(std::floor((x[c] + range) / (2.0 * range) * bins));
    k = std::clamp(k, 0L, static_cast<long>(bins) - 1);
    flat = flat * bins + static_cast<std::size_t>(k);
  }
  return flat;
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double w2_samples_vs_density(const RowMat& samples, const Vec& counts, const Density& P1, std::size_t subsample,
                             std::uint64_t seed, bool& exact) {
  if (samples.cols() == 1) {
    exact = true;
    const auto n = static_cast<std::size_t>(samples.rows());
    return w2_1d(Quantile1D::atoms(std::span<const double>(samples.data(), n), std::span<const double>(counts.data(), n)),
                 Quantile1D::cells(P1));
  }
  exact = false;
  // Resample the weighted cloud and P1 down to the oracle's size.
  Rng rng(stream_seed(seed, 0x5ab5));
  std::discrete_distribution<std::size_t> pick(counts.data(), counts.data() + counts.size());
  RowMat a(subsample, samples.cols());
  for (std::size_t i = 0; i < subsample; ++i) a.row(i) = samples.row(pick(rng));
  const RowMat b = sample_density(P1, subsample, stream_seed(seed, 0xb));
  auto sa = std::make_shared<const Support>(a, Vec::Ones(subsample));
  auto sb = std::make_shared<const Support>(b, Vec::Ones(subsample));
  const Vec u = Vec::Constant(subsample, 1.0 / subsample);
  return w2_distance(DiscreteMeasure(sa, u), DiscreteMeasure(sb, u), W2Options{2 * subsample});
}

}  // namespace

EndpointReport endpoint_diagnostics(const PathEnsemble& ens, const SchroedingerSolution& sol, const Density& P1,
                                    EndpointOptions options) {
  if (P1.support != sol.mu2.support) throw InvalidArgument("endpoint diagnostics: P1 must be the solution's target");
  if (options.bins < 1) throw InvalidArgument("endpoint diagnostics: bins must be positive");
  const int d = ens.dim;
  const double range = options.range > 0.0 ? options.range : sol.mu2.support->bounding_radius();
  const std::size_t n = ens.n_paths;
  const auto per_side = static_cast<std::size_t>(std::pow(options.bins, d));

  // Plan mass per (start bin, end bin).
  const RowMat p = plan(sol);
  const RowMat& xs = sol.mu1.support->points();
  const RowMat& ys = sol.mu2.support->points();
  std::vector<std::size_t> bx(xs.rows()), by(ys.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) bx[i] = bin_of(xs.row(i).data(), d, range, options.bins);
  for (Eigen::Index j = 0; j < ys.rows(); ++j) by[j] = bin_of(ys.row(j).data(), d, range, options.bins);
  std::vector<double> plan_bins(per_side * per_side, 0.0);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) plan_bins[bx[i] * per_side + by[j]] += p(i, j);
  }
  const double plan_total = std::accumulate(plan_bins.begin(), plan_bins.end(), 0.0);
  for (double& v : plan_bins) v /= plan_total;

  std::vector<std::size_t> path_bin(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::RowVectorXd x0 = ens.initial.row(k), x1 = ens.terminal.row(k);
    path_bin[k] = bin_of(x0.data(), d, range, options.bins) * per_side + bin_of(x1.data(), d, range, options.bins);
  }

  auto joint = [&](const Vec& counts, double& tv, double& kl) {
    std::vector<double> emp(plan_bins.size(), 0.0);
    const double total = counts.sum();
    for (std::size_t k = 0; k < n; ++k) emp[path_bin[k]] += counts[k] / total;
    tv = 0.0;
    kl = 0.0;
    for (std::size_t b = 0; b < emp.size(); ++b) {
      tv += std::abs(emp[b] - plan_bins[b]);
      if (emp[b] > 0.0) kl += plan_bins[b] > 0.0 ? emp[b] * std::log(emp[b] / plan_bins[b]) : std::numeric_limits<double>::infinity();
    }
    tv *= 0.5;
  };

  // Column 0 is the ensemble itself, the rest are bootstrap replicates.
  const int reps = std::max(0, options.bootstrap);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Ones(n, reps + 1);
  for (int r = 0; r < reps; ++r) {
    Rng rng(stream_seed(options.seed, static_cast<std::uint64_t>(r)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    counts.col(r + 1).setZero();
    for (std::size_t k = 0; k < n; ++k) counts(pick(rng), r + 1) += 1.0;
  }

  EndpointReport rep;
  rep.n_paths = n;
  rep.bins = options.bins;

  std::vector<double> tv(reps + 1), kl(reps + 1), w2(reps + 1);
  for (int r = 0; r <= reps; ++r) {
    joint(counts.col(r), tv[r], kl[r]);
    w2[r] = w2_samples_vs_density(ens.terminal, counts.col(r), P1, options.w2_subsample,
                                  stream_seed(options.seed, 1000 + r), rep.w2_exact);
  }

  RowMat pts(n + P1.size(), d);
  pts << ens.terminal, P1.support->points();
  Eigen::MatrixXd w(pts.rows(), reps + 1);
  w.topRows(n) = counts / static_cast<double>(n);
  w.bottomRows(P1.size()) = -P1.weights().replicate(1, reps + 1);
  const BlDictionary dict(d, BlDictionary::domain_scale_for({&ens.terminal, &P1.support->points()}));
  const Vec bl = dict.sup(pts, w);

  auto pack = [&](const std::vector<double>& v) {
    return Estimate{v[0], stddev(std::vector<double>(v.begin() + 1, v.end()))};
  };
  rep.joint_tv = pack(tv);
  rep.joint_kl = pack(kl);
  rep.terminal_w2 = pack(w2);
  rep.terminal_bl = pack(std::vector<double>(bl.data(), bl.data() + bl.size()));
  rep.w2_floor = w2_monte_carlo_floor(P1, n, stream_seed(options.seed, 0xf1002), options.w2_subsample);
  return rep;
}

double w2_monte_carlo_floor(const Density& P1, std::size_t n, std::uint64_t seed, std::size_t subsample) {
  const RowMat draws = sample_density(P1, n, seed);
  bool exact = false;
  return w2_samples_vs_density(draws, Vec::Ones(n), P1, subsample, stream_seed(seed, 7), exact);
}

}  // namespace sfe
