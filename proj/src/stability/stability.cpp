#include "sfe/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sfe/distance.hpp"
#include "sfe/error.hpp"
#include "sfe/kernels.hpp"
#include "sfe/random.hpp"

namespace sfe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double psi(PointRef x, PointRef y) { return std::sin(x.sum()) * std::cos(y.sum()); }

RowMat psi_matrix(const Support& a, const Support& b) {
  RowMat out(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out(i, j) = psi(a.point(i), b.point(j));
  }
  return out;
}

// Gaussian smoothing of a measure re-gridded onto its own support.
DiscreteMeasure mollify(const DiscreteMeasure& mu, double sigma) {
  const Support& s = *mu.support;
  RowMat logk;
  kernels::parallel::gaussian_log_kernel(s.points(), s.points(), sigma * sigma, 0.0, logk);
  Vec log_w = mu.weights.unaryExpr([](double w) { return w > 0.0 ? std::log(w) : kNegInf; });
  Vec smoothed;
  kernels::parallel::row_logsumexp(logk, log_w, smoothed);
  Vec raw = (smoothed.array() == kNegInf).select(0.0, smoothed.array().exp()).matrix();
  raw = raw.cwiseProduct(s.cell_volumes());
  return DiscreteMeasure::normalized(mu.support, raw);
}

DiscreteMeasure empirical(const DiscreteMeasure& mu, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::discrete_distribution<Eigen::Index> pick(mu.weights.data(), mu.weights.data() + mu.weights.size());
  Vec counts = Vec::Zero(mu.weights.size());
  for (int s = 0; s < n; ++s) counts[pick(rng)] += 1.0;
  return DiscreteMeasure::normalized(mu.support, counts);
}

// log q_n(x, y) at arbitrary points for a heat base kernel.
double member_log_kernel(const PerturbationFamily& fam, const FamilyMember& mem, PointRef x, PointRef y) {
  const auto* g = fam.base_q.gaussian();
  if (!g) throw InvalidArgument("stability: off-grid probes need a heat base kernel");
  return gaussian_heat_log(*g, x, y) + mem.a_n * psi(x, y);
}

struct ProbePoints {
  Eigen::RowVectorXd x, y;
  bool on_grid = true;
};

ProbePoints probe_points(const SchroedingerSolution& sol, const Probe& p, const ConvergenceOptions& opt, int n) {
  ProbePoints out{sol.mu1.support->point(p.i), sol.mu2.support->point(p.k), true};
  if (opt.probe_shift && opt.probe_shift->norm() > 0.0) {
    out.x += *opt.probe_shift / n;
    out.y += *opt.probe_shift / n;
    out.on_grid = false;
  }
  return out;
}

// u1|m(x) and u2|m(y) at one probe; hat weights restrict the opposite factor.
std::pair<double, double> potentials_at(const PerturbationFamily& fam, const FamilyMember* mem,
                                        const SchroedingerSolution& sol, const Probe& p, const ProbePoints& pt,
                                        std::optional<int> m) {
  const Support& s1 = *sol.mu1.support;
  const Support& s2 = *sol.mu2.support;
  Vec t1(s2.size()), t2(s1.size());
  for (std::size_t j = 0; j < s2.size(); ++j) {
    const double lq = pt.on_grid ? (*sol.log_q)(p.i, j)
                                 : (mem ? member_log_kernel(fam, *mem, pt.x, s2.point(j))
                                        : gaussian_heat_log(*fam.base_q.gaussian(), pt.x, s2.point(j)));
    const double h = m ? hat(s2.point(j).norm(), *m) : 1.0;
    t1[j] = h > 0.0 ? lq + sol.log_nu2[j] + std::log(h) : kNegInf;
  }
  for (std::size_t i = 0; i < s1.size(); ++i) {
    const double lq = pt.on_grid ? (*sol.log_q)(i, p.k)
                                 : (mem ? member_log_kernel(fam, *mem, s1.point(i), pt.y)
                                        : gaussian_heat_log(*fam.base_q.gaussian(), s1.point(i), pt.y));
    const double h = m ? hat(s1.point(i).norm(), *m) : 1.0;
    t2[i] = h > 0.0 ? lq + sol.log_nu1[i] + std::log(h) : kNegInf;
  }
  return {kernels::logsumexp(t1), kernels::logsumexp(t2)};
}

DiscreteMeasure product_of_factors(const SchroedingerSolution& sol, const SupportPtr& product) {
  const Vec& a = sol.nu1.weights;
  const Vec& b = sol.nu2.weights;
  Vec w(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) w.segment(i * b.size(), b.size()) = a[i] * b;
  return {product, w, false};
}

double sup_gap_in_ball(const Vec& a, const Vec& b, const Support& s, double r) {
  const Vec norms = s.norms();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (norms[i] <= r * (1.0 + 1e-12)) worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

SolveOptions with_exhaustion(SolveOptions opt, Exhaustion ex) {
  opt.exhaustion = ex;
  return opt;
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::kKernelPerturbation:
      return "kernel_perturbation";
    case FamilyKind::kMarginalMollification:
      return "marginal_mollification";
    case FamilyKind::kMarginalEmpirical:
      return "marginal_empirical";
  }
  return "unknown";
}

FamilyKind family_kind_from_string(const std::string& name) {
  for (FamilyKind k : {FamilyKind::kKernelPerturbation, FamilyKind::kMarginalMollification,
                       FamilyKind::kMarginalEmpirical}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown perturbation family '" + name + "'");
}

PerturbationFamily make_family(const KernelSpec& base_q, const DiscreteMeasure& base_mu1,
                               const DiscreteMeasure& base_mu2, FamilyKind kind, FamilyParams params) {
  if (base_mu1.support != base_q.source() || base_mu2.support != base_q.target())
    throw InvalidArgument("make_family: marginals must live on the kernel's supports");
  if (params.index_set.empty()) throw InvalidArgument("make_family: empty index set");
  for (int n : params.index_set) {
    if (n < 1) throw InvalidArgument("make_family: index values must be positive");
  }
  if (!std::isfinite(params.amplitude)) throw InvalidArgument("make_family: amplitude must be finite");
  if (kind == FamilyKind::kMarginalMollification && !(params.bandwidth > 0.0))
    throw InvalidArgument("make_family: bandwidth must be positive");

  PerturbationFamily fam{kind, params, base_q, base_mu1, base_mu2, {}};
  const RowMat base_log = log_kernel_matrix(base_q);
  const RowMat shape = kind == FamilyKind::kKernelPerturbation ? psi_matrix(*base_q.source(), *base_q.target())
                                                               : RowMat();
  for (int n : params.index_set) {
    if (kind == FamilyKind::kKernelPerturbation) {
      const double a_n = params.amplitude / n;
      RowMat log_n = base_log + a_n * shape;
      if (!log_n.allFinite()) throw InvalidArgument("make_family: perturbed kernel is not positive and finite");
      const double gap = (log_n.array().exp() - base_log.array().exp()).abs().maxCoeff();
      KernelSpec q(DenseMatrix::from_log_values(std::move(log_n)), base_q.source(), base_q.target());
      fam.members.push_back({n, std::move(q), base_mu1, base_mu2, a_n, gap});
    } else if (kind == FamilyKind::kMarginalMollification) {
      const double sigma = params.bandwidth / n;
      fam.members.push_back({n, base_q, mollify(base_mu1, sigma), mollify(base_mu2, sigma), 0.0, 0.0});
    } else {
      const auto s = static_cast<std::uint64_t>(n);
      fam.members.push_back({n, base_q, empirical(base_mu1, n, stream_seed(params.seed, 2 * s)),
                             empirical(base_mu2, n, stream_seed(params.seed, 2 * s + 1)), 0.0, 0.0});
    }
  }
  return fam;
}

std::vector<Probe> random_probes(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2, std::size_t count,
                                 std::uint64_t seed) {
  std::vector<std::size_t> a, b;
  for (Eigen::Index i = 0; i < mu1.weights.size(); ++i) {
    if (mu1.weights[i] > 0.0) a.push_back(static_cast<std::size_t>(i));
  }
  for (Eigen::Index k = 0; k < mu2.weights.size(); ++k) {
    if (mu2.weights[k] > 0.0) b.push_back(static_cast<std::size_t>(k));
  }
  if (a.empty() || b.empty()) throw InvalidArgument("random_probes: a marginal has no mass");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pa(0, a.size() - 1), pb(0, b.size() - 1);
  std::vector<Probe> out;
  for (std::size_t c = 0; c < count; ++c) out.push_back({a[pa(rng)], b[pb(rng)]});
  return out;
}

TrendSummary summarize_trend(const std::vector<double>& values) {
  TrendSummary t;
  if (values.empty()) return t;
  t.first = values.front();
  t.last = values.back();
  t.ratio = t.last > 0.0 ? t.first / t.last : (t.first > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  t.non_increasing = t.last <= t.first;
  return t;
}

ConvergenceReport run_convergence(const PerturbationFamily& fam, const ConvergenceOptions& opt) {
  if (opt.probes.empty()) throw InvalidArgument("run_convergence: no probes");
  const SchroedingerSolution base = solve(fam.base_q, fam.base_mu1, fam.base_mu2, opt.solve);
  if (!base.converged) throw NotConverged("run_convergence: base instance did not converge");
  if (opt.m < base.m_index) throw InvalidArgument("run_convergence: m is below the base m_index");
  const SchroedingerSolution base_compact = renormalize(base, Exhaustion::kCompact);
  const SupportPtr product = product_support(*fam.base_q.source(), *fam.base_q.target());
  const DiscreteMeasure base_plan = plan_measure(base, product);
  const DiscreteMeasure base_factors = product_of_factors(base, product);

  std::vector<std::pair<double, double>> base_trunc, base_full;
  std::vector<ProbePoints> base_pts;
  for (const Probe& p : opt.probes) {
    const ProbePoints pt{base.mu1.support->point(p.i), base.mu2.support->point(p.k), true};
    base_trunc.push_back(potentials_at(fam, nullptr, base, p, pt, opt.m));
    base_full.push_back(potentials_at(fam, nullptr, base_compact, p, pt, std::nullopt));
  }

  std::vector<double> supnorm(fam.members.size(), kNaN);
  if (opt.r_prime) supnorm = run_supnorm_convergence(fam, *opt.r_prime, opt.solve);

  ConvergenceReport rep{fam.kind, {}, {}, {}, {}, {}, opt.m};
  for (std::size_t idx = 0; idx < fam.members.size(); ++idx) {
    const FamilyMember& mem = fam.members[idx];
    ConvergenceRow row;
    row.n = mem.n;
    row.kernel_sup_gap = mem.kernel_sup_gap;
    row.supnorm_gap = supnorm[idx];
    try {
      SchroedingerSolution sol = solve(mem.q, mem.mu1, mem.mu2, opt.solve);
      row.converged = sol.converged;
      row.iterations = sol.iterations;
      if (opt.m < sol.m_index) throw InvalidArgument("m is below this member's m_index");
      if (opt.rescale_seed) {
        Rng rng(stream_seed(*opt.rescale_seed, static_cast<std::uint64_t>(mem.n)));
        sol = rescale(sol, std::exp(std::uniform_real_distribution<double>(-2.0, 2.0)(rng)));
      }
      row.plan_bl = bl_distance(plan_measure(sol, product), base_plan);
      const DiscreteMeasure factors = product_of_factors(sol, product);
      row.product_gap = bl_discrepancy(product->points(), factors.weights, product->points(), base_factors.weights);
      const SchroedingerSolution compact = renormalize(sol, Exhaustion::kCompact);
      for (std::size_t c = 0; c < opt.probes.size(); ++c) {
        const ProbePoints pt = probe_points(sol, opt.probes[c], opt, mem.n);
        const auto [u1m, u2m] = potentials_at(fam, &mem, sol, opt.probes[c], pt, opt.m);
        row.potential_gap =
            std::max(row.potential_gap, std::abs((u1m + u2m) - (base_trunc[c].first + base_trunc[c].second)));
        const auto [u1, u2] = potentials_at(fam, &mem, compact, opt.probes[c], pt, std::nullopt);
        row.individual_potential_gap = std::max(
            row.individual_potential_gap, std::abs(u1 - base_full[c].first) + std::abs(u2 - base_full[c].second));
      }
    } catch (const Error& e) {
      row.error = e.what();
      row.plan_bl = row.product_gap = row.potential_gap = row.individual_potential_gap = kNaN;
    }
    rep.rows.push_back(row);
  }

  auto column = [&](double ConvergenceRow::*field) {
    std::vector<double> v;
    for (const auto& r : rep.rows) v.push_back(r.*field);
    return summarize_trend(v);
  };
  rep.plan_bl = column(&ConvergenceRow::plan_bl);
  rep.product_gap = column(&ConvergenceRow::product_gap);
  rep.potential_gap = column(&ConvergenceRow::potential_gap);
  rep.supnorm_gap = column(&ConvergenceRow::supnorm_gap);
  return rep;
}

A3rEstimate check_a3r(const KernelSpec& q, double r) {
  if (!(r > 0.0)) throw InvalidArgument("check_a3r: r must be positive");
  A3rEstimate est;
  if (const auto* g = q.gaussian()) {
    est.satisfied = true;
    est.analytic = true;
    est.C_r = 1.0 / (2.0 * g->eps * g->t);
    return est;
  }
  const Support& s1 = *q.source();
  const Support& s2 = *q.target();
  if (!s1.lattice() || !s2.lattice()) {
    est.reason = "supports are not regular lattices";
    return est;
  }
  if (s1.lattice()->points_per_axis < 3 || s2.lattice()->points_per_axis < 3) {
    est.reason = "fewer than three lattice points per axis";
    return est;
  }
  const RowMat l = log_kernel_matrix(q);
  if (!l.allFinite()) {
    est.reason = "log q is not finite on the grid";
    return est;
  }

  // Most negative second difference of f along lattice lines through
  // points in B_r; `at(a, b)` reads log q with the varying point first.
  auto scan = [&](const Support& s, std::size_t other, auto at) {
    const Lattice& lat = *s.lattice();
    const int d = s.dim();
    const Vec norms = s.norms();
    double worst = std::numeric_limits<double>::infinity();
    std::vector<int> fwd(static_cast<std::size_t>(d)), bwd(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (norms[static_cast<Eigen::Index>(i)] > r * (1.0 + 1e-12)) continue;
      for (int k = 0; k < d; ++k) {
        for (int l2 = k; l2 < d; ++l2) {
          for (int sign : {1, -1}) {
            if (l2 == k && sign < 0) continue;
            for (int c = 0; c < d; ++c) {
              int h = (c == k ? 1 : 0) + (l2 != k && c == l2 ? sign : 0);
              fwd[static_cast<std::size_t>(c)] = lat.index(static_cast<Eigen::Index>(i), c) + h;
              bwd[static_cast<std::size_t>(c)] = lat.index(static_cast<Eigen::Index>(i), c) - h;
            }
            const int a = lat.find(fwd.data(), d);
            const int b = lat.find(bwd.data(), d);
            if (a < 0 || b < 0) continue;
            if (norms[a] > r * (1.0 + 1e-12) || norms[b] > r * (1.0 + 1e-12)) continue;
            const double step2 = (l2 == k ? 1.0 : 2.0) * lat.spacing * lat.spacing;
            const double second = (at(static_cast<std::size_t>(a), other) - 2.0 * at(i, other) +
                                   at(static_cast<std::size_t>(b), other)) /
                                  step2;
            worst = std::min(worst, second);
          }
        }
      }
    }
    return worst;
  };

  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < s2.size(); ++j)
    worst = std::min(worst, scan(s1, j, [&](std::size_t x, std::size_t y) { return l(x, y); }));
  for (std::size_t i = 0; i < s1.size(); ++i)
    worst = std::min(worst, scan(s2, i, [&](std::size_t y, std::size_t x) { return l(x, y); }));
  if (!std::isfinite(worst)) {
    est.reason = "no interior lattice triples inside B_r";
    return est;
  }
  est.satisfied = true;
  est.C_r = std::max(0.0, -0.5 * worst);
  return est;
}

std::vector<double> run_supnorm_convergence(const PerturbationFamily& fam, double r_prime, SolveOptions options) {
  if (!(r_prime > 0.0)) throw InvalidArgument("supnorm convergence: r' must be positive");
  const SolveOptions opt = with_exhaustion(std::move(options), Exhaustion::kCompact);
  const SchroedingerSolution base = solve(fam.base_q, fam.base_mu1, fam.base_mu2, opt);
  std::vector<double> out;
  for (const FamilyMember& mem : fam.members) {
    const SchroedingerSolution sol = solve(mem.q, mem.mu1, mem.mu2, opt);
    out.push_back(sup_gap_in_ball(sol.u1, base.u1, *sol.mu1.support, r_prime) +
                  sup_gap_in_ball(sol.u2, base.u2, *sol.mu2.support, r_prime));
  }
  return out;
}

}  // namespace sfe
