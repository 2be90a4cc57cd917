#include "sfe/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sfe/error.hpp"
#include "sfe/kernels.hpp"

namespace sfe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Scalings are folded back into the stabilized kernel once they leave this
// range in log scale.
constexpr double kAbsorbAt = 30.0;

std::vector<Eigen::Index> active(const Vec& w) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) idx.push_back(i);
  }
  return idx;
}

RowMat restrict(const RowMat& m, const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols) {
  RowMat out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  }
  return out;
}

Vec gather(const Vec& v, const std::vector<Eigen::Index>& idx) {
  Vec out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

Vec scatter(const Vec& v, const std::vector<Eigen::Index>& idx, Eigen::Index n) {
  Vec out = Vec::Constant(n, kNegInf);
  for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = v[i];
  return out;
}

double l1_defect(const Vec& got, const Vec& want) { return (got - want).cwiseAbs().sum(); }

void check_inputs(const KernelSpec& q, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2) {
  if (!mu1.is_probability || !mu2.is_probability) throw InvalidArgument("solve: marginals must be probability measures");
  if (mu1.support != q.source() || mu2.support != q.target())
    throw InvalidArgument("solve: marginal supports must be the kernel's source and target supports");
}

// Log mass of nu over K_m for the chosen exhaustion.
double log_mass_in(const Vec& log_nu, const Support& s, Exhaustion ex, int m) {
  Vec terms = log_nu;
  if (ex == Exhaustion::kBalls) {
    const Vec norms = s.norms();
    for (Eigen::Index i = 0; i < terms.size(); ++i) {
      if (norms[i] > m) terms[i] = kNegInf;
    }
  }
  return kernels::logsumexp(terms);
}

// Fills nu, u, m_index and scale_C from raw log factors.
void finish(SchroedingerSolution& sol, Vec a, Vec b) {
  sol.m_index = sol.exhaustion == Exhaustion::kBalls ? exhaustion_index(sol.mu1, sol.mu2) : 1;
  const double l1 = log_mass_in(a, *sol.mu1.support, sol.exhaustion, sol.m_index);
  const double l2 = log_mass_in(b, *sol.mu2.support, sol.exhaustion, sol.m_index);
  const double log_c = 0.5 * (l2 - l1);
  sol.scale_C = std::exp(log_c);
  a.array() += log_c;
  b.array() -= log_c;
  sol.log_nu1 = a;
  sol.log_nu2 = b;
  sol.nu1.weights = a.unaryExpr([](double x) { return std::exp(x); });
  sol.nu2.weights = b.unaryExpr([](double x) { return std::exp(x); });
  kernels::parallel::row_logsumexp(*sol.log_q, b, sol.u1);
  const RowMat lt = sol.log_q->transpose();
  kernels::parallel::row_logsumexp(lt, a, sol.u2);
  const RowMat p = plan(sol);
  const auto [d1, d2] = marginal_defects(p, sol.mu1.weights, sol.mu2.weights);
  sol.final_residual = std::max(d1, d2);
}

SchroedingerSolution blank(const KernelSpec& q, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                           std::shared_ptr<const RowMat> log_q, Exhaustion ex) {
  return SchroedingerSolution{q,
                              std::move(log_q),
                              mu1,
                              mu2,
                              DiscreteMeasure(mu1.support, Vec::Zero(mu1.size()), false),
                              DiscreteMeasure(mu2.support, Vec::Zero(mu2.size()), false),
                              Vec(),
                              Vec(),
                              Vec(),
                              Vec(),
                              1,
                              1.0,
                              ex,
                              0,
                              0.0,
                              false,
                              {}};
}

}  // namespace

int exhaustion_index(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2) {
  const double reach = std::max(mu1.support->norms().maxCoeff(), mu2.support->norms().maxCoeff());
  const int last = static_cast<int>(std::ceil(reach)) + 1;
  for (int m = 1; m <= last; ++m) {
    if (mu1.mass_in_ball(m) * mu2.mass_in_ball(m) > 0.0) return m;
  }
  throw InvalidArgument("exhaustion index: a marginal has zero mass");
}

std::pair<double, double> marginal_defects(const RowMat& p, const Vec& mu1, const Vec& mu2) {
  return {l1_defect(p.rowwise().sum(), mu1), l1_defect(p.colwise().sum().transpose(), mu2)};
}

// Sinkhorn in log scale with absorption: the exact log factors are
// a = alpha + log u and b = beta + log v, where the multiplicative scalings
// u, v act on kt = exp(L + alpha + beta). Matvecs replace logsumexp calls
// until u or v drift far from one, at which point they are absorbed into
// alpha, beta and kt is rebuilt.
SchroedingerSolution solve(const KernelSpec& q, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                           SolveOptions options) {
  check_inputs(q, mu1, mu2);
  if (!(options.tol > 0.0) || options.max_iters < 1) throw InvalidArgument("solve: need tol > 0 and max_iters >= 1");
  auto log_q = std::make_shared<const RowMat>(log_kernel_matrix(q));
  SchroedingerSolution sol = blank(q, mu1, mu2, log_q, options.exhaustion);

  const auto i1 = active(mu1.weights);
  const auto i2 = active(mu2.weights);
  const RowMat l = restrict(*log_q, i1, i2);
  const RowMat lt = l.transpose();
  const Vec m1 = gather(mu1.weights, i1);
  const Vec m2 = gather(mu2.weights, i2);
  const Vec log_m1 = m1.array().log();
  const Vec log_m2 = m2.array().log();

  Vec b = Vec::Zero(i2.size());
  if (options.warm_start_b) {
    if (options.warm_start_b->size() != static_cast<Eigen::Index>(mu2.size()))
      throw InvalidArgument("solve: warm start has the wrong length");
    b = gather(*options.warm_start_b, i2);
    if (!b.allFinite()) b.setZero();
  }

  // Exact half-steps, then absorb so that kt holds the current plan.
  Vec lse;
  kernels::parallel::row_logsumexp(l, b, lse);
  Vec a = log_m1 - lse;
  kernels::parallel::row_logsumexp(lt, a, lse);
  b = log_m2 - lse;

  Vec alpha = a, beta = b;
  Vec u = Vec::Ones(a.size()), v = Vec::Ones(b.size());
  RowMat kt, ktt;
  auto rebuild = [&] {
    kernels::parallel::scaled_exp(l, alpha, beta, kt);
    ktt = kt.transpose();
  };
  rebuild();

  Vec kv, ktu;
  // Exact sweep from the current b; used when a stabilized product leaves
  // the positive normal range.
  auto resync = [&] {
    kernels::parallel::row_logsumexp(l, beta + Vec(v.array().log()), lse);
    alpha = log_m1 - lse;
    kernels::parallel::row_logsumexp(lt, alpha, lse);
    beta = log_m2 - lse;
    u.setOnes();
    v.setOnes();
    rebuild();
    kernels::parallel::matvec(ktt, u, ktu);
  };
  auto healthy = [](const Vec& x) { return x.allFinite() && (x.array() > 0.0).all(); };

  kernels::parallel::matvec(ktt, u, ktu);
  int it = 0;
  for (; it < options.max_iters; ++it) {
    kernels::parallel::matvec(kt, v, kv);
    if (!healthy(kv)) {
      resync();
      kernels::parallel::matvec(kt, v, kv);
    }
    const double defect = std::max(l1_defect(u.cwiseProduct(kv), m1), l1_defect(v.cwiseProduct(ktu), m2));
    sol.residual_history.push_back(defect);
    if (defect <= options.tol) break;

    u = m1.cwiseQuotient(kv);
    kernels::parallel::matvec(ktt, u, ktu);
    if (!healthy(ktu)) {
      resync();
      continue;
    }
    v = m2.cwiseQuotient(ktu);

    const double drift = std::max(u.array().log().abs().maxCoeff(), v.array().log().abs().maxCoeff());
    if (drift > kAbsorbAt) {
      alpha += Vec(u.array().log());
      beta += Vec(v.array().log());
      u.setOnes();
      v.setOnes();
      rebuild();
      kernels::parallel::matvec(ktt, u, ktu);
    }
  }
  sol.iterations = it;
  sol.converged = it < options.max_iters;

  a = alpha + Vec(u.array().log());
  b = beta + Vec(v.array().log());
  finish(sol, scatter(a, i1, mu1.weights.size()), scatter(b, i2, mu2.weights.size()));
  return sol;
}

SchroedingerSolution solve_plain(const KernelSpec& q, const DiscreteMeasure& mu1, const DiscreteMeasure& mu2,
                                 SolveOptions options) {
  check_inputs(q, mu1, mu2);
  auto log_q = std::make_shared<const RowMat>(log_kernel_matrix(q));
  SchroedingerSolution sol = blank(q, mu1, mu2, log_q, options.exhaustion);
  const KernelMatrix km = eval_kernel(q);
  if (km.log_domain) throw InvalidArgument("solve_plain: kernel underflows; use the log-domain solver");
  const RowMat& k = km.values;
  const RowMat kt = k.transpose();

  Vec nu1 = mu1.weights;
  Vec nu2 = Vec::Ones(mu2.size());
  if (options.warm_start_b) nu2 = options.warm_start_b->array().exp();
  Vec kv, ktu;
  int it = 0;
  for (; it < options.max_iters; ++it) {
    kernels::serial::matvec(k, nu2, kv);
    kernels::serial::matvec(kt, nu1, ktu);
    const double defect =
        std::max(l1_defect(nu1.cwiseProduct(kv), mu1.weights), l1_defect(nu2.cwiseProduct(ktu), mu2.weights));
    sol.residual_history.push_back(defect);
    if (defect <= options.tol && it > 0) break;
    nu1 = mu1.weights.cwiseQuotient(kv);
    kernels::serial::matvec(kt, nu1, ktu);
    nu2 = mu2.weights.cwiseQuotient(ktu);
  }
  sol.iterations = it;
  sol.converged = it < options.max_iters;
  // Zero-mass points get zero factor, matching the log-domain solver.
  finish(sol, nu1.array().log(), nu2.array().log());
  return sol;
}

SchroedingerSolution renormalize(const SchroedingerSolution& sol, Exhaustion exhaustion) {
  SchroedingerSolution out = sol;
  out.exhaustion = exhaustion;
  finish(out, sol.log_nu1, sol.log_nu2);
  out.scale_C = sol.scale_C * out.scale_C;
  return out;
}

SchroedingerSolution rescale(const SchroedingerSolution& sol, double c) {
  if (!(c > 0.0)) throw InvalidArgument("rescale: factor must be positive");
  SchroedingerSolution out = sol;
  const double lc = std::log(c);
  out.log_nu1.array() += lc;
  out.log_nu2.array() -= lc;
  out.nu1.weights *= c;
  out.nu2.weights /= c;
  out.u1.array() -= lc;
  out.u2.array() += lc;
  out.scale_C *= c;
  return out;
}

RowMat plan(const SchroedingerSolution& sol) {
  RowMat p;
  kernels::parallel::scaled_exp(*sol.log_q, sol.log_nu1, sol.log_nu2, p);
  return p;
}

RowMat plan_from_potentials(const SchroedingerSolution& sol) {
  const Vec a = sol.mu1.weights.array().log() - sol.u1.array();
  const Vec b = sol.mu2.weights.array().log() - sol.u2.array();
  RowMat p;
  kernels::parallel::scaled_exp(*sol.log_q, a, b, p);
  return p;
}

SupportPtr product_support(const Support& a, const Support& b) {
  const auto n = static_cast<Eigen::Index>(a.size() * b.size());
  RowMat pts(n, a.dim() + b.dim());
  Vec vol(n);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(i * b.size() + j);
      pts.row(r) << a.point(i), b.point(j);
      vol[r] = a.cell_volumes()[i] * b.cell_volumes()[j];
    }
  }
  const double radius = std::hypot(a.bounding_radius(), b.bounding_radius());
  return std::make_shared<const Support>(std::move(pts), std::move(vol), radius);
}

DiscreteMeasure plan_measure(const SchroedingerSolution& sol, const SupportPtr& product) {
  const RowMat p = plan(sol);
  if (static_cast<Eigen::Index>(product->size()) != p.size()) throw InvalidArgument("plan_measure: product support size mismatch");
  const Vec flat = Eigen::Map<const Vec>(p.data(), p.size());
  return DiscreteMeasure::normalized(product, flat);
}

double hat(double norm, int m) { return std::clamp(m + 1.0 - norm, 0.0, 1.0); }

namespace {

Vec log_hat(const Support& s, int m) {
  const Vec norms = s.norms();
  Vec out(norms.size());
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    const double h = hat(norms[i], m);
    out[i] = h > 0.0 ? std::log(h) : kNegInf;
  }
  return out;
}

}  // namespace

std::pair<Vec, Vec> truncated_potentials(const SchroedingerSolution& sol, int m) {
  if (m < sol.m_index) throw InvalidArgument("truncation below m_index");
  const Vec b = sol.log_nu2 + log_hat(*sol.mu2.support, m);
  const Vec a = sol.log_nu1 + log_hat(*sol.mu1.support, m);
  if (kernels::logsumexp(a) == kNegInf || kernels::logsumexp(b) == kNegInf)
    throw InvalidArgument("truncation below m_index");
  Vec u1, u2;
  kernels::parallel::row_logsumexp(*sol.log_q, b, u1);
  const RowMat lt = sol.log_q->transpose();
  kernels::parallel::row_logsumexp(lt, a, u2);
  return {u1, u2};
}

namespace {

Vec heat_potential_at(const SchroedingerSolution& sol, const RowMat& points, const Support& other, const Vec& log_nu) {
  const auto* g = sol.kernel.gaussian();
  if (!g) throw InvalidArgument("potential at arbitrary points needs a heat kernel");
  if (points.cols() != other.dim()) throw InvalidArgument("potential: point dimension mismatch");
  const int d = other.dim();
  RowMat l;
  kernels::parallel::gaussian_log_kernel(points, other.points(), g->eps * g->t,
                                         -0.5 * d * std::log(2.0 * std::numbers::pi * g->eps * g->t), l);
  Vec out;
  kernels::parallel::row_logsumexp(l, log_nu, out);
  return out;
}

}  // namespace

Vec potential_u1_at(const SchroedingerSolution& sol, const RowMat& points) {
  return heat_potential_at(sol, points, *sol.mu2.support, sol.log_nu2);
}

Vec potential_u2_at(const SchroedingerSolution& sol, const RowMat& points) {
  return heat_potential_at(sol, points, *sol.mu1.support, sol.log_nu1);
}

BeurlingReport check_beurling_bounds(const SchroedingerSolution& sol, double r) {
  if (!(r > 0.0)) throw InvalidArgument("beurling: r must be positive");
  const SchroedingerSolution s = renormalize(sol, Exhaustion::kCompact);
  const Vec n1 = s.mu1.support->norms();
  const Vec n2 = s.mu2.support->norms();
  const double slack_r = r * (1.0 + 1e-12);
  if (n1.maxCoeff() > slack_r || n2.maxCoeff() > slack_r) throw InvalidArgument("beurling: support leaves B_r");

  BeurlingReport rep;
  rep.q_min = s.log_q->minCoeff();
  rep.q_max = s.log_q->maxCoeff();
  // Work in logs: log lower = log m - log M / 2, log upper = log M - log m / 2.
  const double log_lower = rep.q_min - 0.5 * rep.q_max;
  const double log_upper = rep.q_max - 0.5 * rep.q_min;
  rep.q_min = std::exp(rep.q_min);
  rep.q_max = std::exp(rep.q_max);
  rep.lower = std::exp(log_lower);
  rep.upper = std::exp(log_upper);
  rep.worst_slack = std::numeric_limits<double>::infinity();
  constexpr double kRound = 1e-12;
  auto scan = [&](const Vec& u, const char* name) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double slack = std::min(u[i] - log_lower, log_upper - u[i]);
      rep.worst_slack = std::min(rep.worst_slack, slack);
      ++rep.points_checked;
      if (slack < -kRound)
        throw BoundViolation(std::string("beurling: exp(") + name + ") at point " + std::to_string(i) + " is " +
                             std::to_string(std::exp(u[i])) + ", outside [" + std::to_string(rep.lower) + ", " +
                             std::to_string(rep.upper) + "]");
    }
  };
  scan(s.u1, "u1");
  scan(s.u2, "u2");
  return rep;
}

ProductIdentityReport check_product_identity(const SchroedingerSolution& sol, int m,
                                             const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                             double rel_tol) {
  const auto [u1m, u2m] = truncated_potentials(sol, m);
  const RowMat& l = *sol.log_q;
  const Vec h1 = log_hat(*sol.mu1.support, m);
  const Vec h2 = log_hat(*sol.mu2.support, m);
  const RowMat p = plan(sol);
  const auto n1 = l.rows(), n2 = l.cols();

  // log of phi(x) phi(y) plan(x, y), shared by every pair.
  RowMat base(n1, n2);
  for (Eigen::Index x = 0; x < n1; ++x) {
    for (Eigen::Index y = 0; y < n2; ++y) base(x, y) = p(x, y) > 0.0 ? h1[x] + h2[y] + std::log(p(x, y)) : kNegInf;
  }
  Vec flat = Eigen::Map<const Vec>(base.data(), base.size());
  const double log_mass_terms = kernels::logsumexp(flat);

  ProductIdentityReport rep;
  for (const auto& [i, k] : pairs) {
    if (i >= static_cast<std::size_t>(n1) || k >= static_cast<std::size_t>(n2))
      throw InvalidArgument("product identity: pair index out of range");
    double lo = std::numeric_limits<double>::infinity(), hi = kNegInf;
    for (Eigen::Index x = 0; x < n1; ++x) {
      for (Eigen::Index y = 0; y < n2; ++y) {
        const double ratio = l(i, y) + l(x, k) - l(x, y);
        flat[x * n2 + y] = base(x, y) + ratio;
        if (base(x, y) > kNegInf) {
          lo = std::min(lo, ratio);
          hi = std::max(hi, ratio);
        }
      }
    }
    ProductIdentityRow row;
    row.i = i;
    row.k = k;
    row.lhs = std::exp(u1m[i] + u2m[k]);
    row.rhs = std::exp(kernels::logsumexp(flat));
    row.rel_error = std::abs(row.lhs - row.rhs) / std::abs(row.rhs);
    row.lower = std::exp(lo + log_mass_terms);
    row.upper = std::exp(hi + log_mass_terms);
    const std::string where = "(" + std::to_string(i) + ", " + std::to_string(k) + ")";
    if (!(row.rel_error <= rel_tol))
      throw BoundViolation("product identity: relative error " + std::to_string(row.rel_error) + " at pair " + where);
    if (row.lhs < row.lower * (1.0 - 1e-10) || row.lhs > row.upper * (1.0 + 1e-10))
      throw BoundViolation("product identity: sandwich bound fails at pair " + where);
    rep.max_rel_error = std::max(rep.max_rel_error, row.rel_error);
    rep.rows.push_back(row);
  }
  return rep;
}

LevelReport check_level_bounds(const SchroedingerSolution& sol, int m) {
  const RowMat& l = *sol.log_q;
  const Vec n1 = sol.mu1.support->norms();
  const Vec n2 = sol.mu2.support->norms();
  const RowMat p = plan(sol);
  double log_q_max_k = kNegInf, log_q_min_phi = std::numeric_limits<double>::infinity();
  double plan_k = 0.0;
  for (Eigen::Index x = 0; x < l.rows(); ++x) {
    for (Eigen::Index y = 0; y < l.cols(); ++y) {
      if (n1[x] <= m && n2[y] <= m) {
        log_q_max_k = std::max(log_q_max_k, l(x, y));
        plan_k += p(x, y);
      }
      if (hat(n1[x], m) > 0.0 && hat(n2[y], m) > 0.0) log_q_min_phi = std::min(log_q_min_phi, l(x, y));
    }
  }
  if (log_q_max_k == kNegInf) throw InvalidArgument("level bounds: K_m is empty");
  double mass1 = 0.0, mass2 = 0.0;
  for (Eigen::Index x = 0; x < n1.size(); ++x) mass1 += hat(n1[x], m) * sol.nu1.weights[x];
  for (Eigen::Index y = 0; y < n2.size(); ++y) mass2 += hat(n2[y], m) * sol.nu2.weights[y];
  LevelReport rep{std::exp(-log_q_max_k) * plan_k, mass1 * mass2, std::exp(-log_q_min_phi)};
  constexpr double kRound = 1e-12;
  if (rep.middle < rep.lower * (1.0 - kRound) || rep.middle > rep.upper * (1.0 + kRound))
    throw BoundViolation("level bounds: " + std::to_string(rep.lower) + " <= " + std::to_string(rep.middle) +
                         " <= " + std::to_string(rep.upper) + " fails at m = " + std::to_string(m));
  return rep;
}

}  // namespace sfe
