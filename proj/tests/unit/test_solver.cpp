#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "sfe/error.hpp"
#include "sfe/solver.hpp"

using namespace sfe;
using sfe::testing::measure;

namespace {

RowMat q22() {
  RowMat q(2, 2);
  q << 2, 1, 1, 2;
  return q;
}

// Plain alternating fixed point written out with scalar loops, then scaled
// so that both factors carry the same total mass (K_1 is the whole support
// on these two-point instances).
std::pair<std::vector<double>, std::vector<double>> plain_oracle(const RowMat& q, const Vec& mu1, const Vec& mu2,
                                                                 int iterations) {
  const auto n1 = q.rows(), n2 = q.cols();
  std::vector<double> a(n1, 1.0), b(n2, 1.0);
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index i = 0; i < n1; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < n2; ++j) s += q(i, j) * b[j];
      a[i] = mu1[i] / s;
    }
    for (Eigen::Index j = 0; j < n2; ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n1; ++i) s += q(i, j) * a[i];
      b[j] = mu2[j] / s;
    }
  }
  double ma = 0.0, mb = 0.0;
  for (double x : a) ma += x;
  for (double x : b) mb += x;
  const double c = std::sqrt(mb / ma);
  for (double& x : a) x *= c;
  for (double& x : b) x /= c;
  return {a, b};
}

struct Instance {
  SupportPtr s1, s2;
  KernelSpec q;
  DiscreteMeasure mu1, mu2;
};

Instance gaussian_instance(int n, double eps, double var1 = 0.25, double var2 = 0.5) {
  auto g = make_grid(1, 3.0, n);
  return {g, g, KernelSpec(GaussianHeat{1.0, eps}, g, g), testing::gaussian_density(g, 0.0, var1).to_measure(),
          testing::gaussian_density(g, 0.3, var2).to_measure()};
}

Instance random_instance(std::mt19937_64& rng, int n1, int n2) {
  auto s1 = make_grid(1, 2.0, n1);
  auto s2 = make_grid(1, 2.0, n2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RowMat lq(n1, n2);
  for (auto& v : lq.reshaped()) v = u(rng);
  return {s1, s2, KernelSpec(DenseMatrix::from_log_values(lq), s1, s2),
          DiscreteMeasure(s1, testing::random_weights(rng, n1, 0.01)),
          DiscreteMeasure(s2, testing::random_weights(rng, n2, 0.01))};
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("symmetric 2x2 system") {
    auto s = make_grid(1, 1.0, 2);
    auto mu = measure(s, {0.5, 0.5});
    auto sol = solve(testing::dense(s, s, q22()), mu, mu);
    REQUIRE(sol.converged);
    Vec half(2);
    half << 0.5, 0.5;
    const auto [a, b] = plain_oracle(q22(), half, half, 10000);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(sol.nu1.weights[i] - a[i]) <= 1e-10);
      CHECK(std::abs(sol.nu2.weights[i] - b[i]) <= 1e-10);
      CHECK(std::abs(sol.nu1.weights[i] - 1.0 / std::sqrt(6.0)) <= 1e-10);
      CHECK(sol.u1[i] == doctest::Approx(0.20273255405408228).epsilon(1e-10));
      CHECK(sol.u2[i] == doctest::Approx(0.20273255405408228).epsilon(1e-10));
    }
    const RowMat p = plan(sol);
    CHECK(p(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
    CHECK(p(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
    CHECK(p(0, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
    CHECK(p(1, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
    CHECK(sol.m_index == 1);
    CHECK(sol.final_residual <= 1e-10);
  }

  TEST_CASE("asymmetric 2x2 system against the oracle and goldens") {
    auto s = make_grid(1, 1.0, 2);
    auto mu1 = measure(s, {0.5, 0.5});
    auto mu2 = measure(s, {0.75, 0.25});
    SolveOptions opt;
    opt.tol = 1e-13;
    auto sol = solve(testing::dense(s, s, q22()), mu1, mu2, opt);
    REQUIRE(sol.converged);
    CHECK(sol.final_residual <= 1e-12);
    const auto [a, b] = plain_oracle(q22(), mu1.weights, mu2.weights, 10000);
    const double nu1[] = {0.33985302415522, 0.4904080729631687};
    const double nu2[] = {0.6409631217711174, 0.18929797534727136};
    const double u1[] = {0.3860948561691507, 0.01937025193901375};
    const double u2[] = {0.15710128360308515, 0.27813855517552716};
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(sol.nu1.weights[i] - a[i]) <= 1e-12);
      CHECK(std::abs(sol.nu2.weights[i] - b[i]) <= 1e-12);
      CHECK(sol.nu1.weights[i] == doctest::Approx(nu1[i]).epsilon(1e-12));
      CHECK(sol.nu2.weights[i] == doctest::Approx(nu2[i]).epsilon(1e-12));
      CHECK(sol.u1[i] == doctest::Approx(u1[i]).epsilon(1e-12));
      CHECK(sol.u2[i] == doctest::Approx(u2[i]).epsilon(1e-12));
    }
    const RowMat p = plan(sol);
    CHECK(p(0, 0) == doctest::Approx(0.43566651061176953).epsilon(1e-12));
    CHECK(p(0, 1) == doctest::Approx(0.06433348938823046).epsilon(1e-12));
    CHECK(p(1, 0) == doctest::Approx(0.31433348938823047).epsilon(1e-12));
    CHECK(p(1, 1) == doctest::Approx(0.18566651061176953).epsilon(1e-12));
  }

  TEST_CASE("constant kernel gives the product measure") {
    auto s = make_grid(1, 1.0, 5);
    std::mt19937_64 rng(4);
    DiscreteMeasure mu1(s, testing::random_weights(rng, 5));
    DiscreteMeasure mu2(s, testing::random_weights(rng, 5));
    auto sol = solve(testing::dense(s, s, RowMat::Ones(5, 5)), mu1, mu2);
    CHECK((sol.nu1.weights - mu1.weights).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((sol.nu2.weights - mu2.weights).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(sol.u1.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(sol.u2.cwiseAbs().maxCoeff() <= 1e-14);
    const RowMat p = plan(sol);
    CHECK((p - mu1.weights * mu2.weights.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  }

  TEST_CASE("plan factorizations and marginals on a Gaussian grid") {
    auto inst = gaussian_instance(120, 0.5);
    auto sol = solve(inst.q, inst.mu1, inst.mu2);
    REQUIRE(sol.converged);
    const RowMat p = plan(sol);
    const RowMat pp = plan_from_potentials(sol);
    CHECK((p - pp).cwiseAbs().sum() <= 1e-10 * p.sum());
    const auto [d1, d2] = marginal_defects(p, inst.mu1.weights, inst.mu2.weights);
    CHECK(std::max(d1, d2) <= 1e-10);
    CHECK(sol.final_residual == std::max(d1, d2));
    // exp(u1) = sum_j q nu2 and exp(u2) = sum_i q nu1.
    const RowMat q = eval_kernel(inst.q).values;
    CHECK(((q * sol.nu2.weights).array().log() - sol.u1.array()).abs().maxCoeff() <= 1e-12);
    CHECK(((q.transpose() * sol.nu1.weights).array().log() - sol.u2.array()).abs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("normalization fixes nu1(K_m) = nu2(K_m)") {
    auto inst = gaussian_instance(90, 1.0);
    auto sol = solve(inst.q, inst.mu1, inst.mu2);
    const int m = sol.m_index;
    CHECK(m == 1);
    CHECK(DiscreteMeasure(inst.s1, sol.nu1.weights, false).mass_in_ball(m) ==
          doctest::Approx(DiscreteMeasure(inst.s2, sol.nu2.weights, false).mass_in_ball(m)).epsilon(1e-10));
    auto compact = renormalize(sol, Exhaustion::kCompact);
    CHECK(compact.nu1.mass() == doctest::Approx(compact.nu2.mass()).epsilon(1e-12));
    // Renormalizing twice changes nothing.
    auto again = renormalize(renormalize(sol, Exhaustion::kBalls), Exhaustion::kBalls);
    CHECK((again.nu1.weights - sol.nu1.weights).cwiseAbs().maxCoeff() <= 1e-14 * sol.nu1.weights.maxCoeff());
  }

  TEST_CASE("m_index skips balls with no mass") {
    RowMat p(3, 1);
    p << -2.5, 0.5, 2.5;
    auto s = std::make_shared<const Support>(p, Vec::Ones(3));
    CHECK(exhaustion_index(measure(s, {0.5, 0.0, 0.5}), measure(s, {0.2, 0.3, 0.5})) == 3);
    CHECK(exhaustion_index(measure(s, {0.0, 1.0, 0.0}), measure(s, {0.2, 0.3, 0.5})) == 1);
  }

  TEST_CASE("scale invariance of plan and potential sums") {
    auto inst = gaussian_instance(60, 0.7);
    auto sol = solve(inst.q, inst.mu1, inst.mu2);
    auto scaled = rescale(sol, 3.7);
    const RowMat p0 = plan(sol), p1 = plan(scaled);
    CHECK(((p0 - p1).cwiseAbs().array() / p0.array()).maxCoeff() <= 1e-13);
    for (int i = 0; i < 60; i += 7) {
      for (int j = 0; j < 60; j += 11) CHECK(sol.u1[i] + sol.u2[j] == doctest::Approx(scaled.u1[i] + scaled.u2[j]).epsilon(1e-13));
    }
    auto back = renormalize(scaled, Exhaustion::kBalls);
    CHECK((back.nu1.weights - sol.nu1.weights).cwiseAbs().maxCoeff() <= 1e-13 * sol.nu1.weights.maxCoeff());
  }

  TEST_CASE("swapping marginals transposes the plan") {
    std::mt19937_64 rng(21);
    auto inst = random_instance(rng, 7, 11);
    SolveOptions opt;
    opt.tol = 1e-13;
    auto sol = solve(inst.q, inst.mu1, inst.mu2, opt);
    auto swapped = solve(inst.q.transposed(), inst.mu2, inst.mu1, opt);
    CHECK((plan(sol) - plan(swapped).transpose()).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((sol.u1 - swapped.u2).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((sol.u2 - swapped.u1).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("log-domain and plain solvers agree") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
      auto inst = random_instance(rng, 9, 6);
      SolveOptions opt;
      opt.tol = 1e-13;
      auto a = solve(inst.q, inst.mu1, inst.mu2, opt);
      auto b = solve_plain(inst.q, inst.mu1, inst.mu2, opt);
      REQUIRE(b.converged);
      CHECK((a.nu1.weights - b.nu1.weights).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((a.u2 - b.u2).cwiseAbs().maxCoeff() <= 1e-8);
    }
    auto inst = gaussian_instance(80, 1.0);
    auto a = solve(inst.q, inst.mu1, inst.mu2);
    auto b = solve_plain(inst.q, inst.mu1, inst.mu2);
    CHECK((a.u1 - b.u1).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("marginal defect is non-increasing across sweeps") {
    for (double eps : {1.0, 0.1, 0.01}) {
      auto inst = gaussian_instance(150, eps);
      auto sol = solve(inst.q, inst.mu1, inst.mu2);
      REQUIRE(sol.converged);
      const auto& h = sol.residual_history;
      for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] <= h[k - 1] * (1.0 + 1e-12) + 1e-15);
    }
  }

  TEST_CASE("small eps stays finite through absorption") {
    auto inst = gaussian_instance(200, 1e-3);
    SolveOptions opt;
    opt.max_iters = 20000;
    auto sol = solve(inst.q, inst.mu1, inst.mu2, opt);
    CHECK(sol.converged);
    CHECK(sol.u1.allFinite());
    CHECK(sol.u2.allFinite());
    CHECK(sol.final_residual <= 1e-10);
  }

  TEST_CASE("zero-mass marginal points carry zero factor") {
    auto g = make_grid(1, 2.0, 20);
    Vec w1 = testing::gaussian_density(g, 0.0, 0.5).weights();
    w1.head(5).setZero();
    DiscreteMeasure mu1 = DiscreteMeasure::normalized(g, w1);
    DiscreteMeasure mu2 = testing::gaussian_density(g, 0.5, 0.3).to_measure();
    auto sol = solve(KernelSpec(GaussianHeat{1.0, 0.5}, g, g), mu1, mu2);
    CHECK(sol.converged);
    CHECK(sol.nu1.weights.head(5).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.u1.allFinite());
    CHECK(plan(sol).topRows(5).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("warm start reaches the same normalized solution") {
    auto inst = gaussian_instance(100, 0.2);
    auto cold = solve(inst.q, inst.mu1, inst.mu2);
    SolveOptions opt;
    opt.warm_start_b = cold.log_nu2;
    auto warm = solve(inst.q, inst.mu1, inst.mu2, opt);
    CHECK(warm.iterations < cold.iterations);
    CHECK((warm.u1 - cold.u1).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("iteration cap returns a flagged iterate") {
    auto inst = gaussian_instance(100, 0.05);
    SolveOptions opt;
    opt.max_iters = 3;
    auto sol = solve(inst.q, inst.mu1, inst.mu2, opt);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations == 3);
    CHECK(sol.final_residual > opt.tol);
  }

  TEST_CASE("input validation") {
    auto g = make_grid(1, 1.0, 4);
    auto h = make_grid(1, 1.0, 5);
    DiscreteMeasure m(g, Vec::Constant(4, 0.25));
    CHECK_THROWS_AS(solve(KernelSpec(GaussianHeat{1.0, 1.0}, h, g), m, m), InvalidArgument);
    DiscreteMeasure finite(g, Vec::Constant(4, 1.0), false);
    CHECK_THROWS_AS(solve(KernelSpec(GaussianHeat{1.0, 1.0}, g, g), finite, m), InvalidArgument);
  }

  TEST_CASE("truncated potentials") {
    auto s = make_grid(1, 1.0, 2);
    auto mu = measure(s, {0.5, 0.5});
    auto sol = solve(testing::dense(s, s, q22()), mu, mu);
    const auto [t1, t2] = truncated_potentials(sol, 1);
    CHECK(t1[0] == doctest::Approx(std::log(3.0 / std::sqrt(6.0))).epsilon(1e-10));
    CHECK((t1 - sol.u1).cwiseAbs().maxCoeff() == 0.0);

    auto inst = gaussian_instance(120, 0.5, 1.0, 1.5);
    auto g = solve(inst.q, inst.mu1, inst.mu2);
    const auto [f1, f2] = truncated_potentials(g, 3);
    CHECK((f1 - g.u1).cwiseAbs().maxCoeff() <= 1e-15);
    Vec prev1, prev2;
    for (int m = g.m_index; m <= 3; ++m) {
      const auto [a, b] = truncated_potentials(g, m);
      if (prev1.size()) {
        for (Eigen::Index i = 0; i < a.size(); ++i) {
          CHECK(a[i] >= prev1[i]);
          CHECK(b[i] >= prev2[i]);
        }
      }
      prev1 = a;
      prev2 = b;
    }
    CHECK_THROWS_AS(truncated_potentials(g, 0), InvalidArgument);
  }

  TEST_CASE("beurling bounds") {
    auto s = make_grid(1, 1.0, 2);
    auto mu = measure(s, {0.5, 0.5});
    auto rep = check_beurling_bounds(solve(testing::dense(s, s, q22()), mu, mu), 1.0);
    CHECK(rep.lower == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(rep.upper == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(rep.worst_slack > 0.0);

    auto g = make_grid(1, 1.0, 6);
    std::mt19937_64 rng(2);
    DiscreteMeasure a(g, testing::random_weights(rng, 6)), b(g, testing::random_weights(rng, 6));
    auto c = check_beurling_bounds(solve(testing::dense(g, g, RowMat::Constant(6, 6, 4.0)), a, b), 1.0);
    CHECK(c.lower == doctest::Approx(2.0));
    CHECK(c.upper == doctest::Approx(2.0));
    CHECK(c.worst_slack >= -1e-14);

    auto inst = gaussian_instance(100, 1.0);
    DiscreteMeasure uni(inst.s1, Vec::Constant(100, 0.01));
    auto gr = check_beurling_bounds(solve(inst.q, uni, uni), 3.0);
    CHECK(gr.worst_slack > 0.0);
    CHECK(gr.points_checked == 200);
  }

  TEST_CASE("beurling violation is reported") {
    auto s = make_grid(1, 1.0, 2);
    auto mu = measure(s, {0.5, 0.5});
    auto sol = solve(testing::dense(s, s, q22()), mu, mu);
    sol.u1[1] += 2.0;  // corrupt the potential
    // renormalize recomputes potentials, so corrupt the factor instead.
    sol.log_nu2[0] += 3.0;
    sol.nu2.weights[0] = std::exp(sol.log_nu2[0]);
    CHECK_THROWS_AS(check_beurling_bounds(sol, 1.0), BoundViolation);
  }

  TEST_CASE("product identity") {
    auto s = make_grid(1, 1.0, 2);
    auto mu = measure(s, {0.5, 0.5});
    auto sol = solve(testing::dense(s, s, q22()), mu, mu);
    auto rep = check_product_identity(sol, 1, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    CHECK(rep.max_rel_error <= 1e-12);

    auto g = make_grid(1, 1.0, 4);
    DiscreteMeasure uni(g, Vec::Constant(4, 0.25));
    auto one = solve(testing::dense(g, g, RowMat::Ones(4, 4)), uni, uni);
    auto r1 = check_product_identity(one, 1, {{0, 3}, {2, 1}});
    CHECK(r1.rows[0].lhs == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r1.rows[0].rhs == doctest::Approx(1.0).epsilon(1e-14));

    auto inst = gaussian_instance(80, 0.8);
    auto gs = solve(inst.q, inst.mu1, inst.mu2);
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> pick(0, 79);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (int k = 0; k < 20; ++k) pairs.emplace_back(pick(rng), pick(rng));
    for (int m = 1; m <= 3; ++m) CHECK(check_product_identity(gs, m, pairs).max_rel_error <= 1e-8);
  }

  TEST_CASE("level bounds") {
    auto s = make_grid(1, 1.0, 2);
    auto mu = measure(s, {0.5, 0.5});
    auto rep = check_level_bounds(solve(testing::dense(s, s, q22()), mu, mu), 1);
    CHECK(rep.lower == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.middle == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
    CHECK(rep.upper == doctest::Approx(1.0).epsilon(1e-12));

    auto g = make_grid(1, 1.0, 4);
    DiscreteMeasure uni(g, Vec::Constant(4, 0.25));
    auto r1 = check_level_bounds(solve(testing::dense(g, g, RowMat::Ones(4, 4)), uni, uni), 1);
    CHECK(r1.lower == doctest::Approx(1.0));
    CHECK(r1.middle == doctest::Approx(1.0));
    CHECK(r1.upper == doctest::Approx(1.0));

    auto inst = gaussian_instance(90, 0.6);
    auto gs = solve(inst.q, inst.mu1, inst.mu2);
    for (int m = 1; m <= 3; ++m) {
      auto r = check_level_bounds(gs, m);
      CHECK(r.lower < r.middle);
      CHECK(r.middle < r.upper);
    }
  }

  TEST_CASE("plan measure lives on the product support") {
    auto inst = gaussian_instance(20, 1.0);
    auto sol = solve(inst.q, inst.mu1, inst.mu2);
    auto prod = product_support(*inst.s1, *inst.s2);
    auto pm = plan_measure(sol, prod);
    CHECK(prod->dim() == 2);
    CHECK(pm.weights[3] == doctest::Approx(plan(sol)(0, 3)).epsilon(1e-10));
  }
}
