#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sfe/error.hpp"
#include "sfe/functionals.hpp"
#include "sfe/moment.hpp"

using namespace sfe;

namespace {

Vec evaluate(const Support& s, double (*f)(const Eigen::RowVectorXd&)) {
  Vec out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[static_cast<Eigen::Index>(i)] = f(s.point(i));
  return out;
}

// Index of the mirror point -x on a symmetric lattice.
Eigen::Index mirror(const Support& s, std::size_t i) {
  const Lattice& lat = *s.lattice();
  std::vector<int> multi(static_cast<std::size_t>(s.dim()));
  for (int k = 0; k < s.dim(); ++k) multi[k] = lat.points_per_axis - 1 - lat.index(static_cast<Eigen::Index>(i), k);
  return lat.find(multi.data(), s.dim());
}

double asymmetry(const Density& p) {
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    worst = std::max(worst, std::abs(p.values[static_cast<Eigen::Index>(i)] - p.values[mirror(*p.support, i)]));
  return worst;
}

}  // namespace

TEST_SUITE("moment") {
  TEST_CASE("convexity of quadratic, norm and concave functions") {
    auto g1 = make_grid(1, 2.0, 21);
    auto g2 = make_grid(2, 2.0, 16);
    auto sq = [](const Eigen::RowVectorXd& x) { return 0.5 * x.squaredNorm(); };
    auto nrm = [](const Eigen::RowVectorXd& x) { return x.norm(); };
    auto cave = [](const Eigen::RowVectorXd& x) { return -0.5 * x.squaredNorm(); };
    CHECK(check_convexity(evaluate(*g1, sq), *g1) == 0.0);
    CHECK(check_convexity(evaluate(*g2, sq), *g2) == 0.0);
    CHECK(check_convexity(evaluate(*g1, nrm), *g1) == 0.0);
    CHECK(check_convexity(evaluate(*g2, nrm), *g2) <= 1e-15);
    // For -|x|^2/2 the midpoint defect is |h|^2/2, largest on the diagonals.
    const double h = g2->lattice()->spacing;
    CHECK(check_convexity(evaluate(*g2, cave), *g2) == doctest::Approx(h * h).epsilon(1e-10));
    CHECK_THROWS_AS(check_convexity(Vec::Zero(2), *testing::points_1d({0.0, 1.0})), InvalidArgument);
  }

  TEST_CASE("restricting a grid to a smaller ball keeps the lattice") {
    auto g = make_grid(2, 3.0, 12);
    auto inner = restrict_to_ball(g, 2.0);
    REQUIRE(inner->lattice());
    CHECK(inner->size() < g->size());
    CHECK(inner->norms().maxCoeff() <= 2.0);
    const Lattice& lat = *inner->lattice();
    for (std::size_t i = 0; i < inner->size(); ++i) {
      const auto row = lat.index.row(static_cast<Eigen::Index>(i));
      CHECK(lat.find(row.data(), 2) == static_cast<int>(i));
      for (int k = 0; k < 2; ++k) CHECK(inner->point(i)[k] == doctest::Approx(lat.origin + row[k] * lat.spacing));
    }
    CHECK(restrict_to_ball(g, 3.0) == g);
  }

  TEST_CASE("lattice gradient") {
    auto g = make_grid(1, 1.0, 20);
    const Vec u = evaluate(*g, [](const Eigen::RowVectorXd& x) { return x[0] * x[0]; });
    const RowMat du = lattice_gradient(u, *g);
    const double h = g->lattice()->spacing;
    for (std::size_t i = 1; i + 1 < g->size(); ++i) CHECK(du(i, 0) == doctest::Approx(2.0 * g->point(i)[0]));
    // One-sided stencils are off by h for x^2.
    CHECK(du(0, 0) == doctest::Approx(2.0 * g->point(0)[0] + h));
    Vec bad = u;
    bad[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(lattice_gradient(bad, *g), InvalidArgument);
  }

  TEST_CASE("identity pushforward shrinks with the grid") {
    double previous = 1.0;
    for (int n : {41, 81, 161}) {
      auto g = make_grid(1, 4.0, n);
      const Density P1 = testing::gaussian_density(g, 0.0, 1.0);
      const Vec u = evaluate(*g, [](const Eigen::RowVectorXd& x) {
        return 0.5 * x.squaredNorm() + 0.5 * std::log(2.0 * std::numbers::pi);
      });
      const PushforwardReport rep = verify_moment_measure(u, g, P1);
      MESSAGE("n = " << n << " pushforward BL = " << rep.pushforward_error);
      CHECK(rep.pushforward_error < previous);
      // The coupling (x, Du(x)) is close to the identity, so its cost is
      // close to the optimal one.
      CHECK(std::abs(rep.w2_check) <= 0.05 * g->lattice()->spacing);
      previous = rep.pushforward_error;
    }
    CHECK(previous <= 0.01);
  }

  TEST_CASE("shifted quadratic pushforward barycenter") {
    auto g = make_grid(2, 3.0, 30);
    const double c0 = 0.3, c1 = -0.2;
    Vec u(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) {
      const double a = g->point(i)[0] - c0, b = g->point(i)[1] - c1;
      u[static_cast<Eigen::Index>(i)] = 0.5 * (a * a + b * b);
    }
    auto P1 = Density::normalized(g, (-u).array().exp().matrix());
    const PushforwardReport rep = verify_moment_measure(u, g, P1);
    // Quadrature of the exact gradient x - c against e^{-u} away from the
    // one-sided boundary stencils, where e^{-u} is below 1e-3.
    double w = 0.0, m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      const double e = std::exp(-u[static_cast<Eigen::Index>(i)]) * g->cell_volumes()[static_cast<Eigen::Index>(i)];
      w += e;
      m0 += e * (g->point(i)[0] - c0);
      m1 += e * (g->point(i)[1] - c1);
    }
    CHECK(rep.barycenter[0] == doctest::Approx(m0 / w).epsilon(1e-3).scale(1.0));
    CHECK(rep.barycenter[1] == doctest::Approx(m1 / w).epsilon(1e-3).scale(1.0));
    CHECK(rep.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("fixed point step produces a probability density on the ball") {
    auto g = make_grid(1, 4.0, 201);
    const Density P1 = testing::gaussian_density(g, 0.0, 1.0);
    const Density p = Density::normalized(g, Vec::Ones(g->size()));
    const Density next = fixed_point_step(p, P1, 0.5, 4.0);
    CHECK(next.weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(next.values.minCoeff() > 0.0);
    CHECK(next.support->norms().maxCoeff() <= 4.0);
    CHECK_THROWS_AS(fixed_point_step(p, P1, 0.5, 3.0), InvalidArgument);
  }

  TEST_CASE("Gaussian fixed point: convergence, symmetry, bound, initializations") {
    auto g = make_grid(1, 4.0, 201);
    const Density P1 = testing::gaussian_density(g, 0.0, 1.0);
    const double eps = 0.5, r = 4.0;
    FixedPointOptions opt;
    opt.tol = 1e-10;
    const FixedPointTrace a = solve_fixed_point(P1, eps, r, opt);
    REQUIRE(a.converged);
    MESSAGE("outer iterations " << a.gaps.size() << ", objective " << a.objective());
    CHECK(a.residual <= 1e-10);
    CHECK(a.fixed_point_residual <= 1e-8);
    CHECK(asymmetry(a.density()) <= 1e-12);
    for (const Density& it : a.iterates) CHECK(asymmetry(it) <= 1e-12);
    for (double s : a.jensen_slack) CHECK(s >= -1e-12);
    CHECK(a.objective() <= psi_upper_bound(P1, eps, r));
    CHECK(a.objective() == doctest::Approx(a.consistency_value).epsilon(1e-6).scale(1.0));
    CHECK(a.objective() == doctest::Approx(psi_objective(a.density(), P1, eps, r)).epsilon(1e-9).scale(1.0));

    // Re-substitution from a cold solve.
    const Density again = fixed_point_step(a.density(), P1, eps, r);
    CHECK((again.values - a.density().values).cwiseAbs().maxCoeff() <= 1e-8);

    opt.init = P1;
    const FixedPointTrace b = solve_fixed_point(P1, eps, r, opt);
    REQUIRE(b.converged);
    CHECK((a.density().values - b.density().values).cwiseAbs().maxCoeff() <= 1e-6);
  }

  TEST_CASE("two-bump target keeps symmetric iterates symmetric") {
    auto g = make_grid(1, 3.0, 121);
    const Density left = testing::gaussian_density(g, -1.2, 0.2);
    const Density right = testing::gaussian_density(g, 1.2, 0.2);
    const Density P1 = Density::normalized(g, left.values + right.values);
    FixedPointOptions opt;
    opt.tol = 1e-9;
    opt.max_outer = 40;
    const FixedPointTrace t = solve_fixed_point(P1, 0.25, 3.0, opt);
    for (const Density& it : t.iterates) CHECK(asymmetry(it) <= 1e-12);
  }

  TEST_CASE("iteration cap gives a non-converged trace") {
    auto g = make_grid(1, 3.0, 61);
    const Density P1 = testing::gaussian_density(g, 0.0, 1.0);
    FixedPointOptions opt;
    opt.max_outer = 2;
    const FixedPointTrace t = solve_fixed_point(P1, 0.5, 3.0, opt);
    CHECK_FALSE(t.converged);
    CHECK(t.gaps.size() == 2);
    CHECK(t.iterates.size() == 3);
    opt.damping = 0.0;
    CHECK_THROWS_AS(solve_fixed_point(P1, 0.5, 3.0, opt), InvalidArgument);

    ContinuationOptions copt;
    copt.max_outer = 2;
    const MomentMeasureResult res = zero_noise_continuation(P1, 3.0, {1.0, 0.5}, copt);
    CHECK_FALSE(res.converged);
    CHECK(res.steps.size() == 1);
    CHECK(res.eps_schedule.size() == 1);
  }

  TEST_CASE("single-step schedule reproduces the fixed point solve") {
    auto g = make_grid(1, 4.0, 101);
    const Density P1 = testing::gaussian_density(g, 0.0, 1.0);
    const FixedPointTrace t = solve_fixed_point(P1, 0.5, 4.0);
    const MomentMeasureResult res = zero_noise_continuation(P1, 4.0, {0.5});
    REQUIRE(res.converged);
    CHECK(res.p0.values == t.density().values);
    CHECK(res.steps[0].objective == t.objective());
    CHECK(res.u_bar.minCoeff() == 0.0);
    CHECK(res.shift.norm() == 0.0);
  }

  TEST_CASE("shifted target gives the centred result and reports the shift") {
    auto g = make_grid(1, 4.0, 101);
    const Density P1 = testing::gaussian_density(g, 0.0, 1.0);
    Eigen::RowVectorXd c(1);
    c << 0.7;
    const Density shifted(translate(*g, c), P1.values);
    ContinuationOptions opt;
    opt.grid = g;
    const std::vector<double> schedule{1.0, 0.5};
    const MomentMeasureResult a = zero_noise_continuation(P1, 4.0, schedule, opt);
    const MomentMeasureResult b = zero_noise_continuation(shifted, 4.0, schedule, opt);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(b.shift[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK((a.p0.values - b.p0.values).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((a.u_bar - b.u_bar).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("continuation diagnostics on the Gaussian target") {
    auto g = make_grid(1, 4.0, 101);
    const Density P1 = testing::gaussian_density(g, 0.0, 1.0);
    const MomentMeasureResult res = zero_noise_continuation(P1, 4.0, geometric_schedule(1.0, 4));
    REQUIRE(res.converged);
    REQUIRE(res.steps.size() == 4);
    CHECK(res.steps[0].bl_drift == 0.0);
    for (std::size_t k = 0; k < res.steps.size(); ++k) {
      const auto& s = res.steps[k];
      CHECK(s.convexity_defect <= 1e-8 * (1.0 + res.u1_bar[k].maxCoeff() - res.u1_bar[k].minCoeff()));
      CHECK(s.objective <= s.psi_bound);
      if (k > 1) CHECK(s.bl_drift < res.steps[k - 1].bl_drift);
      if (k > 0) CHECK(s.pushforward_error < res.steps[k - 1].pushforward_error);
    }
    CHECK(res.convexity_defect <= 1e-8 * (1.0 + res.u_bar.maxCoeff()));
    CHECK(res.u_bar.minCoeff() == 0.0);
  }
}
