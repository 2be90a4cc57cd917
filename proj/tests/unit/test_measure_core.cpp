#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "sfe/distance.hpp"
#include "sfe/entropy.hpp"
#include "sfe/error.hpp"
#include "sfe/io.hpp"
#include "sfe/kernel.hpp"
#include "sfe/kernels.hpp"

using namespace sfe;
using sfe::testing::measure;
using sfe::testing::points_1d;

TEST_SUITE("measure_core") {
  TEST_CASE("make_grid lays out cell-centred lattices") {
    auto g = make_grid(1, 1.0, 4);
    REQUIRE(g->size() == 4);
    CHECK(g->points()(0, 0) == doctest::Approx(-0.75));
    CHECK(g->points()(1, 0) == doctest::Approx(-0.25));
    CHECK(g->points()(2, 0) == doctest::Approx(0.25));
    CHECK(g->points()(3, 0) == doctest::Approx(0.75));
    for (std::size_t i = 0; i < 4; ++i) CHECK(g->cell_volumes()[i] == doctest::Approx(0.5));

    auto g2 = make_grid(2, 1.0, 2);
    REQUIRE(g2->size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(g2->points()(i, 0)) == doctest::Approx(0.5));
      CHECK(std::abs(g2->points()(i, 1)) == doctest::Approx(0.5));
    }

    auto g3 = make_grid(1, 2.0, 100);
    CHECK(g3->size() == 100);
    CHECK(g3->total_volume() == doctest::Approx(4.0));
    CHECK(g3->bounding_radius() == 2.0);
  }

  TEST_CASE("make_grid drops corners and enforces the point budget") {
    auto g = make_grid(2, 1.0, 10);
    CHECK(g->size() < 100);
    CHECK(g->norms().maxCoeff() <= 1.0);
    CHECK_THROWS_AS(make_grid(3, 1.0, 200), InvalidArgument);
    CHECK_THROWS_AS(make_grid(1, 1.0, 1), InvalidArgument);
    CHECK_NOTHROW(make_grid(3, 1.0, 200, GridOptions{10'000'000}));
  }

  TEST_CASE("support rejects duplicate points and bad volumes") {
    RowMat p(2, 1);
    p << 0.5, 0.5;
    CHECK_THROWS_AS(Support(p, Vec::Ones(2)), InvalidArgument);
    p << 0.5, -0.5;
    CHECK_THROWS_AS(Support(p, Vec::Zero(2)), InvalidArgument);
    CHECK_THROWS_AS(Support(p, Vec::Ones(2), 0.25), InvalidArgument);
  }

  TEST_CASE("measure and density validation") {
    auto s = points_1d({0.0, 1.0});
    CHECK_THROWS_AS(measure(s, {0.5, 0.6}), InvalidArgument);
    CHECK_THROWS_AS(measure(s, {1.5, -0.5}), InvalidArgument);
    CHECK_NOTHROW(DiscreteMeasure(s, Vec::Constant(2, 3.0), false));
    CHECK_THROWS_AS(Density(s, Vec::Constant(2, 0.7)), InvalidArgument);
  }

  TEST_CASE("heat kernel closed form") {
    auto origin = points_1d({0.0});
    auto one = points_1d({1.0});
    auto k = eval_kernel(KernelSpec(GaussianHeat{1.0, 1.0}, origin, origin));
    CHECK(k.values(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
    auto k2 = eval_kernel(KernelSpec(GaussianHeat{0.5, 2.0}, origin, one));
    CHECK(k2.values(0, 0) == doctest::Approx(std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK_FALSE(k2.log_domain);
  }

  TEST_CASE("dense kernel passes through and rejects non-positive entries") {
    auto s = points_1d({0.0, 1.0});
    RowMat v(2, 2);
    v << 2, 1, 1, 2;
    auto k = eval_kernel(testing::dense(s, s, v));
    CHECK((k.values - v).cwiseAbs().maxCoeff() == 0.0);
    v(0, 1) = 0.0;
    CHECK_THROWS_AS(DenseMatrix::from_values(v), InvalidArgument);
    RowMat wrong(3, 2);
    wrong.setOnes();
    CHECK_THROWS_AS(testing::dense(s, s, wrong), InvalidArgument);
  }

  TEST_CASE("heat kernel underflow sets the log-domain flag") {
    auto a = points_1d({-50.0});
    auto b = points_1d({50.0});
    auto k = eval_kernel(KernelSpec(GaussianHeat{1.0, 0.01}, a, b));
    CHECK(k.log_domain);
    CHECK(k.values(0, 0) == std::numeric_limits<double>::min());
    RowMat lk = log_kernel_matrix(KernelSpec(GaussianHeat{1.0, 0.01}, a, b));
    CHECK(lk(0, 0) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * 0.01) - 1e4 / 0.02));
  }

  TEST_CASE("heat kernel symmetry and translation invariance") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    RowMat x(12, 2), y(9, 2);
    for (auto& v : x.reshaped()) v = n(rng);
    for (auto& v : y.reshaped()) v = n(rng);
    auto sx = std::make_shared<const Support>(x, Vec::Ones(12));
    auto sy = std::make_shared<const Support>(y, Vec::Ones(9));
    const GaussianHeat g{0.7, 0.3};
    RowMat kxy = eval_kernel(KernelSpec(g, sx, sy)).values;
    RowMat kyx = eval_kernel(KernelSpec(g, sy, sx)).values;
    CHECK((kxy - kyx.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::RowVector2d c(0.3, -1.1);
    auto tx = translate(*sx, c);
    auto ty = translate(*sy, c);
    RowMat kt = eval_kernel(KernelSpec(g, tx, ty)).values;
    CHECK((kt - kxy).cwiseAbs().maxCoeff() <= 1e-14 * kxy.maxCoeff());
  }

  TEST_CASE("entropy of uniform and Gaussian densities") {
    auto g = make_grid(1, 1.0, 50);
    CHECK(entropy_S(Density(g, Vec::Constant(50, 0.5))) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

    RowMat p(10, 1);
    for (int i = 0; i < 10; ++i) p(i, 0) = 0.05 + 0.1 * i;
    auto unit = std::make_shared<const Support>(p, Vec::Constant(10, 0.1));
    CHECK(std::abs(entropy_S(Density(unit, Vec::Ones(10)))) < 1e-15);

    auto fine = make_grid(1, 5.0, 2000);
    const double expected = -0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
    CHECK(std::abs(entropy_S(testing::gaussian_density(fine, 0.0, 1.0)) - expected) < 1e-3);

    CHECK(std::isinf(entropy_S(std::optional<Density>{})));
  }

  TEST_CASE("entropy is bounded below by minus log volume") {
    std::mt19937_64 rng(11);
    auto g = make_grid(2, 1.0, 12);
    for (int trial = 0; trial < 50; ++trial) {
      Vec raw = testing::random_weights(rng, g->size());
      if (trial % 5 == 0) raw.head(g->size() / 2).setZero();
      auto p = Density::normalized(g, raw);
      CHECK(entropy_S(p) >= -std::log(g->total_volume()) - 1e-12);
    }
  }

  TEST_CASE("relative entropy") {
    Vec m(2), n(2);
    m << 1.0, 0.0;
    n << 0.5, 0.5;
    CHECK(relative_entropy(m, m) == 0.0);
    CHECK(relative_entropy(m, n) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    m << 0.75, 0.25;
    CHECK(relative_entropy(m, n) == doctest::Approx(0.13081203594113697).epsilon(1e-14));
    n << 1.0, 0.0;
    CHECK(std::isinf(relative_entropy(m, n)));

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      Vec a = testing::random_weights(rng, 20), b = testing::random_weights(rng, 20);
      CHECK(relative_entropy(a, b) >= -1e-12);
    }
  }

  TEST_CASE("w2 spec examples") {
    auto a = points_1d({0.3});
    auto b = points_1d({-1.2});
    CHECK(w2_distance(measure(a, {1.0}), measure(b, {1.0})) == doctest::Approx(1.5).epsilon(1e-14));
    auto s = points_1d({0.0, 1.0});
    CHECK(w2_distance(measure(s, {0.5, 0.5}), measure(s, {0.5, 0.5})) == 0.0);
    CHECK(w2_distance(measure(s, {0.5, 0.5}), measure(s, {1.0, 0.0})) ==
          doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  }

  TEST_CASE("w2 matches the best permutation on uniform point clouds") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const int k = 6;
      RowMat x(k, 2), y(k, 2);
      for (auto& v : x.reshaped()) v = n(rng);
      for (auto& v : y.reshaped()) v = n(rng);
      auto sx = std::make_shared<const Support>(x, Vec::Ones(k));
      auto sy = std::make_shared<const Support>(y, Vec::Ones(k));
      std::vector<int> perm{0, 1, 2, 3, 4, 5};
      double best = std::numeric_limits<double>::infinity();
      do {
        double c = 0.0;
        for (int i = 0; i < k; ++i) c += (x.row(i) - y.row(perm[i])).squaredNorm() / k;
        best = std::min(best, c);
      } while (std::next_permutation(perm.begin(), perm.end()));
      const double w = w2_distance(DiscreteMeasure(sx, Vec::Constant(k, 1.0 / k)), DiscreteMeasure(sy, Vec::Constant(k, 1.0 / k)));
      CHECK(w == doctest::Approx(std::sqrt(best)).epsilon(1e-12));
    }
  }

  TEST_CASE("w2 triangle inequality on random small measures") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> size(1, 10);
    auto random_measure = [&] {
      const int k = size(rng);
      RowMat x(k, 2);
      for (auto& v : x.reshaped()) v = n(rng);
      auto s = std::make_shared<const Support>(x, Vec::Ones(k));
      return DiscreteMeasure(s, testing::random_weights(rng, k, 0.05));
    };
    for (int trial = 0; trial < 40; ++trial) {
      auto a = random_measure(), b = random_measure(), c = random_measure();
      CHECK(w2_distance(a, c) <= w2_distance(a, b) + w2_distance(b, c) + 1e-9);
    }
  }

  TEST_CASE("w2 oracle refuses oversized instances") {
    auto g = make_grid(1, 1.0, 250);
    DiscreteMeasure m(g, Vec::Constant(250, 1.0 / 250));
    CHECK_THROWS_AS(w2_distance(m, m), OracleTooLarge);
    CHECK_NOTHROW(w2_distance(m, m, W2Options{600}));
  }

  TEST_CASE("exact 1-D quantile route agrees with the network-flow oracle") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      RowMat x(15, 1), y(23, 1);
      for (auto& v : x.reshaped()) v = n(rng);
      for (auto& v : y.reshaped()) v = 0.5 + 2.0 * n(rng);
      auto sx = std::make_shared<const Support>(x, Vec::Ones(15));
      auto sy = std::make_shared<const Support>(y, Vec::Ones(23));
      DiscreteMeasure a(sx, testing::random_weights(rng, 15));
      DiscreteMeasure b(sy, testing::random_weights(rng, 23));
      CHECK(w2_1d(Quantile1D::atoms(a), Quantile1D::atoms(b)) == doctest::Approx(w2_distance(a, b)).epsilon(1e-10));
    }
  }

  TEST_CASE("cell-uniform quantiles integrate exactly") {
    // Uniform on [0, 1] as ten cells vs the atom at 1/2: W2^2 = 1/12.
    RowMat p(10, 1);
    for (int i = 0; i < 10; ++i) p(i, 0) = 0.05 + 0.1 * i;
    auto unit = std::make_shared<const Support>(p, Vec::Constant(10, 0.1));
    const double half = 0.5, one = 1.0;
    auto q = Quantile1D::atoms(std::span<const double>(&half, 1), std::span<const double>(&one, 1));
    CHECK(w2_1d(Quantile1D::cells(Density(unit, Vec::Ones(10))), q) == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-14));
  }

  TEST_CASE("bl distance examples and golden value") {
    auto s = points_1d({0.0, 1.0});
    CHECK(bl_distance(measure(s, {0.5, 0.5}), measure(s, {0.5, 0.5})) == 0.0);
    CHECK(bl_distance(measure(s, {1.0, 0.0}), measure(s, {0.5, 0.5})) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(BlDictionary::kVersion == "bl-dict-v1");

    auto origin = points_1d({0.0});
    double previous = std::numeric_limits<double>::infinity();
    for (double t : {0.8, 0.4, 0.2, 0.1, 0.05, 0.0125}) {
      auto moved = points_1d({t});
      const double d = bl_distance(measure(origin, {1.0}), measure(moved, {1.0}));
      CHECK(d > 0.0);
      CHECK(d <= t + 1e-15);
      CHECK(d < previous);
      previous = d;
    }
  }

  TEST_CASE("bl dictionary layout") {
    const BlDictionary d1(1, 1.0), d2(2, 4.0);
    CHECK(d1.size() == 33 + 3 + 5 + 9 + 17 + 33 + 65 + 129 + 257);
    CHECK(d2.bump_levels() == 4);
    CHECK(d2.size() == 4 * 33 + 9 + 25 + 81 + 289);
    CHECK(BlDictionary::domain_scale_for({}) == 1.0);
    RowMat p(1, 1);
    p << 2.5;
    CHECK(BlDictionary::domain_scale_for({&p}) == 4.0);
  }

  TEST_CASE("bl distance of empirical samples shrinks along a ladder") {
    auto g = make_grid(1, 4.0, 200);
    const Density p = testing::gaussian_density(g, 0.0, 1.0);
    const Vec w = p.weights();
    std::mt19937_64 rng(2024);
    std::discrete_distribution<int> pick(w.data(), w.data() + w.size());
    std::vector<double> d;
    for (int n : {100, 1000, 10000, 100000}) {
      Vec counts = Vec::Zero(w.size());
      for (int i = 0; i < n; ++i) counts[pick(rng)] += 1.0;
      d.push_back(bl_distance(DiscreteMeasure::normalized(g, counts), p.to_measure()));
    }
    for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] < d[i - 1]);
    CHECK(d.back() < 0.01);
  }

  TEST_CASE("csv round trip and line-numbered errors") {
    std::istringstream ok("# comment\nx_1,weight\n0.5, 0.25\n\n1.5,0.75\n");
    auto t = io::parse_csv(ok, "ok.csv");
    CHECK(t.rows.rows() == 2);
    CHECK(t.rows(1, 1) == 0.75);

    std::istringstream noheader("0.5,0.25\n");
    CHECK_THROWS_AS(io::parse_csv(noheader, "a.csv"), ParseError);

    std::istringstream bad("x_1,weight\n0.5,0.25\n0.7,abc\n");
    try {
      io::parse_csv(bad, "bad.csv");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("bad.csv:3") == 0);
    }

    std::istringstream ragged("x_1,weight\n0.5\n");
    CHECK_THROWS_AS(io::parse_csv(ragged, "r.csv"), ParseError);

    CHECK(io::format_double(0.1) == "0.10000000000000001");
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("serial and parallel kernels are bit-identical") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    RowMat x(157, 2), y(131, 2);
    for (auto& v : x.reshaped()) v = n(rng);
    for (auto& v : y.reshaped()) v = n(rng);
    RowMat ls, lp;
    kernels::serial::gaussian_log_kernel(x, y, 0.37, -0.2, ls);
    kernels::parallel::gaussian_log_kernel(x, y, 0.37, -0.2, lp);
    CHECK(ls == lp);

    Vec shift(131);
    for (auto& v : shift) v = n(rng);
    shift[5] = -std::numeric_limits<double>::infinity();
    Vec rs, rp;
    kernels::serial::row_logsumexp(ls, shift, rs);
    kernels::parallel::row_logsumexp(ls, shift, rp);
    CHECK(rs == rp);

    RowMat k = ls.array().exp();
    Vec vs, vp;
    kernels::serial::matvec(k, shift.array().exp().matrix(), vs);
    kernels::parallel::matvec(k, shift.array().exp().matrix(), vp);
    CHECK(vs == vp);

    Vec a(157);
    for (auto& v : a) v = n(rng);
    RowMat es, ep;
    kernels::serial::scaled_exp(ls, a, shift, es);
    kernels::parallel::scaled_exp(ls, a, shift, ep);
    CHECK(es == ep);
  }

  TEST_CASE("row logsumexp matches a direct sum") {
    RowMat l(1, 3);
    l << 0.1, -2.0, 1.3;
    Vec shift = Vec::Zero(3), out;
    kernels::serial::row_logsumexp(l, shift, out);
    CHECK(out[0] == doctest::Approx(std::log(std::exp(0.1) + std::exp(-2.0) + std::exp(1.3))).epsilon(1e-15));
    shift.setConstant(-std::numeric_limits<double>::infinity());
    kernels::serial::row_logsumexp(l, shift, out);
    CHECK(out[0] == -std::numeric_limits<double>::infinity());
  }
}
