#include <doctest.h>

#include "test_support.hpp"

using namespace stochex;
using testing::random_grid;
using testing::random_path;

namespace {

// Runs `error(steps, seed)` over seeds and dyadic levels and fits the order of
// the RMS error.
template <typename Fn>
OrderEstimate rms_order(const std::vector<long>& levels, int seeds, Fn error) {
  std::vector<double> dt, err;
  for (long steps : levels) {
    std::vector<double> e;
    for (int s = 0; s < seeds; ++s) e.push_back(error(steps, static_cast<std::uint64_t>(s)));
    dt.push_back(1.0 / static_cast<double>(steps));
    err.push_back(testing::rms(e));
  }
  return *estimate_order(dt, err);
}

}  // namespace

TEST_CASE("integrate_left / integrate_right: trivial integrals") {
  auto g = build_grid(1.0, 8, std::vector<double>{0.3});
  std::mt19937_64 rng(1);
  const auto f = random_path(g, 2, 3, rng);

  SUBCASE("zero integrator") {
    CHECK(sup_norm(integrate_left(MatrixPathd::zero(g, 2, 2), f)) == 0.0);
    CHECK(sup_norm(integrate_right(f, MatrixPathd::zero(g, 3, 3))) == 0.0);
  }
  SUBCASE("Riemann case: Z = tI, F = C") {
    PathBuilder<double> z(g);
    for (std::size_t k = 0; k < g->size(); ++k) z.set(k, MatXd(MatXd::Identity(2, 2) * (*g)[k]));
    MatXd c(2, 3);
    c << 1, 2, 3, -1, 0.5, 4;
    const auto i = integrate_left(std::move(z).finish(), MatrixPathd::constant(g, c));
    for (std::size_t k = 0; k < g->size(); ++k) CHECK(max_abs(i.value(k) - (*g)[k] * c) < 1e-14);
  }
  SUBCASE("identity integrand") {
    const auto zz = random_path(g, 3, 3, rng);
    const auto i = integrate_right(MatrixPathd::constant(g, MatXd::Identity(3, 3)), zz);
    const auto expect = zz - MatrixPathd::constant(g, zz.value(0));
    CHECK(sup_distance(i, expect) < 1e-13);
  }
  SUBCASE("scalar commutativity") {
    const auto a = random_path(g, 1, 1, rng);
    const auto b = random_path(g, 1, 1, rng);
    CHECK(sup_distance(integrate_right(a, b), integrate_left(b, a)) == 0.0);
  }
  SUBCASE("dimension and grid mismatches") {
    CHECK_THROWS_AS(integrate_left(random_path(g, 2, 2, rng), random_path(g, 3, 1, rng)), ShapeError);
    auto other = build_grid(1.0, 9);
    CHECK_THROWS_AS(integrate_left(random_path(g, 2, 2, rng), random_path(other, 2, 1, rng)), ShapeError);
  }
}

TEST_CASE("integrate_left: jump term uses the left limit of the integrand") {
  auto g = build_grid(1.0, 4, std::vector<double>{0.6});
  const std::size_t j = *g->find_node(0.6);
  // Z jumps by 2 at 0.6; F is a step path that also moves continuously.
  PathBuilder<double> zb(g), fb(g);
  for (std::size_t k = 0; k < g->size(); ++k) {
    const double z = k >= j ? 2.0 : 0.0;
    if (k == j)
      zb.set(k, MatXd::Zero(1, 1), MatXd::Constant(1, 1, z));
    else
      zb.set(k, MatXd::Constant(1, 1, z));
    const double fv = (*g)[k];  // continuous F(t) = t
    fb.set(k, MatXd::Constant(1, 1, fv));
  }
  const auto i = integrate_left(std::move(zb).finish(), std::move(fb).finish());
  // Exact answer: 2 * F(0.6-) = 1.2.
  CHECK(i.back()(0, 0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(i.left(j)(0, 0) == 0.0);
}

TEST_CASE("Ito oracle: int B dB -> (B(T)^2 - T)/2 at order 1/2") {
  // Exact discrete identity: sum B dB = (B_T^2 - sum dB^2)/2, so the error is
  // (sum dB^2 - T)/2 with RMS sqrt(dt/2).
  const auto est = rms_order({128, 256, 512, 1024}, 100, [](long steps, std::uint64_t seed) {
    auto g = build_grid(1.0, steps);
    const auto b = sample_brownian<double>(g, 1, seed);
    const double bt = b.back()(0, 0);
    return std::abs(integrate_left(b, b).back()(0, 0) - (bt * bt - 1.0) / 2.0);
  });
  CHECK(est.order >= 0.4);
  CHECK(est.order <= 0.6);
}

TEST_CASE("realized_bracket") {
  SUBCASE("pure-jump product is exact after the jump") {
    auto g = build_grid(1.0, 10, std::vector<double>{0.45});
    const std::size_t j = *g->find_node(0.45);
    MatXd jA(2, 2), jB(2, 1);
    jA << 1, 2, 3, 4;
    jB << -1, 0.5;
    PathBuilder<double> a(g), b(g);
    for (std::size_t k = 0; k < g->size(); ++k) {
      if (k == j) {
        a.set(k, MatXd::Zero(2, 2), jA);
        b.set(k, MatXd::Zero(2, 1), jB);
      } else {
        a.set(k, k > j ? jA : MatXd::Zero(2, 2));
        b.set(k, k > j ? jB : MatXd::Zero(2, 1));
      }
    }
    const auto br = realized_bracket(std::move(a).finish(), std::move(b).finish());
    for (std::size_t k = 0; k < g->size(); ++k) {
      const MatXd expect = k >= j ? MatXd(jA * jB) : MatXd::Zero(2, 1);
      CHECK(max_abs(br.total.value(k) - expect) == 0.0);
    }
    CHECK(sup_norm(br.continuous) == 0.0);
    CHECK(max_abs(br.jumps.jump(j) - jA * jB) == 0.0);
  }

  SUBCASE("drift has vanishing covariation, order 1") {
    MatXd c = MatXd::Constant(1, 1, 2.0);
    const auto est = rms_order({64, 128, 256, 512}, 50, [&](long steps, std::uint64_t seed) {
      auto g = build_grid(1.0, steps);
      const auto b = sample_brownian<double>(g, 1, seed);
      DriverSpecd drift;
      drift.drift = testing::constant(c);
      const auto a = sample_driver(drift, g, b, 0);
      return std::abs(realized_bracket(a, b).total.back()(0, 0));
    });
    CHECK(est.order == doctest::Approx(1.0).epsilon(0.15));
  }

  SUBCASE("[B,B](T) -> T at order 1/2") {
    const auto est = rms_order({128, 256, 512, 1024}, 100, [](long steps, std::uint64_t seed) {
      auto g = build_grid(1.0, steps);
      const auto b = sample_brownian<double>(g, 1, seed);
      return std::abs(realized_bracket(b, b).total.back()(0, 0) - 1.0);
    });
    CHECK(est.order >= 0.4);
    CHECK(est.order <= 0.6);
  }
}

TEST_CASE("analytic_bracket") {
  auto g = build_grid(1.0, 16);
  const auto b = sample_brownian<double>(g, 2, 3);

  SUBCASE("disjoint Brownian loadings give zero continuous part") {
    DriverSpecd a, c;
    a.diffusion = {testing::constant(MatXd::Ones(1, 1)), {}};
    c.diffusion = {{}, testing::constant(MatXd::Ones(1, 1))};
    const auto pa = sample_driver(a, g, b, 0);
    const auto pc = sample_driver(c, g, b, 0);
    CHECK(sup_norm(analytic_bracket(a, c, pa, pc).continuous) == 0.0);
  }
  SUBCASE("unit integrands give <B,B>_t = t") {
    DriverSpecd a;
    a.diffusion = {testing::constant(MatXd::Ones(1, 1)), {}};
    const auto pa = sample_driver(a, g, b, 0);
    const auto br = analytic_bracket(a, a, pa, pa).continuous;
    for (std::size_t k = 0; k < g->size(); ++k) CHECK(br.value(k)(0, 0) == doctest::Approx((*g)[k]).epsilon(1e-14));
  }
  SUBCASE("mismatched Brownian dimension") {
    DriverSpecd a, c;
    a.diffusion = {testing::constant(MatXd::Ones(1, 1)), {}};
    c.diffusion = {testing::constant(MatXd::Ones(1, 1))};
    const auto pa = sample_driver(a, g, b, 0);
    CHECK_THROWS_AS(analytic_bracket(a, c, pa, pa), ShapeError);
  }
  SUBCASE("matrix contraction over the shared index") {
    // <A^c,B^c> accrues sum_r sigmaA_r sigmaB_r dt.
    MatXd s1(2, 2), s2(2, 2), r1(2, 1), r2(2, 1);
    s1 << 1, 2, 0, 1;
    s2 << 0, 1, 1, 0;
    r1 << 1, -1;
    r2 << 2, 3;
    DriverSpecd a, c;
    a.rows = a.cols = 2;
    a.diffusion = {testing::constant(s1), testing::constant(s2)};
    c.rows = 2;
    c.cols = 1;
    c.diffusion = {testing::constant(r1), testing::constant(r2)};
    const auto pa = sample_driver(a, g, b, 0);
    const auto pc = sample_driver(c, g, b, 0);
    const auto br = analytic_bracket(a, c, pa, pc).continuous;
    CHECK(max_abs(br.back() - (s1 * r1 + s2 * r2)) < 1e-14);
  }
}

TEST_CASE("realized vs analytic bracket: self-consistency under refinement") {
  MatXd s(2, 2);
  s << 0.5, 0.1, -0.2, 0.4;
  DriverSpecd a;
  a.rows = a.cols = 2;
  a.diffusion = {testing::constant(s), [](double t) { return MatXd::Identity(2, 2) * t; }};
  const auto est = rms_order({64, 128, 256, 512, 1024}, 400, [&](long steps, std::uint64_t seed) {
    auto g = build_grid(1.0, steps);
    const auto b = sample_brownian<double>(g, 2, seed);
    const auto pa = sample_driver(a, g, b, 0);
    return sup_distance(realized_bracket(pa, pa).total, analytic_bracket(a, a, pa, pa).total);
  });
  MESSAGE("bracket order " << est.order << " +- " << est.std_error);
  CHECK(est.order >= 0.4);
  CHECK(est.order <= 1.1);
}

TEST_CASE("integration by parts holds exactly for random path pairs") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_grid(rng, 64 + 16 * trial, 5);
    const auto n = dim(rng), p = dim(rng), m = dim(rng);
    const auto a = random_path(g, n, p, rng);
    const auto b = random_path(g, p, m, rng);
    const double scale = sup_norm(a) * sup_norm(b) * static_cast<double>(p);
    CHECK(ibp_residual(a, b) < 1e-12 * scale);
  }
  auto g = build_grid(1.0, 10);
  const auto id = MatrixPathd::constant(g, MatXd::Identity(3, 3));
  CHECK(ibp_residual(id, id) == 0.0);
}

TEST_CASE("bilinearity and transpose symmetry") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_grid(rng, 50, 4);
    const auto z = random_path(g, 2, 3, rng);
    const auto f1 = random_path(g, 3, 2, rng);
    const auto f2 = random_path(g, 3, 2, rng);
    const double alpha = 0.7, beta = -1.3;
    const auto lhs = integrate_left(z, alpha * f1 + beta * f2);
    const auto rhs = alpha * integrate_left(z, f1) + beta * integrate_left(z, f2);
    CHECK(sup_distance(lhs, rhs) < 1e-12 * (1.0 + sup_norm(lhs)));

    const auto br_l = realized_bracket(z, alpha * f1 + beta * f2).total;
    const auto br_r = alpha * realized_bracket(z, f1).total + beta * realized_bracket(z, f2).total;
    CHECK(sup_distance(br_l, br_r) < 1e-12 * (1.0 + sup_norm(br_l)));

    const auto t1 = transpose(realized_bracket(z, f1).total);
    const auto t2 = realized_bracket(transpose(f1), transpose(z)).total;
    CHECK(sup_distance(t1, t2) < 1e-13 * (1.0 + sup_norm(t1)));

    const auto br = realized_bracket(z, f1);
    for (std::size_t k : g->jump_nodes()) CHECK(max_abs(br.jumps.jump(k) - z.jump(k) * f1.jump(k)) < 1e-13);
  }
}
