#include <doctest.h>

#include <cmath>
#include <sstream>

#include "amwg/errors.hpp"
#include "amwg/theory.hpp"

using namespace amwg;

TEST_CASE("C1 and C2 constants") {
  CHECK(c1(0, 0, 1) == doctest::Approx(4.08616).epsilon(1e-5));
  CHECK(c1(1, 1, 1) == doctest::Approx(12.2585).epsilon(1e-5));
  for (double cd : {10.0, 20.0, 30.0}) {
    CHECK(c1(2, 1, cd) / (std::exp(cd) * 4.0) == doctest::Approx(1.0).epsilon(1e-4));
  }
  CHECK(c2(0, 0, 1) == 1.0);
  CHECK(c2(10, 0, 1e-6) == 1.0);
  CHECK(c2(168.75, 0, 0.5) == 1.0);
  CHECK(c2(5, 2, 3) == 1.0);
}

TEST_CASE("continuous radius bound") {
  BoundInputs in;
  in.C_f = 3.0;
  in.C_sigma = 0.5;
  in.C_d = 1.0;
  in.delta_sq = 2.0;
  in.T = 0.0;
  in.epsilon = c2(in.C_f, in.C_sigma, in.C_d) * in.delta_sq;
  CHECK(radius_bound_continuous(in) == doctest::Approx(0.0).epsilon(1e-14));

  in.epsilon = 1e-3;
  in.T = 0.3;
  const double b1 = radius_bound_continuous(in);
  in.T = 0.6;
  const double b2 = radius_bound_continuous(in);
  const double C1 = c1(in.C_f, in.C_sigma, in.C_d);
  CHECK(b2 - b1 == doctest::Approx(2.0 * C1 / in.C_d * 0.3));

  in.epsilon = 0.0;
  CHECK_THROWS_AS(radius_bound_continuous(in), ArgumentError);
  in.epsilon = 1e-3;
  in.delta_sq = 0.0;
  CHECK_THROWS_AS(radius_bound_continuous(in), ArgumentError);
}

TEST_CASE("continuous bound solves the defining inequality for the linear flow") {
  const ModelSpec lin = linear_flow(40, 2);
  BoundInputs in;
  in.C_f = lin.lipschitz()->drift;
  in.C_sigma = lin.lipschitz()->diffusion;
  in.C_d = 1.0;
  in.delta_sq = 1.0;
  in.T = 0.4;
  in.epsilon = 1e-4;
  const double L = radius_bound_continuous(in);
  const double C1 = c1(in.C_f, in.C_sigma, in.C_d);
  const double C2 = c2(in.C_f, in.C_sigma, in.C_d);
  // At L the inequality C2 e^{2 C1 T} e^{-C_d L} <= eps / delta^2 is tight
  // (in logs); one unit less violates it.
  auto lhs = [&](double r) { return std::log(C2) + 2.0 * C1 * in.T - in.C_d * r; };
  const double rhs = std::log(in.epsilon / in.delta_sq);
  CHECK(lhs(L) == doctest::Approx(rhs));
  CHECK(lhs(std::ceil(L)) <= rhs + 1e-12);
  CHECK(lhs(L - 1.0) > rhs);
}

TEST_CASE("discrete radius bound") {
  BoundInputs in;
  in.C_f = 2.0;
  in.C_sigma = 0.0;
  in.C_d = 0.7;
  in.delta_sq = 1.0;
  in.T = 0.4;
  in.epsilon = 1e-3;
  in.h = 0.01;
  const double C1 = c1(in.C_f, in.C_sigma, in.C_d);
  CHECK(radius_bound_discrete(in) - radius_bound_continuous(in) ==
        doctest::Approx(2.0 * C1 * 0.01 / in.C_d * 0.4));
  in.h = 1e-12;
  CHECK(radius_bound_discrete(in) == doctest::Approx(radius_bound_continuous(in)).epsilon(1e-10));
}

TEST_CASE("radius bounds are monotone") {
  BoundInputs in;
  in.C_f = 1.0;
  in.C_d = 1.0;
  in.h = 0.01;
  for (auto bound : {radius_bound_continuous, radius_bound_discrete}) {
    in.T = 0.2;
    in.delta_sq = 1.0;
    in.epsilon = 1e-3;
    const double base = bound(in);
    in.T = 0.4;
    CHECK(bound(in) >= base);
    in.T = 0.2;
    in.delta_sq = 4.0;
    CHECK(bound(in) >= base);
    in.delta_sq = 1.0;
    in.epsilon = 1e-2;
    CHECK(bound(in) <= base);
  }
}

TEST_CASE("local error bound and bound-based selection") {
  BoundInputs in;
  in.C_f = 1.0;
  in.C_d = 2.0;
  in.h = 0.01;
  in.delta_sq = 3.0;
  const double C1 = c1(1.0, 0.0, 2.0);
  CHECK(local_error_bound(in, 0, 0) == doctest::Approx(std::exp(-2.0) * 3.0));
  CHECK(local_error_bound(in, 10, 2) == doctest::Approx(std::exp(2.0 * C1 * 1.01 * 0.1) * std::exp(-6.0) * 3.0));
  in.T = 0.1;
  in.epsilon = 1e-4;
  const BoundSelection sel = select_radius_by_bound(in);
  CHECK(sel.radius >= 0);
  BoundInputs at = in;
  at.C_d = sel.C_d;
  CHECK(sel.radius == std::max(0, static_cast<int>(std::ceil(radius_bound_discrete(at)))));
  for (double cd : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    at.C_d = cd;
    CHECK(std::ceil(radius_bound_discrete(at)) >= sel.radius);
  }
}

TEST_CASE("empirical radius selection") {
  const ModelSpec model = lorenz96(20, 2);
  EquilibriumPriorOptions opt;
  opt.sim_length = 100.0;
  Rng prng = make_rng(2);
  const GaussianPrior prior = lorenz96_equilibrium_prior(model, opt, prng);
  const TimeGrid grid = TimeGrid::make(0.01, 0.4);
  Rng drng = make_rng(3);
  const State truth = prior.sample(drng);
  const State xT = rk4_full(model, truth, grid).terminal();
  Vector y(10);
  for (int r = 0; r < 10; ++r) y[r] = xT[2 * r];
  const ObservationModel obs(ObservationModel::every_other(20), Matrix::Identity(10, 10), y);
  const auto store = BrownianStore::deterministic(1, 10, 2);
  RadiusSelectOptions ro;
  ro.grid = grid;
  ro.trials = 40;
  Rng rng = make_rng(4);
  const auto rows = empirical_radius_select(model, prior, obs, store, {1, 2, 3, 5}, ro, rng);
  REQUIRE(rows.size() == 4);
  CHECK(rows[3].err_phi == 0.0);
  CHECK(rows[3].err_alpha == 0.0);
  for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k].err_phi < rows[k - 1].err_phi);
  CHECK(rows[0].err_phi > 0.0);

  std::ostringstream os;
  write_radius_table(os, rows);
  CHECK(os.str().rfind("L,err_alpha,err_phi\n", 0) == 0);

  ro.trials = 0;
  CHECK_THROWS_AS(empirical_radius_select(model, prior, obs, store, {1}, ro, rng), ArgumentError);
  ro.trials = 2;
  CHECK_THROWS_AS(empirical_radius_select(model, prior, obs, store, {6}, ro, rng), ArgumentError);

  // Same seed, same table.
  ro.trials = 5;
  Rng r1 = make_rng(9);
  Rng r2 = make_rng(9);
  const auto a = empirical_radius_select(model, prior, obs, store, {1, 2}, ro, r1);
  const auto b = empirical_radius_select(model, prior, obs, store, {1, 2}, ro, r2);
  CHECK(a[0].err_phi == b[0].err_phi);
  CHECK(a[1].err_alpha == b[1].err_alpha);
}

TEST_CASE("line fit") {
  const auto fit = fit_line({0, 1, 2, 3, 4}, {1.0, 0.8, 1.1, 0.3, 0.2});
  CHECK(fit.slope == doctest::Approx(-0.21));
  CHECK(fit.intercept == doctest::Approx(1.1));
  CHECK(fit.slope_stderr == doctest::Approx(0.08698658900466595).epsilon(1e-10));
  CHECK(fit.p_value == doctest::Approx(0.09466264740588187).epsilon(1e-8));
  CHECK_THROWS_AS(fit_line({1, 2}, {1, 2}), ArgumentError);
  CHECK_THROWS_AS(fit_line({1, 1, 1}, {1, 2, 3}), ArgumentError);
}
