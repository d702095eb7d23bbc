#include <doctest.h>

#include <cmath>
#include <random>

#include "amwg/errors.hpp"
#include "amwg/integrate.hpp"
#include "amwg/prior.hpp"
#include "helpers.hpp"

using namespace amwg;

namespace {

State random_state(int n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  State x(n);
  for (auto& v : x) v = normal(rng);
  return x;
}

State lorenz_state(int n, std::uint64_t seed) {
  State x = random_state(n, seed);
  x.array() += 2.0;
  return x;
}

bool patch_matches(const LocalPatch& p, const Trajectory& t) {
  for (int i = 0; i <= p.steps(); ++i) {
    for (int slot : p.active_slots()) {
      if (!testutil::same_span(p.block(i, slot), t.block(i, p.block_of(slot)))) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("time grid") {
  const TimeGrid g = TimeGrid::make(0.01, 0.4);
  CHECK(g.steps == 40);
  CHECK_THROWS_AS(TimeGrid::make(0.03, 0.4), ArgumentError);
  CHECK_THROWS_AS(TimeGrid::make(0.0, 0.4), ArgumentError);
}

TEST_CASE("euler on the decay equation") {
  const ModelSpec model = testutil::decay_model(1, 1);
  const auto store = BrownianStore::deterministic(1, 1, 1);
  const Trajectory t = em_full(model, State::Ones(1), store, 0, TimeGrid::make(0.01, 0.4));
  CHECK(t.terminal()[0] == doctest::Approx(std::pow(0.99, 40)).epsilon(1e-14));
  CHECK(t.terminal()[0] == doctest::Approx(0.6690).epsilon(1e-4));
  CHECK_FALSE(t.has_stages());
}

TEST_CASE("zero dynamics keep the state constant") {
  const ModelSpec model = testutil::decay_model(4, 2, 0.0);
  const State x = random_state(8, 1);
  const auto store = BrownianStore::deterministic(1, 4, 2);
  const Trajectory e = em_full(model, x, store, 0, TimeGrid::make(0.1, 1.0));
  const Trajectory r = rk4_full(model, x, TimeGrid::make(0.1, 1.0));
  for (int i = 0; i <= 10; ++i) {
    CHECK(testutil::same_span(e.state(i), std::span<const double>(x.data(), 8)));
    CHECK(testutil::same_span(r.state(i), std::span<const double>(x.data(), 8)));
  }
  for (int i = 0; i < 10; ++i) {
    for (int s = 0; s < 4; ++s) {
      for (int j = 0; j < 4; ++j) {
        for (double v : r.stage(i, s, j)) CHECK(v == 0.0);
      }
    }
  }
}

TEST_CASE("rk4 single step on the decay equation") {
  const ModelSpec model = testutil::decay_model(1, 1);
  const double h = 0.01;
  const Trajectory t = rk4_full(model, State::Ones(1), TimeGrid::make(h, h));
  const double expected = 1 - h + h * h / 2 - h * h * h / 6 + h * h * h * h / 24;
  CHECK(t.terminal()[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(t.has_stages());
}

TEST_CASE("rk4 rejects noisy models and euler rejects an empty store") {
  const ModelSpec noisy = linear_flow(8, 2);
  CHECK_THROWS_AS(rk4_full(noisy, State::Zero(8), TimeGrid::make(0.01, 0.1)), UnsupportedError);
  CHECK_THROWS_AS(em_full(noisy, State::Zero(8), BrownianStore::deterministic(1, 4, 2), 0, TimeGrid::make(0.01, 0.1)),
                  ArgumentError);
}

TEST_CASE("lorenz 96 rk4 converges under step halving") {
  const ModelSpec model = lorenz96(40, 2);
  EquilibriumPriorOptions opt;
  opt.sim_length = 50.0;
  Rng rng = make_rng(3);
  const GaussianPrior prior = lorenz96_equilibrium_prior(model, opt, rng);
  Rng draw = make_rng(4);
  const State x = prior.sample(draw);
  const Trajectory coarse = rk4_full(model, x, TimeGrid::make(0.01, 0.4));
  const Trajectory fine = rk4_full(model, x, TimeGrid::make(0.005, 0.4));
  const Trajectory finer = rk4_full(model, x, TimeGrid::make(0.0025, 0.4));
  double e1 = 0.0;
  double e2 = 0.0;
  for (int k = 0; k < 40; ++k) {
    e1 = std::max(e1, std::abs(coarse.terminal()[k] - fine.terminal()[k]));
    e2 = std::max(e2, std::abs(fine.terminal()[k] - finer.terminal()[k]));
  }
  // Fourth order: each halving shrinks the difference about 16-fold.
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.2));
  CHECK(e1 < 1e-4);
  CHECK(e2 < 1e-5);
}

TEST_CASE("divergence is reported with its location") {
  amwg::DriftFn blowup = [](double, std::span<const double>, std::span<const double> c, std::span<const double>,
                            int, std::span<double> out) {
    for (std::size_t k = 0; k < c.size(); ++k) out[k] = c[k] * c[k] * 1e200;
  };
  const ModelSpec model(3, 1, blowup);
  State x = State::Zero(3);
  x[1] = 1.0;
  try {
    rk4_full(model, x, TimeGrid::make(0.1, 1.0));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.block() == 1);
    CHECK(e.step() >= 1);
  }
}

TEST_CASE("local solves without perturbation reproduce the base") {
  const ModelSpec lin = linear_flow(40, 2);
  const auto store = BrownianStore::sample(2, 2, 20, 2, 40, 0.01);
  const TimeGrid grid = TimeGrid::make(0.01, 0.4);
  const State x = random_state(40, 6);
  const Trajectory base = em_full(lin, x, store, 1, grid);
  for (int L : {0, 2, 5}) {
    const LocalPatch p = em_local(lin, x, base, store, 1, grid, 7, L);
    CHECK(p.halo() == kEulerHalo);
    CHECK(static_cast<int>(p.active_slots().size()) == 2 * L + 1);
    CHECK(patch_matches(p, base));
  }

  const ModelSpec l96 = lorenz96(40, 2);
  const State y = lorenz_state(40, 8);
  const Trajectory rb = rk4_full(l96, y, grid);
  for (int L : {1, 3}) {
    const LocalPatch p = rk4_local(l96, y, rb, grid, 19, L);
    CHECK(p.halo() == kRk4Halo);
    CHECK(patch_matches(p, rb));
  }
}

TEST_CASE("maximal radius reproduces the full solve bitwise") {
  const TimeGrid grid = TimeGrid::make(0.01, 0.4);
  for (int n : {20, 22, 40}) {
    const ModelSpec lin = linear_flow(n, 2);
    const int m = n / 2;
    const auto store = BrownianStore::sample(3, 1, m, 2, 40, 0.01);
    const State x = random_state(n, 10 + n);
    const Trajectory base = em_full(lin, x, store, 0, grid);
    for (int center : {0, m / 2, m - 1}) {
      State xp = x;
      xp.segment(2 * center, 2) += random_state(2, 99 + center);
      const Trajectory exact = em_full(lin, xp, store, 0, grid);
      LocalPatch p = em_local(lin, xp, base, store, 0, grid, center, max_radius(m));
      CHECK(p.covers_torus());
      CHECK(patch_matches(p, exact));
      Trajectory committed = base;
      commit_patch(committed, p);
      CHECK(committed == exact);
      // For odd m, L = (m-1)/2 already makes every block active. For even m
      // one block is left as frozen halo and the patch is only approximate.
      if (m % 2 == 1) {
        LocalPatch q = em_local(lin, xp, base, store, 0, grid, center, (m - 1) / 2);
        CHECK(q.covers_torus());
        CHECK(patch_matches(q, exact));
      }
    }

    const ModelSpec l96 = lorenz96(n, 2);
    const State y = lorenz_state(n, 20 + n);
    const Trajectory rb = rk4_full(l96, y, grid);
    for (int center : {0, m - 1}) {
      State yp = y;
      yp.segment(2 * center, 2) += random_state(2, 5 + center);
      const Trajectory exact = rk4_full(l96, yp, grid);
      Trajectory committed = rb;
      commit_patch(committed, rk4_local(l96, yp, rb, grid, center, max_radius(m)));
      CHECK(committed == exact);
      const State assembled = assemble_terminal(rb, rk4_local(l96, yp, rb, grid, center, max_radius(m)));
      CHECK(testutil::same_bits(assembled, exact.terminal()));
    }
  }
}

TEST_CASE("commit touches only the local domain") {
  const TimeGrid grid = TimeGrid::make(0.01, 0.4);
  const ModelSpec l96 = lorenz96(40, 2);
  const State y = lorenz_state(40, 31);
  const Trajectory rb = rk4_full(l96, y, grid);
  State yp = y;
  yp.segment(2 * 3, 2).array() += 0.5;
  const LocalPatch p = rk4_local(l96, yp, rb, grid, 3, 2);
  Trajectory committed = rb;
  commit_patch(committed, p);
  for (int i = 0; i <= grid.steps; ++i) {
    for (int j = 0; j < 20; ++j) {
      const bool inside = block_distance(j, 3, 20) <= 2;
      if (!inside) CHECK(testutil::same_span(committed.block(i, j), rb.block(i, j)));
    }
  }
  CHECK(testutil::same_span(committed.block(0, 3), std::span<const double>(yp.data() + 6, 2)));

  // A no-perturbation patch leaves the base unchanged.
  Trajectory again = rb;
  commit_patch(again, rk4_local(l96, y, rb, grid, 10, 4));
  CHECK(again == rb);
}

TEST_CASE("local solve contract checks") {
  const TimeGrid grid = TimeGrid::make(0.01, 0.4);
  const ModelSpec l96 = lorenz96(40, 2);
  const State y = lorenz_state(40, 41);
  const Trajectory rb = rk4_full(l96, y, grid);
  State bad = y;
  bad[2 * 8] += 1.0;
  CHECK_THROWS_AS(rk4_local(l96, bad, rb, grid, 3, 2), ContractViolation);
  CHECK_THROWS_AS(rk4_local(l96, y, rb, grid, 3, 11), ArgumentError);

  const ModelSpec dec = testutil::decay_model(20, 2, 0.0);
  const Trajectory no_stages = em_full(dec, y, BrownianStore::deterministic(1, 20, 2), 0, grid);
  CHECK_THROWS_AS(rk4_local(dec, y, no_stages, grid, 3, 2), ContractViolation);
}

TEST_CASE("local euler error is largest near the domain boundary") {
  // n = 8, b = 1, L = 2, perturb block 0 by +1: the error against the exact
  // solve is zero at the center at early times and grows toward the edge.
  const ModelSpec lin = linear_flow(8, 1);
  const TimeGrid grid = TimeGrid::make(0.01, 0.4);
  const auto store = BrownianStore::sample(4, 1, 8, 1, 40, 0.01);
  const State x = random_state(8, 50);
  const Trajectory base = em_full(lin, x, store, 0, grid);
  State xp = x;
  xp[0] += 1.0;
  const Trajectory exact = em_full(lin, xp, store, 0, grid);
  const LocalPatch p = em_local(lin, xp, base, store, 0, grid, 0, 2);
  auto max_err = [&](int j) {
    const int slot = p.active_slot_of(j);
    double e = 0.0;
    for (int i = 0; i <= grid.steps; ++i) e = std::max(e, std::abs(p.block(i, slot)[0] - exact.block(i, j)[0]));
    return e;
  };
  CHECK(max_err(0) < max_err(2));
  CHECK(max_err(0) < max_err(6));
  CHECK(max_err(2) > 0.0);
}

TEST_CASE("euler strong error halves with the step") {
  // dx = -x dt + sigma dW; coarse increments are standardized sums of the
  // reference increments so both solves follow the same Brownian path.
  const double sigma = 0.5;
  const ModelSpec model = testutil::decay_model(1, 1, 1.0, sigma);
  const int fine_steps = 1024;
  const int paths = 400;
  const auto fine = BrownianStore::sample(1000, paths, 1, 1, fine_steps);
  std::vector<double> reference(paths);
  for (int c = 0; c < paths; ++c) {
    reference[c] = em_full(model, State::Ones(1), fine, c, TimeGrid::make(1.0 / fine_steps, 1.0)).terminal()[0];
  }
  auto strong_error = [&](int coarse_steps) {
    const int ratio = fine_steps / coarse_steps;
    std::vector<double> data;
    for (int c = 0; c < paths; ++c) {
      for (int i = 0; i < coarse_steps; ++i) {
        double sum = 0.0;
        for (int r = 0; r < ratio; ++r) sum += fine.increment(c, i * ratio + r, 0)[0];
        data.push_back(sum / std::sqrt(static_cast<double>(ratio)));
      }
    }
    const auto coarse = BrownianStore::from_increments(paths, 1, 1, coarse_steps, 1.0 / coarse_steps, data);
    double err = 0.0;
    for (int c = 0; c < paths; ++c) {
      const double x = em_full(model, State::Ones(1), coarse, c, TimeGrid::make(1.0 / coarse_steps, 1.0)).terminal()[0];
      err += std::abs(x - reference[c]);
    }
    return err / paths;
  };
  const double e1 = strong_error(16);
  const double e2 = strong_error(32);
  CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.2));
}
