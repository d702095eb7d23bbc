#include "amwg/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>

#include "amwg/errors.hpp"
#include "amwg/parallel.hpp"

namespace amwg {

namespace {

void check_bound_inputs(const BoundInputs& in) {
  if (!(in.epsilon > 0.0)) throw ArgumentError("radius bound: epsilon must be positive");
  if (!(in.delta_sq > 0.0)) throw ArgumentError("radius bound: delta_sq must be positive");
  if (!(in.C_d > 0.0)) throw ArgumentError("radius bound: C_d must be positive");
  if (in.T < 0.0 || in.h < 0.0) throw ArgumentError("radius bound: T and h must be nonnegative");
}

double inf_norm_diff(std::span<const double> a, std::span<const double> b) {
  double out = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) out = std::max(out, std::abs(a[k] - b[k]));
  return out;
}

double inf_norm(std::span<const double> a) {
  double out = 0.0;
  for (double v : a) out = std::max(out, std::abs(v));
  return out;
}

double accept_prob(double log_ratio) { return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio); }

}  // namespace

double c1(double C_f, double C_sigma, double C_d) {
  return (std::exp(C_d) + std::exp(-C_d) + 1.0) * (C_f + C_sigma + 1.0);
}

double c2(double C_f, double C_sigma, double C_d) {
  return std::max(2.0 * C_f / c1(C_f, C_sigma, C_d), 1.0);
}

double radius_bound_continuous(const BoundInputs& in) {
  check_bound_inputs(in);
  const double C1 = c1(in.C_f, in.C_sigma, in.C_d);
  const double C2 = c2(in.C_f, in.C_sigma, in.C_d);
  return std::log(in.epsilon / (C2 * in.delta_sq)) / (-in.C_d) + 2.0 * C1 / in.C_d * in.T;
}

double radius_bound_discrete(const BoundInputs& in) {
  check_bound_inputs(in);
  const double C1 = c1(in.C_f, in.C_sigma, in.C_d);
  const double C2 = c2(in.C_f, in.C_sigma, in.C_d);
  return std::log(in.epsilon / (C2 * in.delta_sq)) / (-in.C_d) + 2.0 * C1 * (1.0 + in.h) / in.C_d * in.T;
}

double local_error_bound(const BoundInputs& in, int step, int radius) {
  if (!(in.C_d > 0.0)) throw ArgumentError("local_error_bound: C_d must be positive");
  if (in.delta_sq < 0.0) throw ArgumentError("local_error_bound: delta_sq must be nonnegative");
  if (step < 0 || radius < 0) throw ArgumentError("local_error_bound: step and radius must be nonnegative");
  const double C1 = c1(in.C_f, in.C_sigma, in.C_d);
  const double C2 = c2(in.C_f, in.C_sigma, in.C_d);
  const double t = step * in.h;
  return C2 * std::exp(2.0 * C1 * (1.0 + in.h) * t) * std::exp(-in.C_d * (radius + 1)) * in.delta_sq;
}

BoundSelection select_radius_by_bound(BoundInputs in, double cd_min, double cd_max, int grid) {
  if (!(cd_min > 0.0) || cd_max < cd_min || grid < 1) throw ArgumentError("select_radius_by_bound: bad C_d grid");
  BoundSelection best{-1, 0.0};
  for (int g = 0; g < grid; ++g) {
    const double frac = grid == 1 ? 0.0 : static_cast<double>(g) / (grid - 1);
    in.C_d = cd_min * std::pow(cd_max / cd_min, frac);
    const double bound = radius_bound_discrete(in);
    if (!std::isfinite(bound)) continue;
    const int L = std::max(0, static_cast<int>(std::ceil(bound)));
    if (best.radius < 0 || L < best.radius) best = {L, in.C_d};
  }
  if (best.radius < 0) throw AccuracyError("select_radius_by_bound: bound is not finite on the C_d grid");
  return best;
}

std::vector<RadiusRow> empirical_radius_select(const ModelSpec& model, const GaussianPrior& prior,
                                               const ObservationModel& obs, const BrownianStore& store,
                                               const std::vector<int>& radii, const RadiusSelectOptions& opt,
                                               Rng& rng) {
  if (opt.trials < 1) throw ArgumentError("empirical_radius_select: trials must be at least 1");
  if (radii.empty()) throw ArgumentError("empirical_radius_select: no radii given");
  const int m = model.blocks();
  const int b = model.block_size();
  if (opt.block < 0 || opt.block >= m) throw ArgumentError("empirical_radius_select: block out of range");
  for (int L : radii) {
    if (L < 0 || L > max_radius(m)) throw ArgumentError("empirical_radius_select: radius out of range");
  }
  std::optional<ObservationWindows> windows;
  if (opt.localized) windows.emplace(obs, m, b, opt.obs_window);

  const int S = store.realizations();
  const std::size_t R = radii.size();
  const std::uint64_t base_seed = rng();

  // Per trial: sum over realizations of ||x^l - x^p||_inf per radius,
  // sum of ||x^p||_inf, and |alpha - alpha'| per radius.
  std::vector<std::vector<double>> num(static_cast<std::size_t>(opt.trials), std::vector<double>(R, 0.0));
  std::vector<std::vector<double>> alpha_err(static_cast<std::size_t>(opt.trials), std::vector<double>(R, 0.0));
  std::vector<double> den(static_cast<std::size_t>(opt.trials), 0.0);

  parallel_for(opt.trials, [&](int t) {
    const auto tu = static_cast<std::size_t>(t);
    Rng trial_rng = make_rng(base_seed, {0x7261646975ULL, static_cast<std::uint64_t>(t)});
    const State xo = prior.sample(trial_rng);
    State xp = xo;
    xp.segment(opt.block * b, b) = prior.conditional_block_sample(xo, opt.block, trial_rng);

    std::vector<Trajectory> base(static_cast<std::size_t>(S));
    std::vector<Trajectory> exact(static_cast<std::size_t>(S));
    for (int c = 0; c < S; ++c) {
      base[static_cast<std::size_t>(c)] = solve_full(opt.scheme, model, xo, store, c, opt.grid);
      exact[static_cast<std::size_t>(c)] = solve_full(opt.scheme, model, xp, store, c, opt.grid);
      den[tu] += inf_norm(exact[static_cast<std::size_t>(c)].terminal_span());
    }
    const double ll_o = pm_loglik(obs, base);
    const double alpha = accept_prob(pm_loglik(obs, exact) - ll_o);

    for (std::size_t r = 0; r < R; ++r) {
      std::vector<LocalPatch> patches(static_cast<std::size_t>(S));
      std::vector<State> terminals(static_cast<std::size_t>(S));
      std::vector<std::span<const double>> spans(static_cast<std::size_t>(S));
      for (int c = 0; c < S; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        patches[cu] = solve_local(opt.scheme, model, xp, base[cu], store, c, opt.grid, opt.block, radii[r]);
        terminals[cu] = assemble_terminal(base[cu], patches[cu]);
        spans[cu] = std::span<const double>(terminals[cu].data(), static_cast<std::size_t>(model.dim()));
        num[tu][r] += inf_norm_diff(spans[cu], exact[cu].terminal_span());
      }
      const double log_ratio = windows ? local_pm_log_ratio(obs, *windows, base, patches, opt.block)
                                       : pm_loglik(obs, spans) - ll_o;
      alpha_err[tu][r] = std::abs(alpha - accept_prob(log_ratio));
    }
  });

  double den_total = 0.0;
  for (double d : den) den_total += d;
  std::vector<RadiusRow> rows;
  for (std::size_t r = 0; r < R; ++r) {
    double n_total = 0.0;
    double a_total = 0.0;
    for (int t = 0; t < opt.trials; ++t) {
      n_total += num[static_cast<std::size_t>(t)][r];
      a_total += alpha_err[static_cast<std::size_t>(t)][r];
    }
    rows.push_back({radii[r], a_total / opt.trials, den_total > 0.0 ? n_total / den_total : 0.0});
  }
  return rows;
}

void write_radius_table(std::ostream& os, const std::vector<RadiusRow>& rows) {
  os << "L,err_alpha,err_phi\n";
  os << std::setprecision(10);
  for (const auto& r : rows) os << r.radius << ',' << r.err_alpha << ',' << r.err_phi << '\n';
}

std::vector<double> perturbation_profile(const ModelSpec& model, const GaussianPrior& prior,
                                         const BrownianStore& store, Scheme scheme, const TimeGrid& grid,
                                         int trials, int block, Rng& rng) {
  if (trials < 1) throw ArgumentError("perturbation_profile: trials must be at least 1");
  const int m = model.blocks();
  const int b = model.block_size();
  if (block < 0 || block >= m) throw ArgumentError("perturbation_profile: block out of range");
  const int S = store.realizations();
  const int D = m / 2;
  std::vector<int> per_distance(static_cast<std::size_t>(D + 1), 0);
  for (int j = 0; j < m; ++j) ++per_distance[static_cast<std::size_t>(block_distance(j, block, m))];

  const std::uint64_t base_seed = rng();
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(trials), std::vector<double>(D + 1, 0.0));
  parallel_for(trials, [&](int t) {
    Rng trial_rng = make_rng(base_seed, {0x6465636179ULL, static_cast<std::uint64_t>(t)});
    const State xo = prior.sample(trial_rng);
    State xp = xo;
    xp.segment(block * b, b) = prior.conditional_block_sample(xo, block, trial_rng);
    for (int c = 0; c < S; ++c) {
      const Trajectory a = solve_full(scheme, model, xo, store, c, grid);
      const Trajectory p = solve_full(scheme, model, xp, store, c, grid);
      for (int j = 0; j < m; ++j) {
        const auto xa = a.block(a.steps(), j);
        const auto xb = p.block(p.steps(), j);
        double sq = 0.0;
        for (int k = 0; k < b; ++k) sq += (xa[k] - xb[k]) * (xa[k] - xb[k]);
        sums[static_cast<std::size_t>(t)][static_cast<std::size_t>(block_distance(j, block, m))] += sq;
      }
    }
  });

  std::vector<double> out(static_cast<std::size_t>(D + 1), 0.0);
  for (int d = 0; d <= D; ++d) {
    double total = 0.0;
    for (int t = 0; t < trials; ++t) total += sums[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)];
    out[static_cast<std::size_t>(d)] = total / (static_cast<double>(trials) * S * per_distance[static_cast<std::size_t>(d)]);
  }
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 3) throw ArgumentError("fit_line: need at least three paired points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (sxx == 0.0) throw ArgumentError("fit_line: x values are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = y[k] - fit.intercept - fit.slope * x[k];
    sse += e * e;
  }
  const double dof = static_cast<double>(n) - 2.0;
  fit.slope_stderr = std::sqrt(sse / dof / sxx);
  if (fit.slope_stderr == 0.0) {
    fit.p_value = fit.slope == 0.0 ? 1.0 : 0.0;
  } else {
    const boost::math::students_t dist(dof);
    fit.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.slope / fit.slope_stderr)));
  }
  return fit;
}

}  // namespace amwg
