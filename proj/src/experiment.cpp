#include "amwg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "amwg/errors.hpp"

namespace amwg {

namespace {

const std::set<std::string> kKnownKeys = {
    "model", "n", "b", "forcing", "grid_spacing", "diffusivity", "damping", "advection", "noise", "h", "T",
    "scheme", "sampler", "L", "S", "K", "k0", "acceptance", "obs_window", "parallel_groups", "random_scan",
    "resync_every", "seed", "observe", "obs_noise", "prior_variance", "prior_taper", "prior_sim_length", "radii",
    "trials", "perturb_block", "bench_n", "bench_sweeps", "bench_repeats", "quad_steps"};

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw ArgumentError("config field '" + field + "': " + why);
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string list(const std::vector<int>& v) {
  std::string out = "[";
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + std::to_string(v[k]);
  return out + "]";
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ArgumentError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const ConfigFile& f) {
  f.reject_unknown(kKnownKeys);
  ExperimentConfig c;
  c.model = f.get_string("model", c.model);
  c.n = static_cast<int>(f.get_int("n", c.n));
  c.b = static_cast<int>(f.get_int("b", c.b));
  c.forcing = f.get_double("forcing", c.forcing);
  c.linear.grid = f.get_double("grid_spacing", c.linear.grid);
  c.linear.diffusivity = f.get_double("diffusivity", c.linear.diffusivity);
  c.linear.damping = f.get_double("damping", c.linear.damping);
  c.linear.advection = f.get_double("advection", c.linear.advection);
  c.linear.noise = f.get_double("noise", c.linear.noise);
  c.h = f.get_double("h", c.h);
  c.T = f.get_double("T", c.T);
  c.scheme = f.get_string("scheme", c.scheme);
  c.sampler = f.get_string("sampler", c.sampler);
  c.L = static_cast<int>(f.get_int("L", c.L));
  c.S = static_cast<int>(f.get_int("S", c.S));
  c.K = static_cast<int>(f.get_int("K", c.K));
  c.k0 = static_cast<int>(f.get_int("k0", c.k0));
  c.acceptance = f.get_string("acceptance", c.acceptance);
  c.obs_window = static_cast<int>(f.get_int("obs_window", c.obs_window));
  c.parallel_groups = f.get_bool("parallel_groups", c.parallel_groups);
  c.random_scan = f.get_bool("random_scan", c.random_scan);
  c.resync_every = static_cast<int>(f.get_int("resync_every", c.resync_every));
  c.seed = f.get_u64("seed", c.seed);
  c.observe = f.get_string("observe", c.observe);
  c.obs_noise = f.get_double("obs_noise", c.obs_noise);
  c.prior_variance = f.get_double("prior_variance", c.prior_variance);
  c.prior_taper = static_cast<int>(f.get_int("prior_taper", c.prior_taper));
  c.prior_sim_length = f.get_double("prior_sim_length", c.prior_sim_length);
  c.radii = f.get_int_list("radii", c.radii);
  c.trials = static_cast<int>(f.get_int("trials", c.trials));
  c.perturb_block = static_cast<int>(f.get_int("perturb_block", c.perturb_block));
  c.bench_n = f.get_int_list("bench_n", c.bench_n);
  c.bench_sweeps = static_cast<int>(f.get_int("bench_sweeps", c.bench_sweeps));
  c.bench_repeats = static_cast<int>(f.get_int("bench_repeats", c.bench_repeats));
  c.quad_steps = static_cast<int>(f.get_int("quad_steps", c.quad_steps));
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_file(ConfigFile::load(path));
}

double ExperimentConfig::noise_std() const {
  if (obs_noise >= 0.0) return obs_noise;
  return model == "linear_flow" ? 0.1 : 1.0;
}

Scheme ExperimentConfig::resolved_scheme() const {
  if (scheme == "rk4") return Scheme::rk4;
  if (scheme == "euler_maruyama") return Scheme::euler_maruyama;
  const bool noisy = model == "linear_flow" && linear.noise != 0.0;
  return noisy ? Scheme::euler_maruyama : Scheme::rk4;
}

void ExperimentConfig::validate() const {
  if (model != "lorenz96" && model != "linear_flow") invalid("model", "must be \"lorenz96\" or \"linear_flow\"");
  if (b < 1) invalid("b", "must be at least 1");
  if (n < 1) invalid("n", "must be positive");
  if (n % b != 0) invalid("n", "must be divisible by b");
  const int m = n / b;
  if (model == "lorenz96") {
    if (n % 2 != 0 || n < 4) invalid("n", "Lorenz 96 needs an even n >= 4");
    if (b < 2) invalid("b", "Lorenz 96 needs b >= 2");
  }
  if (!(h > 0.0)) invalid("h", "must be positive");
  if (!(T > 0.0)) invalid("T", "must be positive");
  const double ratio = T / h;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) invalid("T", "T / h must be an integer");
  if (scheme != "auto" && scheme != "rk4" && scheme != "euler_maruyama") {
    invalid("scheme", "must be \"auto\", \"rk4\" or \"euler_maruyama\"");
  }
  if (resolved_scheme() == Scheme::rk4 && model == "linear_flow" && linear.noise != 0.0) {
    invalid("scheme", "rk4 needs a zero-noise model");
  }
  if (sampler != "mwg" && sampler != "amwg") invalid("sampler", "must be \"mwg\" or \"amwg\"");
  if (acceptance != "full" && acceptance != "localized") invalid("acceptance", "must be \"full\" or \"localized\"");
  if (L < 0 || L > m / 2) invalid("L", "must lie in [0, m/2] with m = n/b");
  const bool needs_gap = sampler == "amwg" && (acceptance == "localized" || parallel_groups);
  if (needs_gap && 2 * L + 2 > m) invalid("L", "localized or parallel a-MwG needs 2L + 2 <= n/b");
  if (S < 1) invalid("S", "must be at least 1");
  if (K < 1) invalid("K", "must be at least 1");
  if (k0 >= K) invalid("k0", "burn-in must be smaller than K");
  if (k0 < -1) invalid("k0", "must be nonnegative (or -1 for K/10)");
  if (obs_window < b) invalid("obs_window", "must be at least b");
  if (resync_every < 0) invalid("resync_every", "must be nonnegative");
  if (observe != "every_other" && observe != "identity") invalid("observe", "must be \"every_other\" or \"identity\"");
  if (observe == "every_other" && n % 2 != 0) invalid("observe", "every_other needs an even n");
  if (obs_noise < 0.0 && obs_noise != -1.0) invalid("obs_noise", "must be positive (or -1 for the model default)");
  if (obs_noise == 0.0) invalid("obs_noise", "must be positive");
  if (!(prior_variance > 0.0)) invalid("prior_variance", "must be positive");
  if (prior_taper < 0) invalid("prior_taper", "must be nonnegative");
  if (!(prior_sim_length > 0.0)) invalid("prior_sim_length", "must be positive");
  if (radii.empty()) invalid("radii", "must not be empty");
  for (int r : radii) {
    if (r < 0 || r > m / 2) invalid("radii", "every radius must lie in [0, m/2]");
  }
  if (trials < 1) invalid("trials", "must be at least 1");
  if (perturb_block < 0 || perturb_block >= m) invalid("perturb_block", "must be a block index in [0, m)");
  if (bench_n.size() < 2) invalid("bench_n", "needs at least two sizes");
  if (!std::is_sorted(bench_n.begin(), bench_n.end())) invalid("bench_n", "must be sorted ascending");
  for (int v : bench_n) {
    if (v % b != 0 || v < 4) invalid("bench_n", "every size must be divisible by b and at least 4");
  }
  if (bench_sweeps < 1) invalid("bench_sweeps", "must be at least 1");
  if (bench_repeats < 1) invalid("bench_repeats", "must be at least 1");
  if (quad_steps < 2) invalid("quad_steps", "must be at least 2");
}

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  os << "model = " << quoted(model) << "\n"
     << "n = " << n << "\n"
     << "b = " << b << "\n"
     << "forcing = " << num(forcing) << "\n"
     << "grid_spacing = " << num(linear.grid) << "\n"
     << "diffusivity = " << num(linear.diffusivity) << "\n"
     << "damping = " << num(linear.damping) << "\n"
     << "advection = " << num(linear.advection) << "\n"
     << "noise = " << num(linear.noise) << "\n"
     << "h = " << num(h) << "\n"
     << "T = " << num(T) << "\n"
     << "scheme = " << quoted(scheme) << "\n"
     << "sampler = " << quoted(sampler) << "\n"
     << "L = " << L << "\n"
     << "S = " << S << "\n"
     << "K = " << K << "\n"
     << "k0 = " << k0 << "\n"
     << "acceptance = " << quoted(acceptance) << "\n"
     << "obs_window = " << obs_window << "\n"
     << "parallel_groups = " << (parallel_groups ? "true" : "false") << "\n"
     << "random_scan = " << (random_scan ? "true" : "false") << "\n"
     << "resync_every = " << resync_every << "\n"
     << "seed = " << seed << "\n"
     << "observe = " << quoted(observe) << "\n"
     << "obs_noise = " << num(obs_noise) << "\n"
     << "prior_variance = " << num(prior_variance) << "\n"
     << "prior_taper = " << prior_taper << "\n"
     << "prior_sim_length = " << num(prior_sim_length) << "\n"
     << "radii = " << list(radii) << "\n"
     << "trials = " << trials << "\n"
     << "perturb_block = " << perturb_block << "\n"
     << "bench_n = " << list(bench_n) << "\n"
     << "bench_sweeps = " << bench_sweeps << "\n"
     << "bench_repeats = " << bench_repeats << "\n"
     << "quad_steps = " << quad_steps << "\n";
  return os.str();
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose) {
  // FNV-1a of the purpose string as the stream tag.
  std::uint64_t tag = 1469598103934665603ULL;
  for (unsigned char ch : purpose) {
    tag ^= ch;
    tag *= 1099511628211ULL;
  }
  Rng rng = make_rng(seed, {tag});
  return rng();
}

ModelSpec build_model(const ExperimentConfig& cfg) {
  if (cfg.model == "lorenz96") return lorenz96(cfg.n, cfg.b, cfg.forcing);
  return linear_flow(cfg.n, cfg.b, cfg.linear);
}

namespace {

GaussianPrior build_prior(const ExperimentConfig& cfg, const ModelSpec& model) {
  if (cfg.model == "linear_flow") {
    return GaussianPrior(Vector::Zero(cfg.n), cfg.prior_variance * Matrix::Identity(cfg.n, cfg.n), cfg.b);
  }
  EquilibriumPriorOptions opt;
  opt.taper_radius = cfg.prior_taper;
  opt.sim_length = cfg.prior_sim_length;
  Rng rng = make_rng(derive_seed(cfg.seed, "prior"));
  return lorenz96_equilibrium_prior(model, opt, rng);
}

ObservationModel build_observations(const ExperimentConfig& cfg, const ModelSpec& model, const GaussianPrior& prior,
                                    const TimeGrid& grid, Scheme scheme, State& truth) {
  SparseRows H = cfg.observe == "every_other" ? ObservationModel::every_other(cfg.n) : ObservationModel::identity(cfg.n);
  const auto rows = H.rows();
  const double sd = cfg.noise_std();
  Rng truth_rng = make_rng(derive_seed(cfg.seed, "truth"));
  truth = prior.sample(truth_rng);
  // The data path gets its own Brownian realization, independent of the
  // S realizations the sampler uses.
  const BrownianStore path = model.has_diffusion()
                                 ? BrownianStore::sample(derive_seed(cfg.seed, "data-path"), 1, model.blocks(),
                                                         model.block_size(), grid.steps, grid.h)
                                 : BrownianStore::deterministic(1, model.blocks(), model.block_size());
  const Trajectory traj = solve_full(scheme, model, truth, path, 0, grid);
  Vector hx = Vector::Zero(rows);
  {
    const auto xT = traj.terminal_span();
    Eigen::Map<const Vector> x(xT.data(), static_cast<Eigen::Index>(xT.size()));
    hx = H * x;
  }
  Rng noise_rng = make_rng(derive_seed(cfg.seed, "data-noise"));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) y[r] = hx[r] + sd * normal(noise_rng);
  return ObservationModel(std::move(H), sd * sd * Matrix::Identity(rows, rows), std::move(y));
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const TimeGrid grid = TimeGrid::make(cfg.h, cfg.T);
  const Scheme scheme = cfg.resolved_scheme();
  ModelSpec model = build_model(cfg);
  GaussianPrior prior = build_prior(cfg, model);
  State truth;
  ObservationModel obs = build_observations(cfg, model, prior, grid, scheme, truth);
  BrownianStore store = model.has_diffusion()
                            ? BrownianStore::sample(derive_seed(cfg.seed, "brownian"), cfg.S, model.blocks(),
                                                    model.block_size(), grid.steps, grid.h)
                            : BrownianStore::deterministic(cfg.S, model.blocks(), model.block_size());
  return Experiment{cfg, grid, scheme, std::move(model), std::move(prior), std::move(obs), std::move(store),
                    std::move(truth)};
}

SamplerConfig Experiment::sampler_config() const {
  SamplerConfig sc;
  sc.kind = config.sampler == "mwg" ? SamplerKind::mwg : SamplerKind::amwg;
  sc.sweeps = config.K;
  sc.radius = config.L;
  sc.scheme = scheme;
  sc.grid = grid;
  sc.localized = config.acceptance == "localized";
  sc.obs_window = config.obs_window;
  sc.parallel_groups = config.parallel_groups;
  sc.random_scan = config.random_scan;
  sc.resync_every = config.resync_every;
  sc.seed = derive_seed(config.seed, "chain");
  return sc;
}

void write_samples_csv(const std::filesystem::path& path, const Matrix& samples) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index k = 0; k < samples.rows(); ++k) {
    for (Eigen::Index c = 0; c < samples.cols(); ++c) out << (c ? "," : "") << samples(k, c);
    out << '\n';
  }
}

RunOutput cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  log << "# resolved config\n" << cfg.echo();
  const Experiment ex = build_experiment(cfg);
  RunOutput out;
  out.chain = run_chain(ex.sampler_config(), ex.problem());
  const int k0 = cfg.burn_in();
  out.acceptance = acceptance_rate(out.chain.accepted, out.chain.proposed);
  out.metrics.acceptance = out.acceptance.overall;
  out.metrics.seconds = out.chain.seconds;
  out.metrics.mse = mse(out.chain.samples, ex.truth, k0);
  out.metrics.msv = msv(out.chain.samples, k0);
  out.metrics.k0 = k0;

  ensure_dir(out_dir);
  write_samples_csv(out_dir / "samples.csv", out.chain.samples);
  nlohmann::json report = nlohmann::json::parse(metrics_json(out.metrics, out.acceptance));
  report["seed"] = cfg.seed;
  report["config"] = cfg.echo();
  write_text(out_dir / "metrics.json", report.dump(2) + "\n");
  write_text(out_dir / "config.toml", cfg.echo());
  {
    std::ofstream t(out_dir / "truth.csv");
    t << std::setprecision(17);
    for (Eigen::Index k = 0; k < ex.truth.size(); ++k) t << ex.truth[k] << '\n';
  }
  log << "AR " << out.metrics.acceptance << "  CT " << out.metrics.seconds << " s  MSE " << out.metrics.mse
      << "  MSV " << out.metrics.msv << "\n";
  return out;
}

std::vector<RadiusRow> cmd_select_radius(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                         std::ostream& log) {
  log << "# resolved config\n" << cfg.echo();
  const Experiment ex = build_experiment(cfg);
  RadiusSelectOptions opt;
  opt.scheme = ex.scheme;
  opt.grid = ex.grid;
  opt.trials = cfg.trials;
  opt.block = cfg.perturb_block;
  opt.localized = cfg.acceptance == "localized";
  opt.obs_window = cfg.obs_window;
  Rng rng = make_rng(derive_seed(cfg.seed, "select-radius"));
  const auto rows = empirical_radius_select(ex.model, ex.prior, ex.obs, ex.store, cfg.radii, opt, rng);
  ensure_dir(out_dir);
  std::ofstream out(out_dir / "radius_table.csv");
  if (!out) throw ArgumentError("cannot write radius_table.csv");
  write_radius_table(out, rows);
  write_radius_table(log, rows);
  return rows;
}

ScalingResult bench_scaling(const ExperimentConfig& cfg, std::ostream& log) {
  ScalingResult result;
  std::vector<double> logn;
  std::vector<double> log_mwg;
  std::vector<double> log_amwg;
  std::vector<Experiment> experiments;
  for (int n : cfg.bench_n) {
    ExperimentConfig c = cfg;
    c.n = n;
    c.K = cfg.bench_sweeps;
    c.k0 = 0;
    c.obs_window = std::min(cfg.obs_window, n);
    c.validate();
    experiments.push_back(build_experiment(c));
    logn.push_back(std::log(static_cast<double>(n)));
  }
  // CPU time rather than wall clock: on a shared host the wall clock also
  // counts time spent descheduled. Repeats go round-robin over every
  // (n, sampler) pair so a slow spell hits all sizes alike; the minimum per
  // pair is kept.
  const SamplerKind kinds[] = {SamplerKind::mwg, SamplerKind::amwg};
  std::vector<double> best(experiments.size() * 2, std::numeric_limits<double>::infinity());
  for (int r = 0; r < cfg.bench_repeats; ++r) {
    for (std::size_t e = 0; e < experiments.size(); ++e) {
      for (int k = 0; k < 2; ++k) {
        SamplerConfig sc = experiments[e].sampler_config();
        sc.kind = kinds[k];
        const double t = run_chain(sc, experiments[e].problem()).cpu_seconds / cfg.bench_sweeps;
        best[e * 2 + k] = std::min(best[e * 2 + k], t);
      }
    }
  }
  for (std::size_t e = 0; e < experiments.size(); ++e) {
    const int n = experiments[e].config.n;
    for (int k = 0; k < 2; ++k) {
      const char* name = k == 0 ? "mwg" : "amwg";
      const double t = best[e * 2 + k];
      result.rows.push_back({n, name, t});
      (k == 0 ? log_mwg : log_amwg).push_back(std::log(t));
      log << "n " << n << "  " << name << "  " << t << " s/sweep\n";
    }
  }
  // Least-squares slope without the p-value machinery (two points allowed).
  auto slope = [&](const std::vector<double>& y) {
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      mx += logn[k];
      my += y[k];
    }
    mx /= y.size();
    my /= y.size();
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      sxy += (logn[k] - mx) * (y[k] - my);
      sxx += (logn[k] - mx) * (logn[k] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
  };
  result.mwg_slope = slope(log_mwg);
  result.amwg_slope = slope(log_amwg);
  log << "slope mwg " << result.mwg_slope << "  amwg " << result.amwg_slope << "\n";
  return result;
}

ScalingResult cmd_bench_scaling(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  log << "# resolved config\n" << cfg.echo();
  const ScalingResult result = bench_scaling(cfg, log);
  ensure_dir(out_dir);
  std::ofstream out(out_dir / "scaling.csv");
  if (!out) throw ArgumentError("cannot write scaling.csv");
  out << "n,sampler,seconds_per_sweep\n" << std::setprecision(10);
  for (const auto& r : result.rows) out << r.n << ',' << r.sampler << ',' << r.seconds_per_sweep << '\n';
  out << "slope,mwg," << result.mwg_slope << '\n';
  out << "slope,amwg," << result.amwg_slope << '\n';
  return result;
}

PosteriorOracle cmd_exact_posterior(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                    std::ostream& log) {
  if (cfg.model != "linear_flow") throw UnsupportedError("exact-posterior: only the linear_flow model is supported");
  log << "# resolved config\n" << cfg.echo();
  const Experiment ex = build_experiment(cfg);
  const PosteriorOracle oracle = exact_linear_posterior(ex.model, ex.prior, ex.obs, cfg.T, cfg.quad_steps);
  ensure_dir(out_dir);
  nlohmann::json j;
  j["mean"] = std::vector<double>(oracle.mean.data(), oracle.mean.data() + oracle.mean.size());
  const Vector diag = oracle.covariance.diagonal();
  j["variance"] = std::vector<double>(diag.data(), diag.data() + diag.size());
  j["mean_variance"] = oracle.mean_variance();
  j["quad_steps"] = oracle.quad_steps;
  j["seed"] = cfg.seed;
  write_text(out_dir / "posterior.json", j.dump(2) + "\n");
  log << "mean posterior variance " << std::setprecision(10) << oracle.mean_variance() << "\n";
  return oracle;
}

}  // namespace amwg
