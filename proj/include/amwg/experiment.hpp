#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "amwg/brownian.hpp"
#include "amwg/config.hpp"
#include "amwg/diagnostics.hpp"
#include "amwg/integrate.hpp"
#include "amwg/likelihood.hpp"
#include "amwg/model.hpp"
#include "amwg/prior.hpp"
#include "amwg/sampler.hpp"
#include "amwg/theory.hpp"

namespace amwg {

struct ExperimentConfig {
  // model
  std::string model = "lorenz96";  // lorenz96 | linear_flow
  int n = 40;
  int b = 2;
  double forcing = 8.0;
  LinearFlowParams linear{};
  // time grid and integrator
  double h = 0.01;
  double T = 0.4;
  std::string scheme = "auto";  // auto | rk4 | euler_maruyama
  // sampler
  std::string sampler = "amwg";  // mwg | amwg
  int L = 4;
  int S = 1;
  int K = 1000;
  int k0 = -1;  // -1 means K / 10
  std::string acceptance = "full";  // full | localized
  int obs_window = 20;
  bool parallel_groups = false;
  bool random_scan = false;
  int resync_every = 0;
  std::uint64_t seed = 1;
  // observations and prior
  std::string observe = "every_other";  // every_other | identity
  double obs_noise = -1.0;              // standard deviation; -1 picks the model default
  double prior_variance = 1.0;          // linear flow prior N(0, v I)
  int prior_taper = 2;                  // Lorenz equilibrium prior taper radius
  double prior_sim_length = 1000.0;
  // select-radius
  std::vector<int> radii{1, 2, 4};
  int trials = 500;
  int perturb_block = 0;
  // bench-scaling
  std::vector<int> bench_n{40, 80, 160, 320};
  int bench_sweeps = 5;
  int bench_repeats = 3;
  // exact-posterior
  int quad_steps = 400;

  static ExperimentConfig from_file(const ConfigFile& file);
  static ExperimentConfig load(const std::filesystem::path& path);

  // Cross-field checks; throws ArgumentError naming the field.
  void validate() const;
  int burn_in() const { return k0 < 0 ? K / 10 : k0; }
  double noise_std() const;
  Scheme resolved_scheme() const;
  // Flat key = value dump that round-trips through from_file.
  std::string echo() const;
};

// Everything a chain needs, built deterministically from the config seed.
struct Experiment {
  ExperimentConfig config;
  TimeGrid grid;
  Scheme scheme;
  ModelSpec model;
  GaussianPrior prior;
  ObservationModel obs;
  BrownianStore store;
  State truth;

  Problem problem() const { return {&model, &prior, &obs, &store}; }
  SamplerConfig sampler_config() const;
};

// Independent seeds per purpose (prior, truth, data noise, Brownian store, chain).
std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose);

ModelSpec build_model(const ExperimentConfig& cfg);
Experiment build_experiment(const ExperimentConfig& cfg);

struct RunOutput {
  ChainResult chain;
  ChainMetrics metrics;
  AcceptanceSummary acceptance;
};
RunOutput cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

std::vector<RadiusRow> cmd_select_radius(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                         std::ostream& log);

struct ScalingRow {
  int n = 0;
  std::string sampler;
  double seconds_per_sweep = 0.0;
};
struct ScalingResult {
  std::vector<ScalingRow> rows;
  double mwg_slope = 0.0;
  double amwg_slope = 0.0;
};
ScalingResult bench_scaling(const ExperimentConfig& cfg, std::ostream& log);
ScalingResult cmd_bench_scaling(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

PosteriorOracle cmd_exact_posterior(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                    std::ostream& log);

void write_samples_csv(const std::filesystem::path& path, const Matrix& samples);

}  // namespace amwg
