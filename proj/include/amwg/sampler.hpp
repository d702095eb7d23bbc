#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "amwg/brownian.hpp"
#include "amwg/integrate.hpp"
#include "amwg/likelihood.hpp"
#include "amwg/model.hpp"
#include "amwg/prior.hpp"
#include "amwg/random.hpp"

namespace amwg {

enum class SamplerKind { mwg, amwg };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::amwg;
  int sweeps = 1000;         // K
  int radius = 2;            // L, a-MwG only
  Scheme scheme = Scheme::rk4;
  TimeGrid grid{};
  // Acceptance ratio: full pseudo-marginal ratio, or the windowed version
  // restricted to `obs_window` components around the updated block.
  bool localized = false;
  int obs_window = 20;
  bool parallel_groups = false;  // a-MwG: update well-separated blocks concurrently
  bool random_scan = false;
  int resync_every = 0;          // full re-solve every N sweeps; 0 disables
  bool debug_checks = false;     // verify cached likelihood after every step
  std::uint64_t seed = 1;
};

// Non-owning bundle of the pieces that define the posterior.
struct Problem {
  const ModelSpec* model = nullptr;
  const GaussianPrior* prior = nullptr;
  const ObservationModel* obs = nullptr;
  const BrownianStore* store = nullptr;
};

struct ChainState {
  State x;
  std::vector<Trajectory> caches;  // one per realization, initial condition == x
  // Pseudo-marginal log-likelihood of x. Not maintained under localized
  // acceptance (the windowed ratio never needs it); see refresh().
  std::optional<double> log_lik;
  // Per-realization row terms of the quadratic form, kept by a-MwG under the
  // full ratio with diagonal noise so a proposal only re-evaluates the rows
  // that read its recomputed blocks.
  std::vector<PairwiseSum> row_sums;
  std::vector<long long> accepted;
  std::vector<long long> proposed;
};

// Groups of blocks whose pairwise torus distance is at least 2L + 2, so their
// local domains and boundary blocks are disjoint. Deterministic and uses the
// minimum number of groups, ceil(m / floor(m / (2L + 2))).
std::vector<std::vector<int>> parallel_block_schedule(int m, int radius);

class Sampler {
 public:
  Sampler(Problem problem, SamplerConfig config);

  const SamplerConfig& config() const { return config_; }
  const Problem& problem() const { return problem_; }
  int realizations() const { return problem_.store->realizations(); }

  ChainState initialize(const State& x0) const;
  ChainState initialize(Rng& rng) const;

  // One systematic (or random-scan) pass over all blocks.
  void mwg_sweep(ChainState& chain, Rng& rng) const;
  void amwg_sweep(ChainState& chain, Rng& rng, int sweep_index = 0) const;
  void sweep(ChainState& chain, Rng& rng, int sweep_index) const;

  // Full re-solve of every realization from chain.x plus an exact likelihood.
  void refresh(ChainState& chain) const;
  double log_lik_from_caches(const ChainState& chain) const;

 private:
  std::vector<int> scan_order(Rng& rng) const;
  void amwg_parallel_sweep(ChainState& chain, int sweep_index) const;
  bool metropolis(double log_ratio, Rng& rng) const;
  void verify(const ChainState& chain) const;
  void build_row_sums(ChainState& chain) const;

  Problem problem_;
  SamplerConfig config_;
  std::optional<ObservationWindows> windows_;
  std::vector<std::vector<int>> schedule_;
  bool incremental_ = false;
  std::vector<std::vector<int>> block_rows_;
};

struct ChainResult {
  Matrix samples;  // K x n, row k is x^k
  double seconds = 0.0;      // wall clock
  double cpu_seconds = 0.0;  // process CPU time, summed over threads
  std::vector<long long> accepted;
  std::vector<long long> proposed;
  ChainState final_state;
};

// Draws x^0 from the prior, builds the caches, then runs K sweeps. Timing
// covers the sweeps only.
ChainResult run_chain(const SamplerConfig& config, const Problem& problem);

}  // namespace amwg
