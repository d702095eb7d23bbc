#include "amwg/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <cmath>
#include <numeric>

#include "amwg/errors.hpp"
#include "amwg/parallel.hpp"

namespace amwg {

std::vector<std::vector<int>> parallel_block_schedule(int m, int radius) {
  if (m <= 0 || radius < 0) throw ArgumentError("parallel_block_schedule: invalid block count or radius");
  const int spacing = 2 * radius + 2;
  if (spacing > m) throw ArgumentError("parallel_block_schedule: need 2L + 2 <= m");
  // Cut the torus into q = floor(m / spacing) arcs of near-equal length
  // (each >= spacing); group r takes the r-th block of every arc long enough.
  const int arcs = m / spacing;
  const int base_len = m / arcs;
  const int longer = m % arcs;
  std::vector<int> starts;
  std::vector<int> lengths;
  for (int a = 0, pos = 0; a < arcs; ++a) {
    const int len = base_len + (a < longer ? 1 : 0);
    starts.push_back(pos);
    lengths.push_back(len);
    pos += len;
  }
  const int groups = base_len + (longer > 0 ? 1 : 0);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(groups));
  for (int r = 0; r < groups; ++r) {
    for (int a = 0; a < arcs; ++a) {
      if (r < lengths[static_cast<std::size_t>(a)]) out[static_cast<std::size_t>(r)].push_back(starts[static_cast<std::size_t>(a)] + r);
    }
  }
  return out;
}

Sampler::Sampler(Problem problem, SamplerConfig config) : problem_(problem), config_(config) {
  if (!problem_.model || !problem_.prior || !problem_.obs || !problem_.store) {
    throw ArgumentError("Sampler: problem is incomplete");
  }
  const ModelSpec& model = *problem_.model;
  const int m = model.blocks();
  if (config_.sweeps < 1) throw ArgumentError("Sampler: K must be at least 1");
  if (problem_.prior->dim() != model.dim() || problem_.prior->block_size() != model.block_size()) {
    throw ArgumentError("Sampler: prior does not match the model blocks");
  }
  if (problem_.obs->dim() != model.dim()) throw ArgumentError("Sampler: observation model does not match the model");
  if (problem_.store->blocks() != model.blocks() || problem_.store->block_size() != model.block_size()) {
    throw ArgumentError("Sampler: Brownian store does not match the model");
  }
  if (model.has_diffusion() && problem_.store->steps() < config_.grid.steps) {
    throw ArgumentError("Sampler: Brownian store is shorter than the time grid");
  }
  if (config_.scheme == Scheme::rk4 && model.has_diffusion()) {
    throw UnsupportedError("Sampler: RK4 requires a zero-diffusion model");
  }
  if (config_.kind == SamplerKind::amwg) {
    if (config_.radius < 0 || config_.radius > max_radius(m)) throw ArgumentError("Sampler: radius out of range");
    if ((config_.localized || config_.parallel_groups) && 2 * config_.radius + 2 > m) {
      throw ArgumentError("Sampler: localized or parallel a-MwG needs 2L + 2 <= m");
    }
    if (config_.localized) {
      windows_.emplace(*problem_.obs, m, model.block_size(), config_.obs_window);
    }
    if (config_.parallel_groups) schedule_ = parallel_block_schedule(m, config_.radius);
  }
  incremental_ = config_.kind == SamplerKind::amwg && !config_.localized && !config_.parallel_groups &&
                 problem_.obs->diagonal_noise();
  if (incremental_) block_rows_ = problem_.obs->rows_by_block(model.block_size());
}

double Sampler::log_lik_from_caches(const ChainState& chain) const { return pm_loglik(*problem_.obs, chain.caches); }

ChainState Sampler::initialize(const State& x0) const {
  ChainState chain;
  chain.x = x0;
  const int m = problem_.model->blocks();
  chain.accepted.assign(static_cast<std::size_t>(m), 0);
  chain.proposed.assign(static_cast<std::size_t>(m), 0);
  refresh(chain);
  return chain;
}

ChainState Sampler::initialize(Rng& rng) const { return initialize(problem_.prior->sample(rng)); }

void Sampler::refresh(ChainState& chain) const {
  const int S = realizations();
  chain.caches.resize(static_cast<std::size_t>(S));
  parallel_for(S, [&](int c) {
    chain.caches[static_cast<std::size_t>(c)] =
        solve_full(config_.scheme, *problem_.model, chain.x, *problem_.store, c, config_.grid);
  });
  chain.log_lik = log_lik_from_caches(chain);
  if (incremental_) build_row_sums(chain);
}

void Sampler::build_row_sums(ChainState& chain) const {
  chain.row_sums.clear();
  for (const auto& t : chain.caches) chain.row_sums.emplace_back(problem_.obs->row_terms(t.terminal_span()));
}

std::vector<int> Sampler::scan_order(Rng& rng) const {
  std::vector<int> order(static_cast<std::size_t>(problem_.model->blocks()));
  std::iota(order.begin(), order.end(), 0);
  if (config_.random_scan) std::shuffle(order.begin(), order.end(), rng);
  return order;
}

bool Sampler::metropolis(double log_ratio, Rng& rng) const {
  // The proposal is the prior conditional, so the prior cancels and the MH
  // ratio is the bare likelihood ratio.
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  return std::log(u) <= log_ratio;
}

void Sampler::verify(const ChainState& chain) const {
  if (!config_.debug_checks || !chain.log_lik) return;
  const double fresh = log_lik_from_caches(chain);
  if (fresh != *chain.log_lik) {
    throw ContractViolation("sampler: cached log-likelihood disagrees with the trajectory caches");
  }
  if (incremental_) {
    for (std::size_t c = 0; c < chain.caches.size(); ++c) {
      if (chain.row_sums[c].total() != problem_.obs->quadratic_form(chain.caches[c].terminal_span())) {
        throw ContractViolation("sampler: incremental row sums disagree with the trajectory caches");
      }
    }
  }
  if (config_.kind == SamplerKind::amwg) {
    for (const auto& t : chain.caches) {
      const auto x0 = t.state(0);
      if (!std::equal(x0.begin(), x0.end(), chain.x.data())) {
        throw ContractViolation("sampler: cache initial condition drifted from the chain state");
      }
    }
  }
}

void Sampler::mwg_sweep(ChainState& chain, Rng& rng) const {
  const ModelSpec& model = *problem_.model;
  const int b = model.block_size();
  const int S = realizations();
  std::vector<Trajectory> proposal_caches(static_cast<std::size_t>(S));
  if (!chain.log_lik) chain.log_lik = log_lik_from_caches(chain);

  for (int j : scan_order(rng)) {
    State xp = chain.x;
    xp.segment(j * b, b) = problem_.prior->conditional_block_sample(chain.x, j, rng);
    parallel_for(S, [&](int c) {
      proposal_caches[static_cast<std::size_t>(c)] =
          solve_full(config_.scheme, model, xp, *problem_.store, c, config_.grid);
    });
    const double proposal_ll = pm_loglik(*problem_.obs, proposal_caches);
    ++chain.proposed[static_cast<std::size_t>(j)];
    if (metropolis(proposal_ll - *chain.log_lik, rng)) {
      ++chain.accepted[static_cast<std::size_t>(j)];
      chain.x = std::move(xp);
      chain.caches.swap(proposal_caches);
      chain.log_lik = proposal_ll;
      verify(chain);
    }
  }
}

void Sampler::amwg_sweep(ChainState& chain, Rng& rng, int sweep_index) const {
  if (config_.parallel_groups) {
    amwg_parallel_sweep(chain, sweep_index);
    return;
  }
  const ModelSpec& model = *problem_.model;
  const int b = model.block_size();
  const int S = realizations();
  std::vector<LocalPatch> patches(static_cast<std::size_t>(S));
  std::vector<State> terminals(static_cast<std::size_t>(S));
  std::vector<std::span<const double>> terminal_spans(static_cast<std::size_t>(S));
  if (!config_.localized && !chain.log_lik) chain.log_lik = log_lik_from_caches(chain);
  std::vector<std::vector<std::pair<int, double>>> row_changes(static_cast<std::size_t>(S));
  std::vector<double> log_terms(static_cast<std::size_t>(S));
  std::vector<double> old_terms;
  std::vector<long long> row_seen;
  long long stamp = 0;
  if (incremental_) {
    if (chain.row_sums.size() != static_cast<std::size_t>(S)) build_row_sums(chain);
    row_seen.assign(static_cast<std::size_t>(problem_.obs->rows()), 0);
  }

  for (int j : scan_order(rng)) {
    State xp = chain.x;
    xp.segment(j * b, b) = problem_.prior->conditional_block_sample(chain.x, j, rng);
    parallel_for(S, [&](int c) {
      const auto cu = static_cast<std::size_t>(c);
      patches[cu] = solve_local(config_.scheme, model, xp, chain.caches[cu], *problem_.store, c, config_.grid, j,
                                config_.radius);
    });

    double log_ratio = 0.0;
    double proposal_ll = 0.0;
    if (config_.localized) {
      log_ratio = local_pm_log_ratio(*problem_.obs, *windows_, chain.caches, patches, j);
    } else if (incremental_) {
      // Only rows reading a recomputed block change. Each tree is updated in
      // place for the proposal and put back right away; accepted values are
      // reapplied at commit.
      for (int c = 0; c < S; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        const LocalPatch& patch = patches[cu];
        const auto base = chain.caches[cu].terminal_span();
        auto value = [&](int k) {
          const int slot = patch.active_slot_of(k / b);
          return slot >= 0 ? patch.block(patch.steps(), slot)[static_cast<std::size_t>(k % b)]
                           : base[static_cast<std::size_t>(k)];
        };
        auto& changes = row_changes[cu];
        changes.clear();
        ++stamp;
        for (int slot : patch.active_slots()) {
          for (int r : block_rows_[static_cast<std::size_t>(patch.block_of(slot))]) {
            if (row_seen[static_cast<std::size_t>(r)] == stamp) continue;
            row_seen[static_cast<std::size_t>(r)] = stamp;
            changes.push_back({r, problem_.obs->row_term(r, value)});
          }
        }
        PairwiseSum& sum = chain.row_sums[cu];
        old_terms.clear();
        for (const auto& [r, v] : changes) {
          old_terms.push_back(sum.leaf(r));
          sum.set(r, v);
        }
        log_terms[cu] = -0.5 * sum.total();
        for (std::size_t k = 0; k < changes.size(); ++k) sum.set(changes[k].first, old_terms[k]);
      }
      proposal_ll = log_mean_exp(log_terms);
      log_ratio = proposal_ll - *chain.log_lik;
    } else {
      for (int c = 0; c < S; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        terminals[cu] = assemble_terminal(chain.caches[cu], patches[cu]);
        terminal_spans[cu] = std::span<const double>(terminals[cu].data(), static_cast<std::size_t>(model.dim()));
      }
      proposal_ll = pm_loglik(*problem_.obs, terminal_spans);
      log_ratio = proposal_ll - *chain.log_lik;
    }

    ++chain.proposed[static_cast<std::size_t>(j)];
    if (metropolis(log_ratio, rng)) {
      ++chain.accepted[static_cast<std::size_t>(j)];
      chain.x = std::move(xp);
      for (int c = 0; c < S; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        commit_patch(chain.caches[cu], patches[cu]);
        if (incremental_) {
          for (const auto& [r, v] : row_changes[cu]) chain.row_sums[cu].set(r, v);
        }
      }
      if (config_.localized) {
        chain.log_lik.reset();
      } else {
        chain.log_lik = proposal_ll;
      }
      verify(chain);
    }
  }
}

void Sampler::amwg_parallel_sweep(ChainState& chain, int sweep_index) const {
  const ModelSpec& model = *problem_.model;
  const int b = model.block_size();
  const int S = realizations();
  if (!config_.localized && !chain.log_lik) chain.log_lik = log_lik_from_caches(chain);

  struct Outcome {
    State proposal;
    std::vector<LocalPatch> patches;
    bool accepted = false;
  };

  for (const auto& group : schedule_) {
    std::vector<Outcome> outcomes(group.size());
    // Members of a group touch disjoint cache slices; each block draws from
    // its own stream keyed by (seed, sweep, block).
    parallel_for(static_cast<int>(group.size()), [&](int g) {
      const int j = group[static_cast<std::size_t>(g)];
      Rng rng = make_rng(config_.seed, {0x67726f7570ULL, static_cast<std::uint64_t>(sweep_index),
                                        static_cast<std::uint64_t>(j)});
      Outcome& out = outcomes[static_cast<std::size_t>(g)];
      out.proposal = chain.x;
      out.proposal.segment(j * b, b) = problem_.prior->conditional_block_sample(chain.x, j, rng);
      out.patches.resize(static_cast<std::size_t>(S));
      for (int c = 0; c < S; ++c) {
        out.patches[static_cast<std::size_t>(c)] =
            solve_local(config_.scheme, model, out.proposal, chain.caches[static_cast<std::size_t>(c)],
                        *problem_.store, c, config_.grid, j, config_.radius);
      }
      double log_ratio = 0.0;
      if (config_.localized) {
        log_ratio = local_pm_log_ratio(*problem_.obs, *windows_, chain.caches, out.patches, j);
      } else {
        std::vector<State> terminals(static_cast<std::size_t>(S));
        std::vector<std::span<const double>> spans(static_cast<std::size_t>(S));
        for (int c = 0; c < S; ++c) {
          const auto cu = static_cast<std::size_t>(c);
          terminals[cu] = assemble_terminal(chain.caches[cu], out.patches[cu]);
          spans[cu] = std::span<const double>(terminals[cu].data(), static_cast<std::size_t>(model.dim()));
        }
        log_ratio = pm_loglik(*problem_.obs, spans) - *chain.log_lik;
      }
      out.accepted = metropolis(log_ratio, rng);
    });

    bool any = false;
    for (std::size_t g = 0; g < group.size(); ++g) {
      const int j = group[g];
      ++chain.proposed[static_cast<std::size_t>(j)];
      if (!outcomes[g].accepted) continue;
      any = true;
      ++chain.accepted[static_cast<std::size_t>(j)];
      chain.x.segment(j * b, b) = outcomes[g].proposal.segment(j * b, b);
      for (int c = 0; c < S; ++c) {
        commit_patch(chain.caches[static_cast<std::size_t>(c)], outcomes[g].patches[static_cast<std::size_t>(c)]);
      }
    }
    if (any) {
      if (config_.localized) {
        chain.log_lik.reset();
      } else {
        chain.log_lik = log_lik_from_caches(chain);
      }
      verify(chain);
    }
  }
}

void Sampler::sweep(ChainState& chain, Rng& rng, int sweep_index) const {
  if (config_.kind == SamplerKind::mwg) {
    mwg_sweep(chain, rng);
  } else {
    amwg_sweep(chain, rng, sweep_index);
  }
  if (config_.resync_every > 0 && (sweep_index + 1) % config_.resync_every == 0) refresh(chain);
}

ChainResult run_chain(const SamplerConfig& config, const Problem& problem) {
  const Sampler sampler(problem, config);
  Rng rng = make_rng(config.seed, {0x636861696eULL});
  ChainResult result;
  result.final_state = sampler.initialize(rng);
  ChainState& chain = result.final_state;
  const int n = problem.model->dim();
  result.samples.resize(config.sweeps, n);

  const auto start = std::chrono::steady_clock::now();
  const std::clock_t cpu_start = std::clock();
  for (int k = 0; k < config.sweeps; ++k) {
    sampler.sweep(chain, rng, k);
    result.samples.row(k) = chain.x.transpose();
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.cpu_seconds = static_cast<double>(std::clock() - cpu_start) / CLOCKS_PER_SEC;
  result.accepted = chain.accepted;
  result.proposed = chain.proposed;
  return result;
}

}  // namespace amwg
