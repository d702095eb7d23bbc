#include "amwg/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "amwg/errors.hpp"

namespace amwg {

TimeGrid TimeGrid::make(double h, double T) {
  if (!(h > 0.0) || !(T > 0.0)) throw ArgumentError("time grid: h and T must be positive");
  const double ratio = T / h;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ArgumentError("time grid: T/h must be an integer");
  }
  return TimeGrid{h, T, static_cast<int>(rounded)};
}

Trajectory::Trajectory(int steps, int blocks, int block_size, bool with_stages)
    : steps_(steps), m_(blocks), b_(block_size) {
  if (steps < 0 || blocks <= 0 || block_size <= 0) throw ArgumentError("Trajectory: invalid dimensions");
  values_.assign(static_cast<std::size_t>(steps + 1) * dim(), 0.0);
  if (with_stages) stages_.assign(static_cast<std::size_t>(steps) * 4 * dim(), 0.0);
}

State Trajectory::initial() const {
  const auto s = state(0);
  return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

State Trajectory::terminal() const {
  const auto s = state(steps_);
  return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

namespace {

using CSpan = std::span<const double>;
using MSpan = std::span<double>;

struct Scratch {
  explicit Scratch(int b)
      : f(static_cast<std::size_t>(b)),
        sigma(static_cast<std::size_t>(b) * b),
        left(static_cast<std::size_t>(b)),
        center(static_cast<std::size_t>(b)),
        right(static_cast<std::size_t>(b)) {}
  std::vector<double> f, sigma, left, center, right;
};

// Euler-Maruyama update of one block. `w` is empty for drift-only models.
void em_block(const ModelSpec& model, double t, double h, double sqrt_h, CSpan xl, CSpan xc, CSpan xr, CSpan w,
              int block, MSpan out, Scratch& s) {
  const std::size_t b = xc.size();
  model.drift(t, xl, xc, xr, block, s.f);
  if (!w.empty()) {
    model.diffusion(t, xc, block, s.sigma);
    for (std::size_t k = 0; k < b; ++k) {
      double noise = 0.0;
      for (std::size_t l = 0; l < b; ++l) noise += s.sigma[k * b + l] * w[l];
      out[k] = xc[k] + noise * sqrt_h + s.f[k] * h;
    }
  } else {
    for (std::size_t k = 0; k < b; ++k) out[k] = xc[k] + s.f[k] * h;
  }
}

constexpr double kStageShift[4] = {0.0, 0.5, 0.5, 1.0};

// k^s_j = h f(t_s, x_{j-1} + c k^{s-1}_{j-1}, x_j + c k^{s-1}_j, x_{j+1} + c k^{s-1}_{j+1}).
// The previous-stage spans are empty for s = 0.
void rk4_stage_block(const ModelSpec& model, double t, double h, int s, CSpan xl, CSpan xc, CSpan xr, CSpan kl,
                     CSpan kc, CSpan kr, int block, MSpan out, Scratch& sc) {
  const std::size_t b = xc.size();
  const double ts = t + kStageShift[s] * h;
  if (s == 0) {
    model.drift(ts, xl, xc, xr, block, sc.f);
  } else {
    const double c = kStageShift[s];
    for (std::size_t k = 0; k < b; ++k) {
      sc.left[k] = xl[k] + c * kl[k];
      sc.center[k] = xc[k] + c * kc[k];
      sc.right[k] = xr[k] + c * kr[k];
    }
    model.drift(ts, sc.left, sc.center, sc.right, block, sc.f);
  }
  for (std::size_t k = 0; k < b; ++k) out[k] = h * sc.f[k];
}

void rk4_combine(CSpan x, CSpan k1, CSpan k2, CSpan k3, CSpan k4, MSpan out) {
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] + (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]) / 6.0;
}

bool all_finite(CSpan v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

void check_state(const ModelSpec& model, const State& x, const char* who) {
  if (x.size() != model.dim()) throw ArgumentError(std::string(who) + ": state length does not match model");
}

void check_store(const ModelSpec& model, const BrownianStore& store, int c, const TimeGrid& grid, const char* who) {
  if (!model.has_diffusion()) return;
  if (store.empty()) throw ArgumentError(std::string(who) + ": stochastic model needs Brownian increments");
  if (store.blocks() != model.blocks() || store.block_size() != model.block_size() || store.steps() < grid.steps) {
    throw ArgumentError(std::string(who) + ": Brownian store does not match model/grid");
  }
  if (c < 0 || c >= store.realizations()) throw ArgumentError(std::string(who) + ": realization out of range");
}

CSpan block_of(const State& x, int j, int b) {
  return {x.data() + static_cast<std::ptrdiff_t>(j) * b, static_cast<std::size_t>(b)};
}

}  // namespace

Trajectory em_full(const ModelSpec& model, const State& x0, const BrownianStore& store, int c, const TimeGrid& grid) {
  check_state(model, x0, "em_full");
  check_store(model, store, c, grid, "em_full");
  const int m = model.blocks();
  const int b = model.block_size();
  const double sqrt_h = std::sqrt(grid.h);
  const bool noisy = model.has_diffusion();

  Trajectory traj(grid.steps, m, b, false);
  std::copy(x0.data(), x0.data() + x0.size(), traj.state(0).begin());
  Scratch scratch(b);
  for (int i = 0; i < grid.steps; ++i) {
    const double t = grid.time(i);
    for (int j = 0; j < m; ++j) {
      const CSpan w = noisy ? store.increment(c, i, j) : CSpan{};
      auto out = traj.block(i + 1, j);
      em_block(model, t, grid.h, sqrt_h, traj.block(i, wrap_block(j - 1, m)), traj.block(i, j),
               traj.block(i, wrap_block(j + 1, m)), w, j, out, scratch);
      if (!all_finite(out)) throw DivergenceError(i + 1, j, "euler-maruyama, realization " + std::to_string(c));
    }
  }
  return traj;
}

Trajectory rk4_full(const ModelSpec& model, const State& x0, const TimeGrid& grid) {
  check_state(model, x0, "rk4_full");
  if (model.has_diffusion()) throw UnsupportedError("rk4_full: RK4 is only available for zero-diffusion models");
  const int m = model.blocks();
  const int b = model.block_size();

  Trajectory traj(grid.steps, m, b, true);
  std::copy(x0.data(), x0.data() + x0.size(), traj.state(0).begin());
  Scratch scratch(b);
  for (int i = 0; i < grid.steps; ++i) {
    const double t = grid.time(i);
    for (int s = 0; s < 4; ++s) {
      for (int j = 0; j < m; ++j) {
        const int jl = wrap_block(j - 1, m);
        const int jr = wrap_block(j + 1, m);
        const CSpan kl = s == 0 ? CSpan{} : CSpan(traj.stage(i, s - 1, jl));
        const CSpan kc = s == 0 ? CSpan{} : CSpan(traj.stage(i, s - 1, j));
        const CSpan kr = s == 0 ? CSpan{} : CSpan(traj.stage(i, s - 1, jr));
        rk4_stage_block(model, t, grid.h, s, traj.block(i, jl), traj.block(i, j), traj.block(i, jr), kl, kc, kr, j,
                        traj.stage(i, s, j), scratch);
      }
    }
    for (int j = 0; j < m; ++j) {
      auto out = traj.block(i + 1, j);
      rk4_combine(traj.block(i, j), traj.stage(i, 0, j), traj.stage(i, 1, j), traj.stage(i, 2, j),
                  traj.stage(i, 3, j), out);
      if (!all_finite(out)) throw DivergenceError(i + 1, j, "rk4");
    }
  }
  return traj;
}

class PatchBuilder {
 public:
  // Lays out slots for the window of torus offsets [-(radius+halo), radius+halo].
  static LocalPatch layout(const Trajectory& base, int center, int radius, int halo, bool with_stages) {
    const int m = base.blocks();
    if (center < 0 || center >= m) throw ArgumentError("local solve: center block out of range");
    if (radius < 0 || radius > max_radius(m)) throw ArgumentError("local solve: radius must lie in [0, m/2]");

    LocalPatch p;
    p.center_ = center;
    p.radius_ = radius;
    p.steps_ = base.steps();
    p.m_ = m;
    p.b_ = base.block_size();
    const int width = radius + halo;
    int first = -width;
    int count = 2 * width + 1;
    if (count >= m) {
      // The window reaches around the torus: one slot per block, cyclic neighbours.
      count = m;
      first = -(m - 1) / 2;
      p.wraps_ = true;
    }
    p.first_offset_ = first;
    for (int s = 0; s < count; ++s) {
      const int offset = first + s;
      p.blocks_.push_back(wrap_block(center + offset, m));
      const bool active = std::abs(offset) <= radius;
      p.active_.push_back(active ? 1 : 0);
      if (active) p.active_slots_.push_back(s);
    }
    p.covers_ = static_cast<int>(p.active_slots_.size()) == m;
    p.halo_ = p.covers_ ? 0 : halo;
    p.values_.assign(static_cast<std::size_t>(p.steps_ + 1) * count * p.b_, 0.0);
    if (with_stages) p.stages_.assign(static_cast<std::size_t>(p.steps_) * 4 * count * p.b_, 0.0);
    return p;
  }

  static MSpan value(LocalPatch& p, int i, int slot) {
    return {p.values_.data() + p.value_offset(i, slot), static_cast<std::size_t>(p.b_)};
  }
  static MSpan stage(LocalPatch& p, int i, int s, int slot) {
    return {p.stages_.data() + p.stage_offset(i, s, slot), static_cast<std::size_t>(p.b_)};
  }
  static int left(const LocalPatch& p, int slot) { return p.wraps_ ? (slot + p.slots() - 1) % p.slots() : slot - 1; }
  static int right(const LocalPatch& p, int slot) { return p.wraps_ ? (slot + 1) % p.slots() : slot + 1; }

  // Seeds time 0: proposal on the window, after checking it agrees with the
  // base initial condition everywhere except the center block.
  static void seed_initial(LocalPatch& p, const State& proposal, const Trajectory& base) {
    const int b = p.b_;
    for (int s = 0; s < p.slots(); ++s) {
      const int j = p.block_of(s);
      const CSpan prop = block_of(proposal, j, b);
      if (j != p.center_) {
        const CSpan ref = base.block(0, j);
        if (!std::equal(prop.begin(), prop.end(), ref.begin())) {
          throw ContractViolation("local solve: proposal differs from the base initial condition outside block " +
                                  std::to_string(p.center_));
        }
      }
      std::copy(prop.begin(), prop.end(), value(p, 0, s).begin());
    }
  }

  static void copy_halo_values(LocalPatch& p, const Trajectory& base, int i) {
    for (int s = 0; s < p.slots(); ++s) {
      if (p.active(s)) continue;
      const CSpan src = base.block(i, p.block_of(s));
      std::copy(src.begin(), src.end(), value(p, i, s).begin());
    }
  }

  static void copy_halo_stages(LocalPatch& p, const Trajectory& base, int i) {
    for (int s = 0; s < p.slots(); ++s) {
      if (p.active(s)) continue;
      for (int st = 0; st < 4; ++st) {
        const CSpan src = base.stage(i, st, p.block_of(s));
        std::copy(src.begin(), src.end(), stage(p, i, st, s).begin());
      }
    }
  }
};

namespace {

void check_base(const ModelSpec& model, const State& proposal, const Trajectory& base, const TimeGrid& grid,
                const char* who) {
  check_state(model, proposal, who);
  if (base.blocks() != model.blocks() || base.block_size() != model.block_size() || base.steps() != grid.steps) {
    throw ContractViolation(std::string(who) + ": base trajectory does not match model/grid");
  }
}

}  // namespace

LocalPatch em_local(const ModelSpec& model, const State& proposal, const Trajectory& base,
                    const BrownianStore& store, int c, const TimeGrid& grid, int center, int radius) {
  check_base(model, proposal, base, grid, "em_local");
  check_store(model, store, c, grid, "em_local");
  LocalPatch p = PatchBuilder::layout(base, center, radius, kEulerHalo, false);
  PatchBuilder::seed_initial(p, proposal, base);

  const double sqrt_h = std::sqrt(grid.h);
  const bool noisy = model.has_diffusion();
  Scratch scratch(model.block_size());
  for (int i = 0; i < grid.steps; ++i) {
    const double t = grid.time(i);
    for (int s : p.active_slots()) {
      const int j = p.block_of(s);
      const CSpan w = noisy ? store.increment(c, i, j) : CSpan{};
      auto out = PatchBuilder::value(p, i + 1, s);
      em_block(model, t, grid.h, sqrt_h, p.block(i, PatchBuilder::left(p, s)), p.block(i, s),
               p.block(i, PatchBuilder::right(p, s)), w, j, out, scratch);
      if (!all_finite(out)) throw DivergenceError(i + 1, j, "local euler-maruyama, realization " + std::to_string(c));
    }
    PatchBuilder::copy_halo_values(p, base, i + 1);
  }
  return p;
}

LocalPatch rk4_local(const ModelSpec& model, const State& proposal, const Trajectory& base, const TimeGrid& grid,
                     int center, int radius) {
  check_base(model, proposal, base, grid, "rk4_local");
  if (model.has_diffusion()) throw UnsupportedError("rk4_local: RK4 is only available for zero-diffusion models");
  if (!base.has_stages()) throw ContractViolation("rk4_local: base trajectory carries no RK4 stages");
  LocalPatch p = PatchBuilder::layout(base, center, radius, kRk4Halo, true);
  PatchBuilder::seed_initial(p, proposal, base);

  Scratch scratch(model.block_size());
  for (int i = 0; i < grid.steps; ++i) {
    const double t = grid.time(i);
    PatchBuilder::copy_halo_stages(p, base, i);
    for (int s = 0; s < 4; ++s) {
      for (int slot : p.active_slots()) {
        const int sl = PatchBuilder::left(p, slot);
        const int sr = PatchBuilder::right(p, slot);
        const CSpan kl = s == 0 ? CSpan{} : p.stage(i, s - 1, sl);
        const CSpan kc = s == 0 ? CSpan{} : p.stage(i, s - 1, slot);
        const CSpan kr = s == 0 ? CSpan{} : p.stage(i, s - 1, sr);
        rk4_stage_block(model, t, grid.h, s, p.block(i, sl), p.block(i, slot), p.block(i, sr), kl, kc, kr,
                        p.block_of(slot), PatchBuilder::stage(p, i, s, slot), scratch);
      }
    }
    for (int slot : p.active_slots()) {
      auto out = PatchBuilder::value(p, i + 1, slot);
      rk4_combine(p.block(i, slot), p.stage(i, 0, slot), p.stage(i, 1, slot), p.stage(i, 2, slot),
                  p.stage(i, 3, slot), out);
      if (!all_finite(out)) throw DivergenceError(i + 1, p.block_of(slot), "local rk4");
    }
    PatchBuilder::copy_halo_values(p, base, i + 1);
  }
  return p;
}

void commit_patch(Trajectory& base, const LocalPatch& patch) {
  if (base.steps() != patch.steps() || base.block_size() != patch.block_size() ||
      patch.slots() > base.blocks() || (patch.has_stages() && !base.has_stages())) {
    throw ContractViolation("commit_patch: patch was not produced against this trajectory");
  }
  for (int slot : patch.active_slots()) {
    const int j = patch.block_of(slot);
    for (int i = 0; i <= base.steps(); ++i) {
      const CSpan src = patch.block(i, slot);
      std::copy(src.begin(), src.end(), base.block(i, j).begin());
    }
    if (patch.has_stages()) {
      for (int i = 0; i < base.steps(); ++i) {
        for (int s = 0; s < 4; ++s) {
          const CSpan src = patch.stage(i, s, slot);
          std::copy(src.begin(), src.end(), base.stage(i, s, j).begin());
        }
      }
    }
  }
}

State assemble_terminal(const Trajectory& base, const LocalPatch& patch) {
  State x = base.terminal();
  const int b = base.block_size();
  for (int slot : patch.active_slots()) {
    const CSpan src = patch.block(patch.steps(), slot);
    std::copy(src.begin(), src.end(), x.data() + static_cast<std::ptrdiff_t>(patch.block_of(slot)) * b);
  }
  return x;
}

Trajectory solve_full(Scheme scheme, const ModelSpec& model, const State& x0, const BrownianStore& store, int c,
                      const TimeGrid& grid) {
  return scheme == Scheme::rk4 ? rk4_full(model, x0, grid) : em_full(model, x0, store, c, grid);
}

LocalPatch solve_local(Scheme scheme, const ModelSpec& model, const State& proposal, const Trajectory& base,
                       const BrownianStore& store, int c, const TimeGrid& grid, int center, int radius) {
  return scheme == Scheme::rk4 ? rk4_local(model, proposal, base, grid, center, radius)
                               : em_local(model, proposal, base, store, c, grid, center, radius);
}

}  // namespace amwg
