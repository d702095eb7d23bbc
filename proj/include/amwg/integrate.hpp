#pragma once

#include <span>
#include <vector>

#include "amwg/brownian.hpp"
#include "amwg/model.hpp"

namespace amwg {

struct TimeGrid {
  double h = 0.01;
  double T = 0.4;
  int steps = 40;

  // Rejects horizons that are not an integer number of steps.
  static TimeGrid make(double h, double T);
  double time(int i) const { return i * h; }
};

enum class Scheme { euler_maruyama, rk4 };

// Solution values at every grid time for one realization, plus the four RK4
// stage increments k^s_j(i) when produced by the RK4 solver.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int steps, int blocks, int block_size, bool with_stages);

  int steps() const { return steps_; }
  int blocks() const { return m_; }
  int block_size() const { return b_; }
  int dim() const { return m_ * b_; }
  bool has_stages() const { return !stages_.empty(); }

  std::span<const double> state(int i) const { return {values_.data() + offset(i), static_cast<std::size_t>(dim())}; }
  std::span<double> state(int i) { return {values_.data() + offset(i), static_cast<std::size_t>(dim())}; }
  std::span<const double> block(int i, int j) const {
    return {values_.data() + offset(i) + static_cast<std::size_t>(j) * b_, static_cast<std::size_t>(b_)};
  }
  std::span<double> block(int i, int j) {
    return {values_.data() + offset(i) + static_cast<std::size_t>(j) * b_, static_cast<std::size_t>(b_)};
  }
  // Stage s in [0, 4) of step i (the increment used to go from time i to i+1).
  std::span<const double> stage(int i, int s, int j) const {
    return {stages_.data() + stage_offset(i, s) + static_cast<std::size_t>(j) * b_, static_cast<std::size_t>(b_)};
  }
  std::span<double> stage(int i, int s, int j) {
    return {stages_.data() + stage_offset(i, s) + static_cast<std::size_t>(j) * b_, static_cast<std::size_t>(b_)};
  }

  State initial() const;
  State terminal() const;
  std::span<const double> terminal_span() const { return state(steps_); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::size_t offset(int i) const { return static_cast<std::size_t>(i) * dim(); }
  std::size_t stage_offset(int i, int s) const { return (static_cast<std::size_t>(i) * 4 + s) * dim(); }

  int steps_ = 0;
  int m_ = 0;
  int b_ = 0;
  std::vector<double> values_;
  std::vector<double> stages_;
};

// One trajectory per Brownian realization on a shared grid.
struct TrajectoryCache {
  TimeGrid grid;
  std::vector<Trajectory> realizations;
};

// Recomputed values of the blocks within torus distance `radius` of `center`,
// stored together with a copy of the surrounding halo taken from the base
// trajectory (width 1 for Euler-Maruyama, 4 for RK4). Slots are consecutive
// torus offsets from the center. Once the window reaches around the torus
// there is one slot per block; with radius >= m/2 every block is active.
class LocalPatch {
 public:
  LocalPatch() = default;

  int center() const { return center_; }
  int radius() const { return radius_; }
  int halo() const { return halo_; }
  int steps() const { return steps_; }
  int block_size() const { return b_; }
  int slots() const { return static_cast<int>(blocks_.size()); }
  bool covers_torus() const { return covers_; }
  bool has_stages() const { return !stages_.empty(); }

  int block_of(int slot) const { return blocks_[static_cast<std::size_t>(slot)]; }
  bool active(int slot) const { return active_[static_cast<std::size_t>(slot)] != 0; }
  const std::vector<int>& active_slots() const { return active_slots_; }
  // Slot holding block j if it is active, otherwise -1.
  int active_slot_of(int j) const {
    int slot = wrap_block(j - center_ - first_offset_, m_);
    if (slot >= slots() || !active(slot)) return -1;
    return slot;
  }

  std::span<const double> block(int i, int slot) const {
    return {values_.data() + value_offset(i, slot), static_cast<std::size_t>(b_)};
  }
  std::span<const double> stage(int i, int s, int slot) const {
    return {stages_.data() + stage_offset(i, s, slot), static_cast<std::size_t>(b_)};
  }

 private:
  friend LocalPatch em_local(const ModelSpec&, const State&, const Trajectory&, const BrownianStore&, int,
                             const TimeGrid&, int, int);
  friend LocalPatch rk4_local(const ModelSpec&, const State&, const Trajectory&, const TimeGrid&, int, int);
  friend class PatchBuilder;

  std::size_t value_offset(int i, int slot) const {
    return (static_cast<std::size_t>(i) * blocks_.size() + slot) * b_;
  }
  std::size_t stage_offset(int i, int s, int slot) const {
    return ((static_cast<std::size_t>(i) * 4 + s) * blocks_.size() + slot) * b_;
  }

  int center_ = 0;
  int radius_ = 0;
  int halo_ = 0;
  int steps_ = 0;
  int m_ = 0;
  int b_ = 0;
  bool covers_ = false;
  bool wraps_ = false;
  int first_offset_ = 0;
  std::vector<int> blocks_;
  std::vector<char> active_;
  std::vector<int> active_slots_;
  std::vector<double> values_;
  std::vector<double> stages_;
};

// Largest meaningful radius: the local domain then spans the whole torus.
inline int max_radius(int m) { return m / 2; }

constexpr int kEulerHalo = 1;
constexpr int kRk4Halo = 4;

Trajectory em_full(const ModelSpec& model, const State& x0, const BrownianStore& store, int realization,
                   const TimeGrid& grid);

Trajectory rk4_full(const ModelSpec& model, const State& x0, const TimeGrid& grid);

LocalPatch em_local(const ModelSpec& model, const State& proposal, const Trajectory& base,
                    const BrownianStore& store, int realization, const TimeGrid& grid, int center, int radius);

LocalPatch rk4_local(const ModelSpec& model, const State& proposal, const Trajectory& base, const TimeGrid& grid,
                     int center, int radius);

// Overwrite the active blocks of `base` (values and stages, all grid times).
void commit_patch(Trajectory& base, const LocalPatch& patch);

// Terminal state of the local surrogate: base outside the patch, patch inside.
State assemble_terminal(const Trajectory& base, const LocalPatch& patch);

// Dispatch helpers used by the samplers.
Trajectory solve_full(Scheme scheme, const ModelSpec& model, const State& x0, const BrownianStore& store,
                      int realization, const TimeGrid& grid);
LocalPatch solve_local(Scheme scheme, const ModelSpec& model, const State& proposal, const Trajectory& base,
                       const BrownianStore& store, int realization, const TimeGrid& grid, int center, int radius);

}  // namespace amwg
