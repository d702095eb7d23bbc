#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace amwg {

// S fixed realizations of standard-normal increments W^{(c)}_{i,j}, one b-vector
// per (realization, time step, block). Scaling by sqrt(h) is the integrator's job.
//
// Layout is time-major within a realization: [c][i][j][k].
class BrownianStore {
 public:
  BrownianStore() = default;

  static BrownianStore sample(std::uint64_t seed, int realizations, int blocks, int block_size, int steps,
                              double h = 0.0);
  // Wrap given increments laid out as [c][i][j][k].
  static BrownianStore from_increments(int realizations, int blocks, int block_size, int steps, double h,
                                       std::vector<double> data);
  // Placeholder for ODE runs: S realizations, no increments stored.
  static BrownianStore deterministic(int realizations, int blocks, int block_size);

  int realizations() const { return s_; }
  int blocks() const { return m_; }
  int block_size() const { return b_; }
  int steps() const { return steps_; }
  double step_size() const { return h_; }
  bool empty() const { return data_.empty(); }

  std::span<const double> increment(int c, int step, int block) const {
    const std::size_t off =
        ((static_cast<std::size_t>(c) * steps_ + step) * m_ + block) * static_cast<std::size_t>(b_);
    return {data_.data() + off, static_cast<std::size_t>(b_)};
  }
  std::span<const double> raw() const { return data_; }

  // Binary dump: magic, four uint64 dimensions (S, steps, m, b), the float64
  // step size, then the increments, all little-endian.
  void save(const std::filesystem::path& path) const;
  static BrownianStore load(const std::filesystem::path& path);

  friend bool operator==(const BrownianStore&, const BrownianStore&) = default;

 private:
  int s_ = 0;
  int m_ = 0;
  int b_ = 0;
  int steps_ = 0;
  double h_ = 0.0;
  std::vector<double> data_;
};

}  // namespace amwg
