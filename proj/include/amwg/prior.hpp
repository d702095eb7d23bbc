#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "amwg/integrate.hpp"
#include "amwg/model.hpp"
#include "amwg/random.hpp"

namespace amwg {

// Gaussian prior N(mean, covariance) partitioned into blocks of size b.
//
// For every block j the full conditional x_j | x_{-j} is precomputed from the
// precision Q:  cov_j = Q_jj^{-1},  mean_j(x) = mu_j - cov_j sum_{k != j} Q_jk (x_k - mu_k).
// Only blocks with a nonzero Q_jk are kept, so a banded precision gives an
// O(bandwidth * b^2) proposal.
class GaussianPrior {
 public:
  struct Coupling {
    int block;
    Matrix gain;  // b x b, multiplies (x_k - mu_k)
  };

  GaussianPrior(Vector mean, Matrix covariance, int block_size);

  int dim() const { return static_cast<int>(mean_.size()); }
  int block_size() const { return b_; }
  int blocks() const { return dim() / b_; }

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  const Matrix& precision() const { return precision_; }
  const Matrix& cholesky() const { return chol_; }

  State sample(Rng& rng) const;

  Vector conditional_mean(const State& x, int block) const;
  const Matrix& conditional_covariance(int block) const { return conditionals_[static_cast<std::size_t>(block)].cov; }
  const std::vector<Coupling>& couplings(int block) const {
    return conditionals_[static_cast<std::size_t>(block)].couplings;
  }
  // Draw x_j from the exact Gaussian conditional given the other blocks of x.
  Vector conditional_block_sample(const State& x, int block, Rng& rng) const;

  // Log densities including normalising constants.
  double log_density(const State& x) const;
  double conditional_log_density(const State& x, int block, const Vector& value) const;

  // Flat binary: magic, uint64 n, uint64 b, mean, row-major covariance.
  void save(const std::filesystem::path& path) const;
  static GaussianPrior load(const std::filesystem::path& path);

 private:
  struct BlockConditional {
    Matrix cov;
    Matrix cov_chol;
    double log_det = 0.0;
    std::vector<Coupling> couplings;
  };

  Vector mean_;
  Matrix covariance_;
  Matrix precision_;
  Matrix chol_;
  double log_det_ = 0.0;
  int b_;
  std::vector<BlockConditional> conditionals_;
};

struct EquilibriumPriorOptions {
  double burn = 10.0;          // time units discarded before sampling
  double sim_length = 1000.0;  // time units sampled
  double snapshot_every = 0.1;
  double h = 0.01;
  int taper_radius = 2;        // component torus distance kept in the covariance
  double jitter = 1e-8;        // relative to the mean variance; escalated x10 on failure
  int max_jitter_steps = 12;
};

// Zero every covariance entry whose component torus distance exceeds `radius`.
Matrix taper_covariance(const Matrix& covariance, int radius);

// Gaussian approximation of the Lorenz 96 invariant measure: long RK4 run from
// a random start, empirical moments after burn-in, hard-cutoff taper, and a
// diagonal jitter if the tapered matrix is not positive definite.
GaussianPrior lorenz96_equilibrium_prior(const ModelSpec& model, const EquilibriumPriorOptions& options, Rng& rng);

}  // namespace amwg
