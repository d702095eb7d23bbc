#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace amwg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A flat state of length n = m * b. Block j occupies components [j*b, (j+1)*b).
using State = Eigen::VectorXd;

// Block indices are 0-based everywhere in the library: j in [0, m).
int block_distance(int j1, int j2, int m);

inline int wrap_block(int j, int m) {
  const int r = j % m;
  return r < 0 ? r + m : r;
}

// Assumption-1 style constants: squared drift increments are bounded by
// `drift` times the summed squared increments of the three input blocks, and
// squared diffusion increments by `diffusion` times the center increment.
struct LipschitzConstants {
  double drift = 0.0;
  double diffusion = 0.0;
};

// f_j(t, x_{j-1}, x_j, x_{j+1}) written into `out` (length b).
using DriftFn = std::function<void(double t, std::span<const double> left, std::span<const double> center,
                                   std::span<const double> right, int block, std::span<double> out)>;
// sigma_j(t, x_j) as a row-major b x b matrix written into `out` (length b*b).
using DiffusionFn =
    std::function<void(double t, std::span<const double> center, int block, std::span<double> out)>;

enum class ModelKind { custom, lorenz96, linear_flow };

struct LinearFlowParams {
  double grid = 0.2;        // l
  double diffusivity = 0.1;  // mu
  double damping = 0.1;      // nu
  double advection = 2.0;    // w
  double noise = 0.1;        // sigma_x
};

// Stencil of the discretized advection-diffusion operator.
struct LinearStencil {
  double left = 0.0;
  double center = 0.0;
  double right = 0.0;
  double noise = 0.0;
};

LinearStencil linear_flow_stencil(const LinearFlowParams& params);

// Block-structured drift/diffusion on a periodic chain of m blocks of size b.
// Immutable once built.
class ModelSpec {
 public:
  ModelSpec(int m, int b, DriftFn drift, DiffusionFn diffusion = {},
            std::optional<LipschitzConstants> lipschitz = std::nullopt);

  int blocks() const { return m_; }
  int block_size() const { return b_; }
  int dim() const { return m_ * b_; }

  // false means the diffusion is identically zero (ODE).
  bool has_diffusion() const { return static_cast<bool>(diffusion_); }

  void drift(double t, std::span<const double> left, std::span<const double> center,
             std::span<const double> right, int block, std::span<double> out) const {
    drift_(t, left, center, right, block, out);
  }
  void diffusion(double t, std::span<const double> center, int block, std::span<double> out) const;

  // Drift of block j evaluated from a flat state with periodic neighbours.
  Vector drift_at(double t, const State& x, int block) const;

  const std::optional<LipschitzConstants>& lipschitz() const { return lipschitz_; }

  ModelKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::optional<LinearStencil>& linear_stencil() const { return stencil_; }

 private:
  friend ModelSpec lorenz96(int n, int b, double forcing);
  friend ModelSpec linear_flow(int n, int b, const LinearFlowParams& params);

  int m_;
  int b_;
  DriftFn drift_;
  DiffusionFn diffusion_;
  std::optional<LipschitzConstants> lipschitz_;
  ModelKind kind_ = ModelKind::custom;
  std::string name_ = "custom";
  std::optional<LinearStencil> stencil_;
};

// dx_k/dt = -x_{k-2} x_{k-1} + x_{k-1} x_{k+1} - x_k + F, no noise.
// Requires even n >= 4 and b >= 2 dividing n.
ModelSpec lorenz96(int n, int b, double forcing = 8.0);

// Centered-difference advection-diffusion with additive noise sigma_x * I_b.
ModelSpec linear_flow(int n, int b, const LinearFlowParams& params = {});

// Circulant tridiagonal drift matrix of a linear_flow model.
Matrix linear_flow_matrix(int n, const LinearStencil& stencil);

}  // namespace amwg
