#include "amwg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <utility>

#include "amwg/errors.hpp"

namespace amwg {

int block_distance(int j1, int j2, int m) {
  if (m <= 0 || j1 < 0 || j1 >= m || j2 < 0 || j2 >= m) {
    throw ArgumentError("block_distance: indices must lie in [0, m)");
  }
  const int d = std::abs(j1 - j2);
  return std::min(d, m - d);
}

ModelSpec::ModelSpec(int m, int b, DriftFn drift, DiffusionFn diffusion,
                     std::optional<LipschitzConstants> lipschitz)
    : m_(m), b_(b), drift_(std::move(drift)), diffusion_(std::move(diffusion)), lipschitz_(lipschitz) {
  if (m <= 0 || b <= 0) throw ArgumentError("ModelSpec: block count and block size must be positive");
  if (!drift_) throw ArgumentError("ModelSpec: drift is required");
  if (lipschitz_ && (lipschitz_->drift < 0.0 || lipschitz_->diffusion < 0.0)) {
    throw ArgumentError("ModelSpec: Lipschitz constants must be nonnegative");
  }
}

void ModelSpec::diffusion(double t, std::span<const double> center, int block, std::span<double> out) const {
  if (diffusion_) {
    diffusion_(t, center, block, out);
  } else {
    std::fill(out.begin(), out.end(), 0.0);
  }
}

Vector ModelSpec::drift_at(double t, const State& x, int block) const {
  if (x.size() != dim()) throw ArgumentError("drift_at: state has wrong length");
  const auto span_of = [&](int j) {
    return std::span<const double>(x.data() + static_cast<std::ptrdiff_t>(wrap_block(j, m_)) * b_,
                                   static_cast<std::size_t>(b_));
  };
  Vector out(b_);
  drift_(t, span_of(block - 1), span_of(block), span_of(block + 1), wrap_block(block, m_),
         std::span<double>(out.data(), static_cast<std::size_t>(b_)));
  return out;
}

ModelSpec lorenz96(int n, int b, double forcing) {
  if (n < 4 || n % 2 != 0) throw ArgumentError("lorenz96: n must be even and at least 4");
  if (b < 2) throw ArgumentError("lorenz96: block size must be at least 2 (x_{k-2} coupling)");
  if (n % b != 0) throw ArgumentError("lorenz96: block size must divide n");

  auto drift = [b, forcing](double, std::span<const double> left, std::span<const double> center,
                            std::span<const double> right, int, std::span<double> out) {
    // Position p in [-b, 2b) of the stacked [left | center | right] window.
    const auto at = [&](int p) { return p < 0 ? left[p + b] : (p < b ? center[p] : right[p - b]); };
    for (int k = 0; k < b; ++k) {
      out[k] = -at(k - 2) * at(k - 1) + at(k - 1) * at(k + 1) - center[k] + forcing;
    }
  };
  ModelSpec built(n / b, b, drift);
  built.kind_ = ModelKind::lorenz96;
  built.name_ = "lorenz96";
  return built;
}

LinearStencil linear_flow_stencil(const LinearFlowParams& p) {
  if (!(p.grid > 0.0)) throw ArgumentError("linear_flow: grid size must be positive");
  const double l2 = p.grid * p.grid;
  return LinearStencil{p.diffusivity / l2 - p.advection / (2.0 * p.grid), -2.0 * p.diffusivity / l2 - p.damping,
                       p.diffusivity / l2 + p.advection / (2.0 * p.grid), p.noise};
}

ModelSpec linear_flow(int n, int b, const LinearFlowParams& params) {
  if (n <= 0 || b <= 0 || n % b != 0) throw ArgumentError("linear_flow: block size must divide n");
  const LinearStencil s = linear_flow_stencil(params);

  auto drift = [s, b](double, std::span<const double> left, std::span<const double> center,
                      std::span<const double> right, int, std::span<double> out) {
    for (int k = 0; k < b; ++k) {
      const double lo = k == 0 ? left[b - 1] : center[k - 1];
      const double hi = k == b - 1 ? right[0] : center[k + 1];
      out[k] = s.left * lo + s.center * center[k] + s.right * hi;
    }
  };
  DiffusionFn diffusion;
  if (s.noise != 0.0) {
    diffusion = [s, b](double, std::span<const double>, int, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (int k = 0; k < b; ++k) out[static_cast<std::size_t>(k * b + k)] = s.noise;
    };
  }

  // Component-wise Cauchy-Schwarz gives 3*max(a^2, b^2, c^2) for scalar blocks.
  // Wider blocks see a shifted copy of the center increment in every term, so
  // the Toeplitz symbol bound (|a|+|b|+|c|)^2 is also required.
  const double max_sq = std::max({s.left * s.left, s.center * s.center, s.right * s.right});
  double c_f = 3.0 * max_sq;
  if (b > 1) {
    const double sum = std::abs(s.left) + std::abs(s.center) + std::abs(s.right);
    c_f = std::max(c_f, sum * sum);
  }

  ModelSpec built(n / b, b, drift, diffusion, LipschitzConstants{c_f, 0.0});
  built.kind_ = ModelKind::linear_flow;
  built.name_ = "linear_flow";
  built.stencil_ = s;
  return built;
}

Matrix linear_flow_matrix(int n, const LinearStencil& s) {
  if (n < 3) throw ArgumentError("linear_flow_matrix: n must be at least 3");
  Matrix M = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    M(j, j) = s.center;
    M(j, (j + n - 1) % n) = s.left;
    M(j, (j + 1) % n) = s.right;
  }
  return M;
}

}  // namespace amwg
