#pragma once

#include <string>
#include <vector>

#include "amwg/likelihood.hpp"
#include "amwg/model.hpp"
#include "amwg/prior.hpp"

namespace amwg {

// samples is K x n, one iterate per row; the first k0 rows are burn-in.
double mse(const Matrix& samples, const State& truth, int k0);
double msv(const Matrix& samples, int k0);
Vector posterior_mean(const Matrix& samples, int k0);

struct AcceptanceSummary {
  std::vector<double> per_block;  // NaN where a block was never proposed
  double overall = 0.0;           // NaN when nothing was proposed
};
AcceptanceSummary acceptance_rate(const std::vector<long long>& accepted, const std::vector<long long>& proposed);

// Pade scaling-and-squaring.
Matrix matrix_exponential(const Matrix& A);

struct PosteriorOracle {
  Vector mean;
  Matrix covariance;
  int quad_steps = 0;  // panels at which the quadrature settled
  double mean_variance() const { return covariance.diagonal().mean(); }
};

// Exact Gaussian posterior of x(0) for the linear flow with Gaussian prior
// and linear Gaussian observations of x(T). The noise covariance of x(T) is
// integrated with composite Simpson, doubling the panel count until two
// successive results agree to `rel_tol`.
PosteriorOracle exact_linear_posterior(const ModelSpec& model, const GaussianPrior& prior,
                                       const ObservationModel& obs, double T, int quad_steps = 400,
                                       double rel_tol = 1e-8, int max_doublings = 6);

struct ChainMetrics {
  double acceptance = 0.0;
  double seconds = 0.0;
  double mse = 0.0;  // NaN without a known truth
  double msv = 0.0;
  int k0 = 0;
};

// {"AR":..,"CT":..,"MSE":..,"MSV":..}; NaN is written as null.
std::string metrics_json(const ChainMetrics& m, const AcceptanceSummary& ar);

}  // namespace amwg
