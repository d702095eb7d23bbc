#pragma once

#include <iosfwd>
#include <vector>

#include "amwg/brownian.hpp"
#include "amwg/integrate.hpp"
#include "amwg/likelihood.hpp"
#include "amwg/model.hpp"
#include "amwg/prior.hpp"
#include "amwg/random.hpp"

namespace amwg {

struct BoundInputs {
  double C_f = 0.0;
  double C_sigma = 0.0;
  double C_d = 1.0;
  double delta_sq = 1.0;  // squared norm of the perturbed block
  double T = 0.0;
  double h = 0.0;         // step size, discrete bound only
  double epsilon = 1e-4;
};

double c1(double C_f, double C_sigma, double C_d);
double c2(double C_f, double C_sigma, double C_d);

// Lower bounds on the local radius; ceil() for a usable L.
double radius_bound_continuous(const BoundInputs& in);
double radius_bound_discrete(const BoundInputs& in);

// Right-hand side of the discrete local-error bound at step i for radius L:
//   C2 * exp(2 C1 (1 + h) i h) * exp(-C_d (L + 1)) * delta_sq.
double local_error_bound(const BoundInputs& in, int step, int radius);

// Smallest integer radius implied by the discrete bound over a log grid of
// C_d values in [cd_min, cd_max].
struct BoundSelection {
  int radius = 0;
  double C_d = 0.0;
};
BoundSelection select_radius_by_bound(BoundInputs in, double cd_min = 1e-2, double cd_max = 1e2, int grid = 41);

struct RadiusRow {
  int radius = 0;
  double err_alpha = 0.0;
  double err_phi = 0.0;
};

struct RadiusSelectOptions {
  Scheme scheme = Scheme::rk4;
  TimeGrid grid{};
  int trials = 500;
  int block = 0;             // perturbed block
  bool localized = false;    // alpha' from the windowed ratio
  int obs_window = 20;
};

// Err-phi = E||x^l(T) - x^p(T)||_inf / E||x^p(T)||_inf and
// Err-alpha = E|alpha - alpha'| over prior draws with one block replaced by a
// conditional proposal. Realizations are pooled into the expectations.
std::vector<RadiusRow> empirical_radius_select(const ModelSpec& model, const GaussianPrior& prior,
                                               const ObservationModel& obs, const BrownianStore& store,
                                               const std::vector<int>& radii, const RadiusSelectOptions& opt,
                                               Rng& rng);

void write_radius_table(std::ostream& os, const std::vector<RadiusRow>& rows);

// Mean squared block difference between the unperturbed and perturbed full
// solutions at time T, indexed by torus distance to the perturbed block.
std::vector<double> perturbation_profile(const ModelSpec& model, const GaussianPrior& prior,
                                         const BrownianStore& store, Scheme scheme, const TimeGrid& grid,
                                         int trials, int block, Rng& rng);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double p_value = 1.0;  // two-sided t test of slope == 0
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace amwg
