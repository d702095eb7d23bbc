#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "amwg/integrate.hpp"
#include "amwg/model.hpp"

namespace amwg {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Pairwise sum over a fixed binary tree (leaves padded with zeros to a power
// of two). Changing a leaf updates only its ancestors, and the total is bit
// for bit what a fresh build over the same leaves gives.
class PairwiseSum {
 public:
  PairwiseSum() = default;
  explicit PairwiseSum(std::span<const double> leaves);

  int size() const { return count_; }
  double total() const { return nodes_.empty() ? 0.0 : nodes_[1]; }
  double leaf(int i) const { return nodes_[static_cast<std::size_t>(width_ + i)]; }
  void set(int i, double value);

 private:
  int count_ = 0;
  int width_ = 0;
  std::vector<double> nodes_;
};

// y = H x(T) + xi,  xi ~ N(0, R).
class ObservationModel {
 public:
  ObservationModel(SparseRows H, Matrix R, Vector y);

  // n/2 x n selector reading components 0, 2, 4, ... (1-based: 1, 3, 5, ...).
  static SparseRows every_other(int n);
  static SparseRows identity(int n);

  int rows() const { return static_cast<int>(H_.rows()); }
  int dim() const { return static_cast<int>(H_.cols()); }
  const SparseRows& H() const { return H_; }
  const Matrix& R() const { return R_; }
  const Vector& y() const { return y_; }
  bool diagonal_noise() const { return diagonal_; }
  const Eigen::LLT<Matrix>& noise_factor() const { return factor_; }

  void set_data(Vector y);
  Vector forward(std::span<const double> x) const;

  // ||y_rows - H_rows x||^2 in the metric of R restricted to `rows` (ascending).
  // `value(k)` returns component k of the state. `factor` is the Cholesky
  // factor of the restricted R (ignored for diagonal noise).
  template <typename ValueFn>
  double quadratic_form(const std::vector<int>& rows, const Eigen::LLT<Matrix>* factor, ValueFn&& value) const {
    if (diagonal_) {
      double q = 0.0;
      for (int r : rows) {
        const double res = residual(r, value);
        q += res * res * inv_diag_[r];
      }
      return q;
    }
    if (rows.empty()) return 0.0;
    Vector res(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) res[static_cast<Eigen::Index>(i)] = residual(rows[i], value);
    return factor->matrixL().solve(res).squaredNorm();
  }

  // Full quadratic form. With diagonal noise the row terms are combined with
  // PairwiseSum, which lets callers update it row by row (see row_term).
  double quadratic_form(std::span<const double> x) const;
  const std::vector<int>& all_rows() const { return all_rows_; }

  // (y_r - (Hx)_r)^2 / R_rr; diagonal noise only.
  template <typename ValueFn>
  double row_term(int r, ValueFn&& value) const {
    const double res = residual(r, value);
    return res * res * inv_diag_[r];
  }
  // Per-row terms of the full quadratic form, diagonal noise only.
  std::vector<double> row_terms(std::span<const double> x) const;
  // For each block of `block_size` components, the rows of H reading it.
  std::vector<std::vector<int>> rows_by_block(int block_size) const;

  // Data file: one value per line.
  static Vector read_data(const std::filesystem::path& path);
  static void write_data(const std::filesystem::path& path, const Vector& y);
  // Dense observation matrix stored as CSV rows.
  static SparseRows read_matrix(const std::filesystem::path& path);

 private:
  template <typename ValueFn>
  double residual(int r, ValueFn& value) const {
    double hx = 0.0;
    for (SparseRows::InnerIterator it(H_, r); it; ++it) hx += it.value() * value(static_cast<int>(it.col()));
    return y_[r] - hx;
  }

  SparseRows H_;
  Matrix R_;
  Vector y_;
  bool diagonal_ = false;
  Vector inv_diag_;
  Eigen::LLT<Matrix> factor_;
  std::vector<int> all_rows_;
};

// log((1/S) sum_c exp(terms[c])) via the max shift.
double log_mean_exp(std::span<const double> terms);

// log-likelihood of the ODE model up to its constant: -1/2 ||y - H x(T)||^2_R.
double ode_loglik(const ObservationModel& obs, std::span<const double> terminal);

// Pseudo-marginal Monte Carlo log-likelihood over S terminal states.
double pm_loglik(const ObservationModel& obs, const std::vector<std::span<const double>>& terminals);
double pm_loglik(const ObservationModel& obs, const std::vector<Trajectory>& trajectories);

// For each center block, the observation rows whose nonzero columns all lie in
// a window of `window` components centred on that block.
class ObservationWindows {
 public:
  ObservationWindows(const ObservationModel& obs, int blocks, int block_size, int window);

  int window() const { return window_; }
  bool covers_all() const { return covers_all_; }
  const std::vector<int>& rows(int center) const { return rows_[static_cast<std::size_t>(center)]; }
  const Eigen::LLT<Matrix>* factor(int center) const;

 private:
  const ObservationModel* obs_;
  int window_;
  bool covers_all_;
  std::vector<std::vector<int>> rows_;
  std::vector<std::optional<Eigen::LLT<Matrix>>> factors_;
};

// log(p^p / p^o) using only the rows of the window around `center`; the
// proposal's terminal values come from `patches` on their active blocks and
// from `base` elsewhere. Both sides are log-mean-exp values so that a window
// covering every row reproduces pm_loglik(proposal) - pm_loglik(base).
double local_pm_log_ratio(const ObservationModel& obs, const ObservationWindows& windows,
                          const std::vector<Trajectory>& base, const std::vector<LocalPatch>& patches, int center);

// Same ratio with both sides supplied as full terminal states.
double windowed_pm_log_ratio(const ObservationModel& obs, const ObservationWindows& windows,
                             const std::vector<std::span<const double>>& current,
                             const std::vector<std::span<const double>>& proposal, int center);

}  // namespace amwg
