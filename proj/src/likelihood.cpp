#include "amwg/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "amwg/errors.hpp"

namespace amwg {

ObservationModel::ObservationModel(SparseRows H, Matrix R, Vector y)
    : H_(std::move(H)), R_(std::move(R)), y_(std::move(y)) {
  H_.makeCompressed();
  const auto rows = H_.rows();
  if (R_.rows() != rows || R_.cols() != rows) throw ArgumentError("ObservationModel: R must be n' x n'");
  if (y_.size() != rows) throw ArgumentError("ObservationModel: y must have n' entries");
  for (Eigen::Index r = 0; r < rows; ++r) {
    bool reads = false;
    for (SparseRows::InnerIterator it(H_, r); it; ++it) reads = reads || it.value() != 0.0;
    if (!reads) throw ArgumentError("ObservationModel: H row " + std::to_string(r) + " reads nothing");
  }
  factor_.compute(R_);
  if (factor_.info() != Eigen::Success || !R_.isApprox(R_.transpose(), 1e-12)) {
    throw ArgumentError("ObservationModel: R must be symmetric positive definite");
  }
  Matrix off = R_;
  off.diagonal().setZero();
  diagonal_ = (off.array() == 0.0).all();
  if (diagonal_) inv_diag_ = R_.diagonal().cwiseInverse();
  all_rows_.resize(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) all_rows_[static_cast<std::size_t>(r)] = static_cast<int>(r);
}

SparseRows ObservationModel::every_other(int n) {
  if (n <= 0 || n % 2 != 0) throw ArgumentError("every_other: n must be even and positive");
  SparseRows H(n / 2, n);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n / 2; ++i) t.emplace_back(i, 2 * i, 1.0);
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

SparseRows ObservationModel::identity(int n) {
  SparseRows H(n, n);
  H.setIdentity();
  return H;
}

void ObservationModel::set_data(Vector y) {
  if (y.size() != H_.rows()) throw ArgumentError("ObservationModel::set_data: wrong length");
  y_ = std::move(y);
}

Vector ObservationModel::forward(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != H_.cols()) throw ArgumentError("forward: state has wrong length");
  return H_ * Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

PairwiseSum::PairwiseSum(std::span<const double> leaves) : count_(static_cast<int>(leaves.size())) {
  width_ = 1;
  while (width_ < count_) width_ *= 2;
  nodes_.assign(static_cast<std::size_t>(2 * width_), 0.0);
  std::copy(leaves.begin(), leaves.end(), nodes_.begin() + width_);
  for (int i = width_ - 1; i >= 1; --i) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

void PairwiseSum::set(int i, double value) {
  int k = width_ + i;
  nodes_[static_cast<std::size_t>(k)] = value;
  for (k /= 2; k >= 1; k /= 2) nodes_[k] = nodes_[2 * k] + nodes_[2 * k + 1];
}

double ObservationModel::quadratic_form(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != H_.cols()) throw ArgumentError("quadratic_form: state has wrong length");
  if (diagonal_) return PairwiseSum(row_terms(x)).total();
  return quadratic_form(all_rows_, &factor_, [&](int k) { return x[static_cast<std::size_t>(k)]; });
}

std::vector<double> ObservationModel::row_terms(std::span<const double> x) const {
  if (!diagonal_) throw UnsupportedError("row_terms: needs diagonal observation noise");
  if (static_cast<Eigen::Index>(x.size()) != H_.cols()) throw ArgumentError("row_terms: state has wrong length");
  std::vector<double> terms(static_cast<std::size_t>(rows()));
  auto value = [&](int k) { return x[static_cast<std::size_t>(k)]; };
  for (int r = 0; r < rows(); ++r) terms[static_cast<std::size_t>(r)] = row_term(r, value);
  return terms;
}

std::vector<std::vector<int>> ObservationModel::rows_by_block(int block_size) const {
  if (block_size <= 0 || dim() % block_size != 0) throw ArgumentError("rows_by_block: block size must divide n");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(dim() / block_size));
  for (int r = 0; r < rows(); ++r) {
    for (SparseRows::InnerIterator it(H_, r); it; ++it) {
      auto& list = out[static_cast<std::size_t>(it.col() / block_size)];
      if (list.empty() || list.back() != r) list.push_back(r);
    }
  }
  return out;
}

Vector ObservationModel::read_data(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("cannot open data file " + path.string());
  std::vector<double> values;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    values.push_back(std::stod(line));
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void ObservationModel::write_data(const std::filesystem::path& path, const Vector& y) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot write data file " + path.string());
  os.precision(17);
  for (Eigen::Index i = 0; i < y.size(); ++i) os << y[i] << '\n';
}

SparseRows ObservationModel::read_matrix(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("cannot open observation matrix " + path.string());
  std::vector<Eigen::Triplet<double>> t;
  std::string line;
  int row = 0;
  int cols = -1;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (v != 0.0) t.emplace_back(row, col, v);
      ++col;
    }
    if (cols >= 0 && col != cols) throw ArgumentError("observation matrix rows have different lengths");
    cols = col;
    ++row;
  }
  if (row == 0) throw ArgumentError("observation matrix is empty");
  SparseRows H(row, cols);
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

double log_mean_exp(std::span<const double> terms) {
  if (terms.empty()) throw ArgumentError("log_mean_exp: no terms");
  const double top = *std::max_element(terms.begin(), terms.end());
  if (top == -std::numeric_limits<double>::infinity()) return top;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return top + std::log(sum) - std::log(static_cast<double>(terms.size()));
}

double ode_loglik(const ObservationModel& obs, std::span<const double> terminal) {
  return -0.5 * obs.quadratic_form(terminal);
}

double pm_loglik(const ObservationModel& obs, const std::vector<std::span<const double>>& terminals) {
  if (terminals.empty()) throw ArgumentError("pm_loglik: need at least one realization");
  std::vector<double> terms;
  terms.reserve(terminals.size());
  for (const auto& x : terminals) terms.push_back(-0.5 * obs.quadratic_form(x));
  return log_mean_exp(terms);
}

double pm_loglik(const ObservationModel& obs, const std::vector<Trajectory>& trajectories) {
  std::vector<std::span<const double>> terminals;
  terminals.reserve(trajectories.size());
  for (const auto& t : trajectories) terminals.push_back(t.terminal_span());
  return pm_loglik(obs, terminals);
}

ObservationWindows::ObservationWindows(const ObservationModel& obs, int blocks, int block_size, int window)
    : obs_(&obs), window_(window) {
  const int n = blocks * block_size;
  if (obs.dim() != n) throw ArgumentError("ObservationWindows: observation model dimension mismatch");
  if (window < block_size) throw ArgumentError("ObservationWindows: window smaller than one block");
  covers_all_ = window >= n;
  rows_.resize(static_cast<std::size_t>(blocks));
  factors_.resize(static_cast<std::size_t>(blocks));
  for (int j = 0; j < blocks; ++j) {
    auto& rows = rows_[static_cast<std::size_t>(j)];
    if (covers_all_) {
      rows = obs.all_rows();
      continue;
    }
    // Components [start, start + window) on the torus, centred on block j.
    const int start = j * block_size - (window - block_size) / 2;
    for (int r = 0; r < obs.rows(); ++r) {
      bool inside = true;
      for (SparseRows::InnerIterator it(obs.H(), r); it && inside; ++it) {
        if (it.value() == 0.0) continue;
        inside = wrap_block(static_cast<int>(it.col()) - start, n) < window;
      }
      if (inside) rows.push_back(r);
    }
    if (!obs.diagonal_noise() && !rows.empty()) {
      Matrix sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < rows.size(); ++b) {
          sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = obs.R()(rows[a], rows[b]);
        }
      }
      factors_[static_cast<std::size_t>(j)].emplace(sub);
    }
  }
}

const Eigen::LLT<Matrix>* ObservationWindows::factor(int center) const {
  if (covers_all_) return &obs_->noise_factor();
  const auto& f = factors_[static_cast<std::size_t>(center)];
  return f ? &*f : nullptr;
}

double local_pm_log_ratio(const ObservationModel& obs, const ObservationWindows& windows,
                          const std::vector<Trajectory>& base, const std::vector<LocalPatch>& patches, int center) {
  if (base.empty() || base.size() != patches.size()) {
    throw ArgumentError("local_pm_log_ratio: need one patch per realization");
  }
  const auto& rows = windows.rows(center);
  const auto* factor = windows.factor(center);
  const int b = base.front().block_size();
  std::vector<double> old_terms(base.size());
  std::vector<double> new_terms(base.size());
  for (std::size_t c = 0; c < base.size(); ++c) {
    const LocalPatch& patch = patches[c];
    if (patch.center() != center) throw ArgumentError("local_pm_log_ratio: patch centred on a different block");
    const auto old_x = base[c].terminal_span();
    const int last = patch.steps();
    old_terms[c] = -0.5 * obs.quadratic_form(rows, factor, [&](int k) { return old_x[static_cast<std::size_t>(k)]; });
    new_terms[c] = -0.5 * obs.quadratic_form(rows, factor, [&](int k) {
      const int slot = patch.active_slot_of(k / b);
      return slot < 0 ? old_x[static_cast<std::size_t>(k)] : patch.block(last, slot)[static_cast<std::size_t>(k % b)];
    });
  }
  return log_mean_exp(new_terms) - log_mean_exp(old_terms);
}

double windowed_pm_log_ratio(const ObservationModel& obs, const ObservationWindows& windows,
                             const std::vector<std::span<const double>>& current,
                             const std::vector<std::span<const double>>& proposal, int center) {
  if (current.empty() || current.size() != proposal.size()) {
    throw ArgumentError("windowed_pm_log_ratio: mismatched realization counts");
  }
  const auto& rows = windows.rows(center);
  const auto* factor = windows.factor(center);
  std::vector<double> old_terms(current.size());
  std::vector<double> new_terms(current.size());
  for (std::size_t c = 0; c < current.size(); ++c) {
    old_terms[c] = -0.5 * obs.quadratic_form(rows, factor, [&](int k) { return current[c][static_cast<std::size_t>(k)]; });
    new_terms[c] = -0.5 * obs.quadratic_form(rows, factor, [&](int k) { return proposal[c][static_cast<std::size_t>(k)]; });
  }
  return log_mean_exp(new_terms) - log_mean_exp(old_terms);
}

}  // namespace amwg
