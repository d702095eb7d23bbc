#include "amwg/prior.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "amwg/errors.hpp"

namespace amwg {
namespace {

constexpr char kMagic[8] = {'A', 'M', 'W', 'G', 'P', 'R', 'I', '1'};

Vector standard_normal(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector z(n);
  for (int i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

}  // namespace

GaussianPrior::GaussianPrior(Vector mean, Matrix covariance, int block_size)
    : mean_(std::move(mean)), covariance_(std::move(covariance)), b_(block_size) {
  const int n = static_cast<int>(mean_.size());
  if (n == 0 || covariance_.rows() != n || covariance_.cols() != n) {
    throw ArgumentError("GaussianPrior: mean/covariance dimensions disagree");
  }
  if (b_ <= 0 || n % b_ != 0) throw ArgumentError("GaussianPrior: block size must divide the dimension");
  if (!covariance_.isApprox(covariance_.transpose(), 1e-12)) {
    throw ConstructionError("GaussianPrior: covariance is not symmetric");
  }
  Eigen::LLT<Matrix> llt(covariance_);
  if (llt.info() != Eigen::Success) throw ConstructionError("GaussianPrior: covariance is not positive definite");
  chol_ = llt.matrixL();
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  precision_ = llt.solve(Matrix::Identity(n, n));
  precision_ = 0.5 * (precision_ + precision_.transpose());

  const int m = n / b_;
  conditionals_.resize(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    auto& cond = conditionals_[static_cast<std::size_t>(j)];
    const Matrix qjj = precision_.block(j * b_, j * b_, b_, b_);
    Eigen::LLT<Matrix> qllt(qjj);
    if (qllt.info() != Eigen::Success) throw ConstructionError("GaussianPrior: singular block precision");
    cond.cov = qllt.solve(Matrix::Identity(b_, b_));
    cond.cov = 0.5 * (cond.cov + cond.cov.transpose());
    Eigen::LLT<Matrix> cllt(cond.cov);
    cond.cov_chol = cllt.matrixL();
    cond.log_det = 2.0 * cond.cov_chol.diagonal().array().log().sum();
    for (int k = 0; k < m; ++k) {
      if (k == j) continue;
      const Matrix qjk = precision_.block(j * b_, k * b_, b_, b_);
      if ((qjk.array() == 0.0).all()) continue;
      cond.couplings.push_back(Coupling{k, -cond.cov * qjk});
    }
  }
}

State GaussianPrior::sample(Rng& rng) const { return mean_ + chol_ * standard_normal(dim(), rng); }

Vector GaussianPrior::conditional_mean(const State& x, int block) const {
  if (x.size() != dim()) throw ArgumentError("conditional_mean: state has wrong length");
  if (block < 0 || block >= blocks()) throw ArgumentError("conditional_mean: block out of range");
  Vector mu = mean_.segment(block * b_, b_);
  for (const auto& c : couplings(block)) {
    mu.noalias() += c.gain * (x.segment(c.block * b_, b_) - mean_.segment(c.block * b_, b_));
  }
  return mu;
}

Vector GaussianPrior::conditional_block_sample(const State& x, int block, Rng& rng) const {
  const Vector mu = conditional_mean(x, block);
  return mu + conditionals_[static_cast<std::size_t>(block)].cov_chol * standard_normal(b_, rng);
}

double GaussianPrior::log_density(const State& x) const {
  if (x.size() != dim()) throw ArgumentError("log_density: state has wrong length");
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (z.squaredNorm() + log_det_ + dim() * std::log(2.0 * std::numbers::pi));
}

double GaussianPrior::conditional_log_density(const State& x, int block, const Vector& value) const {
  const auto& cond = conditionals_[static_cast<std::size_t>(block)];
  const Vector diff = value - conditional_mean(x, block);
  const Vector z = cond.cov_chol.triangularView<Eigen::Lower>().solve(diff);
  return -0.5 * (z.squaredNorm() + cond.log_det + b_ * std::log(2.0 * std::numbers::pi));
}

void GaussianPrior::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("GaussianPrior::save: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(dim()), static_cast<std::uint64_t>(b_)};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  os.write(reinterpret_cast<const char*>(mean_.data()), static_cast<std::streamsize>(sizeof(double) * dim()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = covariance_;
  os.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(sizeof(double) * rows.size()));
  if (!os) throw ArgumentError("GaussianPrior::save: write failed");
}

GaussianPrior GaussianPrior::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("GaussianPrior::load: cannot open " + path.string());
  char magic[sizeof(kMagic)];
  std::uint64_t dims[2];
  is.read(magic, sizeof(magic));
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ArgumentError("GaussianPrior::load: bad header");
  const auto n = static_cast<Eigen::Index>(dims[0]);
  Vector mean(n);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cov(n, n);
  is.read(reinterpret_cast<char*>(mean.data()), static_cast<std::streamsize>(sizeof(double) * n));
  is.read(reinterpret_cast<char*>(cov.data()), static_cast<std::streamsize>(sizeof(double) * n * n));
  if (!is) throw ArgumentError("GaussianPrior::load: truncated payload");
  return GaussianPrior(std::move(mean), Matrix(cov), static_cast<int>(dims[1]));
}

Matrix taper_covariance(const Matrix& covariance, int radius) {
  const int n = static_cast<int>(covariance.rows());
  Matrix out = covariance;
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      if (block_distance(p, q, n) > radius) out(p, q) = 0.0;
    }
  }
  return out;
}

GaussianPrior lorenz96_equilibrium_prior(const ModelSpec& model, const EquilibriumPriorOptions& opt, Rng& rng) {
  if (model.kind() != ModelKind::lorenz96) throw ArgumentError("equilibrium prior: model must be Lorenz 96");
  if (!(opt.sim_length > 0.0) || opt.burn < 0.0 || !(opt.snapshot_every > 0.0) || !(opt.h > 0.0)) {
    throw ArgumentError("equilibrium prior: run lengths and step must be positive");
  }
  if (opt.taper_radius < 0) throw ArgumentError("equilibrium prior: taper radius must be nonnegative");
  const int n = model.dim();
  const TimeGrid between = TimeGrid::make(opt.h, opt.snapshot_every);
  const int burn_chunks = static_cast<int>(std::round(opt.burn / opt.snapshot_every));
  const int snapshots = static_cast<int>(std::round(opt.sim_length / opt.snapshot_every));
  if (snapshots < 2) throw ArgumentError("equilibrium prior: need at least two snapshots");

  std::normal_distribution<double> normal;
  State x(n);
  for (int k = 0; k < n; ++k) x[k] = 8.0 + normal(rng);

  Vector sum = Vector::Zero(n);
  Matrix outer = Matrix::Zero(n, n);
  for (int chunk = 0; chunk < burn_chunks + snapshots; ++chunk) {
    x = rk4_full(model, x, between).terminal();
    if (chunk >= burn_chunks) {
      sum += x;
      outer.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
  }
  const double count = snapshots;
  const Vector mean = sum / count;
  Matrix cov = outer.selfadjointView<Eigen::Lower>();
  cov = (cov - count * mean * mean.transpose()) / (count - 1.0);
  cov = 0.5 * (cov + cov.transpose());
  cov = taper_covariance(cov, opt.taper_radius);

  const double scale = cov.diagonal().mean();
  double jitter = 0.0;
  for (int attempt = 0; attempt <= opt.max_jitter_steps; ++attempt) {
    Matrix trial = cov;
    trial.diagonal().array() += jitter;
    if (Eigen::LLT<Matrix>(trial).info() == Eigen::Success) {
      return GaussianPrior(mean, trial, model.block_size());
    }
    jitter = jitter == 0.0 ? opt.jitter * scale : jitter * 10.0;
  }
  throw ConstructionError("equilibrium prior: tapered covariance is not positive definite after jitter escalation");
}

}  // namespace amwg
