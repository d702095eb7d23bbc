#include "amwg/diagnostics.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "amwg/errors.hpp"

namespace amwg {

namespace {

void check_samples(const Matrix& samples, int k0, const char* who) {
  if (samples.rows() < 1) throw ArgumentError(std::string(who) + ": no samples");
  if (k0 < 0 || k0 >= samples.rows()) throw ArgumentError(std::string(who) + ": burn-in must satisfy 0 <= k0 < K");
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Composite Simpson over [0, T] of exp(Mu) exp(Mu)^T, evaluated once on
// 2N panels; the even nodes also give the N-panel rule for the convergence
// check. Node powers come from repeated multiplication by exp(M du).
struct SimpsonPair {
  Matrix coarse;  // N panels
  Matrix fine;    // 2N panels
};

SimpsonPair simpson_gramian(const Matrix& M, double T, int panels) {
  const int fine = 2 * panels;
  const double du = T / fine;
  const Matrix step = matrix_exponential(M * du);
  const auto n = M.rows();
  Matrix E = Matrix::Identity(n, n);
  Matrix ends = Matrix::Zero(n, n);
  Matrix odd = Matrix::Zero(n, n);        // odd nodes of the fine grid
  Matrix even_odd = Matrix::Zero(n, n);   // fine nodes 2, 6, 10, ... (odd nodes of the coarse grid)
  Matrix even_even = Matrix::Zero(n, n);  // fine nodes 4, 8, ... below the end
  for (int k = 0; k <= fine; ++k) {
    if (k > 0) E = (E * step).eval();
    Matrix* target = nullptr;
    if (k == 0 || k == fine) {
      target = &ends;
    } else if (k % 2 == 1) {
      target = &odd;
    } else if ((k / 2) % 2 == 1) {
      target = &even_odd;
    } else {
      target = &even_even;
    }
    target->selfadjointView<Eigen::Lower>().rankUpdate(E);
  }
  auto full = [](const Matrix& lower) {
    Matrix out = lower.selfadjointView<Eigen::Lower>();
    return out;
  };
  const Matrix e = full(ends);
  const Matrix o = full(odd);
  const Matrix eo = full(even_odd);
  const Matrix ee = full(even_even);
  SimpsonPair out;
  out.fine = (e + 4.0 * o + 2.0 * (eo + ee)) * (du / 3.0);
  out.coarse = (e + 4.0 * eo + 2.0 * ee) * (2.0 * du / 3.0);
  return out;
}

}  // namespace

Vector posterior_mean(const Matrix& samples, int k0) {
  check_samples(samples, k0, "posterior_mean");
  return samples.bottomRows(samples.rows() - k0).colwise().mean().transpose();
}

double mse(const Matrix& samples, const State& truth, int k0) {
  check_samples(samples, k0, "mse");
  if (truth.size() != samples.cols()) throw ArgumentError("mse: truth has the wrong dimension");
  return (posterior_mean(samples, k0) - truth).squaredNorm() / static_cast<double>(truth.size());
}

double msv(const Matrix& samples, int k0) {
  check_samples(samples, k0, "msv");
  const auto kept = samples.bottomRows(samples.rows() - k0);
  const Vector mean = kept.colwise().mean().transpose();
  const double total = (kept.rowwise() - mean.transpose()).squaredNorm();
  return total / (static_cast<double>(samples.cols()) * static_cast<double>(kept.rows()));
}

AcceptanceSummary acceptance_rate(const std::vector<long long>& accepted, const std::vector<long long>& proposed) {
  if (accepted.size() != proposed.size()) throw ArgumentError("acceptance_rate: counter sizes differ");
  AcceptanceSummary out;
  long long a = 0;
  long long p = 0;
  for (std::size_t j = 0; j < accepted.size(); ++j) {
    if (accepted[j] < 0 || accepted[j] > proposed[j]) throw ArgumentError("acceptance_rate: inconsistent counters");
    out.per_block.push_back(proposed[j] > 0 ? static_cast<double>(accepted[j]) / proposed[j] : kNaN);
    a += accepted[j];
    p += proposed[j];
  }
  out.overall = p > 0 ? static_cast<double>(a) / p : kNaN;
  return out;
}

Matrix matrix_exponential(const Matrix& A) {
  if (A.rows() != A.cols()) throw ArgumentError("matrix_exponential: matrix must be square");
  return A.exp();
}

PosteriorOracle exact_linear_posterior(const ModelSpec& model, const GaussianPrior& prior,
                                       const ObservationModel& obs, double T, int quad_steps, double rel_tol,
                                       int max_doublings) {
  if (model.kind() != ModelKind::linear_flow) {
    throw UnsupportedError("exact_linear_posterior: only the linear flow model has a closed-form posterior");
  }
  if (!(T > 0.0)) throw ArgumentError("exact_linear_posterior: T must be positive");
  if (quad_steps < 2) throw ArgumentError("exact_linear_posterior: quad_steps must be at least 2");
  const int n = model.dim();
  if (prior.dim() != n || obs.dim() != n) throw ArgumentError("exact_linear_posterior: dimension mismatch");

  const LinearStencil st = *model.linear_stencil();
  const Matrix M = linear_flow_matrix(n, st);
  const Matrix A = Matrix(obs.H()) * matrix_exponential(M * T);  // H e^{MT}

  Matrix noise_cov = Matrix::Zero(n, n);
  int panels = quad_steps + (quad_steps % 2);
  if (st.noise != 0.0) {
    Matrix gram;
    bool settled = false;
    for (int d = 0; d <= max_doublings; ++d) {
      SimpsonPair pair = simpson_gramian(M, T, panels);
      const double change = (pair.fine - pair.coarse).norm() / pair.fine.norm();
      gram = std::move(pair.fine);
      panels *= 2;
      if (change < rel_tol) {
        settled = true;
        break;
      }
    }
    if (!settled) throw AccuracyError("exact_linear_posterior: quadrature did not converge");
    noise_cov = st.noise * st.noise * gram;
  }
  const Matrix Hm = obs.H();
  Matrix innovation = Hm * noise_cov * Hm.transpose() + obs.R();
  Eigen::LLT<Matrix> inn(innovation);
  if (inn.info() != Eigen::Success) throw AccuracyError("exact_linear_posterior: innovation covariance not SPD");

  const Matrix prior_prec = prior.precision();
  Matrix post_prec = prior_prec + A.transpose() * inn.solve(A);
  post_prec = 0.5 * (post_prec + post_prec.transpose()).eval();
  Eigen::LLT<Matrix> pp(post_prec);
  if (pp.info() != Eigen::Success) throw AccuracyError("exact_linear_posterior: posterior precision not SPD");

  PosteriorOracle out;
  out.covariance = pp.solve(Matrix::Identity(n, n));
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.mean = pp.solve(prior_prec * prior.mean() + A.transpose() * inn.solve(obs.y()));
  out.quad_steps = panels;
  return out;
}

std::string metrics_json(const ChainMetrics& m, const AcceptanceSummary& ar) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["AR"] = num(m.acceptance);
  j["CT"] = num(m.seconds);
  j["MSE"] = num(m.mse);
  j["MSV"] = num(m.msv);
  j["k0"] = m.k0;
  nlohmann::json blocks = nlohmann::json::array();
  for (double v : ar.per_block) blocks.push_back(num(v));
  j["AR_per_block"] = blocks;
  return j.dump(2);
}

}  // namespace amwg
