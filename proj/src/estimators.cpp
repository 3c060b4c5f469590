#include "ope/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "ope/errors.hpp"
#include "ope/rng.hpp"

namespace ope {

namespace {

bool is_rank_deficient(const Matrix& a, double rank_tol) {
  const Vector s = singular_values(a);
  if (s.size() == 0) return false;
  return s.minCoeff() < rank_tol * s.maxCoeff() || s.maxCoeff() == 0.0;
}

}  // namespace

EstimatorResult fqi(const MomentSet& m, double gamma, int iterations, double ridge,
                    const std::optional<Vector>& theta0) {
  if (iterations < 0) throw PreconditionError("fqi: T must be nonnegative");
  if (ridge < 0.0) throw PreconditionError("fqi: ridge must be nonnegative");
  const int d = m.dim();
  const Matrix reg = m.sigma_cov + ridge * Matrix::Identity(d, d);
  if (lambda_min_symmetric(reg) <= kCovarianceFloor) {
    throw SingularCovarianceError("fqi: regression matrix is singular; add a ridge term");
  }
  const Eigen::LLT<Matrix> llt(symmetrize(reg));
  if (llt.info() != Eigen::Success) throw SingularCovarianceError("fqi: regression matrix is not positive definite");
  const Matrix backup = gamma * llt.solve(m.sigma_cr);
  const Vector offset = llt.solve(m.theta_phi_r);

  EstimatorResult res;
  res.method = ridge > 0.0 ? "fqi-ridge" : "fqi";
  res.theta = theta0 ? *theta0 : Vector::Zero(d);
  if (res.theta.size() != d) throw DimensionError("fqi: theta0 has the wrong dimension");
  // theta_T is the (T+1)-th regression from the start, so theta_0 = Sigma^{-1} theta_phi_r from zero.
  for (int t = 0; t <= iterations; ++t) {
    Vector next = backup * res.theta + offset;
    const double nrm = next.norm();
    if (!std::isfinite(nrm)) {
      res.diverged = true;
      break;
    }
    res.theta = std::move(next);
    res.iterations = t;
    res.norm_trace.push_back(nrm);
    if (nrm > kDivergenceGuard) res.diverged = true;
  }
  return res;
}

EstimatorResult lstd(const MomentSet& m, double gamma, double rank_tol, double ridge) {
  const int d = m.dim();
  const Matrix a = m.sigma_cov + ridge * Matrix::Identity(d, d) - gamma * m.sigma_cr;
  EstimatorResult res;
  res.method = ridge > 0.0 ? "lstd-ridge" : "lstd";
  res.theta = pinv(a, rank_tol) * m.theta_phi_r;
  res.rank_deficient = is_rank_deficient(a, rank_tol);
  return res;
}

EstimatorResult brm(const MomentSet& m, const Vector& cross_reward, double gamma, double rank_tol) {
  if (cross_reward.size() != m.dim()) throw DimensionError("brm: cross_reward has the wrong dimension");
  const Matrix a = m.sigma_cov - gamma * m.sigma_cr - gamma * m.sigma_cr.transpose() + gamma * gamma * m.sigma_next;
  EstimatorResult res;
  res.method = "brm";
  res.theta = pinv(a, rank_tol) * (m.theta_phi_r - gamma * cross_reward);
  res.rank_deficient = is_rank_deficient(a, rank_tol);
  return res;
}

namespace {

// S = sum_{k<=T} A^k for A = gamma Sigma^{-1} Sigma_cr.
Matrix backup_series(const MomentSet& pop, double gamma, int iterations, Eigen::LLT<Matrix>& llt) {
  const int d = pop.dim();
  llt.compute(symmetrize(pop.sigma_cov));
  if (llt.info() != Eigen::Success || lambda_min_symmetric(pop.sigma_cov) <= kCovarianceFloor) {
    throw SingularCovarianceError("idealized_fqi: Sigma_cov is singular");
  }
  const Matrix a = gamma * llt.solve(pop.sigma_cr);
  Matrix s = Matrix::Identity(d, d);
  Matrix power = Matrix::Identity(d, d);
  for (int k = 1; k <= iterations; ++k) {
    power = a * power;
    s += power;
  }
  return s;
}

}  // namespace

IdealizedFqiResult idealized_fqi(const MomentSet& pop, double gamma, int iterations, const Matrix& noise_cov,
                                 std::size_t trials, std::uint64_t seed) {
  if (iterations < 0) throw PreconditionError("idealized_fqi: T must be nonnegative");
  if (trials < 2) throw PreconditionError("idealized_fqi: need at least two trials");
  const int d = pop.dim();
  if (noise_cov.rows() != d || noise_cov.cols() != d) throw DimensionError("idealized_fqi: noise_cov must be d x d");
  const Eigen::LLT<Matrix> noise_chol(symmetrize(noise_cov));
  if (noise_chol.info() != Eigen::Success || lambda_min_symmetric(noise_cov) <= 0.0) {
    throw PreconditionError("idealized_fqi: noise covariance must be positive definite");
  }
  Eigen::LLT<Matrix> llt;
  const Matrix s = backup_series(pop, gamma, iterations, llt);
  const Matrix lower = noise_chol.matrixL();
  const Vector mean = s * llt.solve(pop.theta_phi_r);
  const Matrix gain = s * llt.solve(Matrix::Identity(d, d));

  IdealizedFqiResult res;
  res.trials = trials;
  res.exact_variance = (gain * symmetrize(noise_cov) * gain.transpose()).trace();
  double sum = 0.0;
  double sum_sq = 0.0;
  Vector g(d);
  for (std::size_t i = 0; i < trials; ++i) {
    CounterRng rng(seed, i);
    for (int j = 0; j < d; ++j) g(j) = rng.normal();
    const Vector z = lower * g;
    const Vector theta = s * llt.solve(pop.theta_phi_r + z);
    const double dev = (theta - mean).squaredNorm();
    sum += dev;
    sum_sq += dev * dev;
  }
  const double nt = static_cast<double>(trials);
  res.variance = sum / nt;
  const double var_of_dev = std::max(0.0, (sum_sq - nt * res.variance * res.variance) / (nt - 1.0));
  res.standard_error = std::sqrt(var_of_dev / nt);
  return res;
}

VarianceLowerBound fqi_variance_lower_bound(const MomentSet& pop, double gamma, int iterations,
                                            const Matrix& noise_cov) {
  const int d = pop.dim();
  const Eigen::LLT<Matrix> llt(symmetrize(pop.sigma_cov));
  if (llt.info() != Eigen::Success) throw SingularCovarianceError("fqi_variance_lower_bound: Sigma_cov is singular");
  const Matrix a = gamma * llt.solve(pop.sigma_cr);
  VarianceLowerBound out;
  for (const auto& z : spectrum(a).eigenvalues) {
    if (std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z)) && z.real() > 1.0) {
      out.applicable = true;
      out.lambda = std::max(out.lambda, z.real());
    }
  }
  if (!out.applicable) return out;
  const double lam = out.lambda;
  const double geom = (std::pow(lam, iterations + 1) - 1.0) / (lam - 1.0);
  const Matrix inv = llt.solve(Matrix::Identity(d, d));
  out.literal = lambda_min_symmetric(noise_cov) * geom * geom;
  out.corrected = lambda_min_symmetric(inv * symmetrize(noise_cov) * inv) * geom * geom;
  return out;
}

ErrorMetrics error_metrics(const Vector& theta, const OpeInstance& inst) {
  if (theta.size() != inst.dim()) throw DimensionError("error_metrics: theta has the wrong dimension");
  const Vector q = exact_q(inst);
  const Vector diff = q - inst.features.matrix() * theta;
  ErrorMetrics out;
  double sq = 0.0;
  for (int sa = 0; sa < inst.n_pairs(); ++sa) {
    const double w = inst.offline.mass(sa);
    sq += w * diff(sa) * diff(sa);
    out.mean_abs += w * std::abs(diff(sa));
  }
  out.weighted_l2 = std::sqrt(sq);
  out.sup_abs = diff.cwiseAbs().maxCoeff();

  const RealizabilityFit fit = realizable_weight(inst);
  if (fit.realizable) {
    const MomentSet m = population_moments(inst);
    const Vector delta = theta - fit.theta;
    const double via_cov = delta.dot(m.sigma_cov * delta);
    const double scale = 1.0 + sq + std::abs(via_cov);
    if (std::abs(via_cov - sq) > 1e-8 * scale) {
      throw NumericalError("error_metrics: data-norm identity failed for a realizable instance");
    }
  }
  return out;
}

ErrorMetrics error_metrics(const EstimatorResult& result, const OpeInstance& inst) {
  return error_metrics(result.theta, inst);
}

Vector tabular_q(const Dataset& data, int n_states, int n_actions, double gamma) {
  const int n = n_states * n_actions;
  Matrix p = Matrix::Zero(n, n);
  Vector r = Vector::Zero(n);
  Vector count = Vector::Zero(n);
  for (const Transition& t : data.records) {
    const int sa = pair_index(t.s, t.a, n_actions);
    const int next = pair_index(t.sp, t.ap, n_actions);
    if (sa < 0 || sa >= n || next < 0 || next >= n) throw DimensionError("tabular_q: record out of range");
    count(sa) += 1.0;
    r(sa) += t.r;
    p(sa, next) += 1.0;
  }
  for (int sa = 0; sa < n; ++sa) {
    if (count(sa) == 0.0) continue;
    r(sa) /= count(sa);
    p.row(sa) /= count(sa);
  }
  return (Matrix::Identity(n, n) - gamma * p).partialPivLu().solve(r);
}

}  // namespace ope
