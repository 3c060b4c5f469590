#include "ope/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ope/errors.hpp"

namespace ope {

MomentSet population_moments(const OpeInstance& inst) {
  const int d = inst.dim();
  const int n = inst.n_pairs();
  const Matrix& phi = inst.features.matrix();
  const Matrix p = policy_transition(inst);
  const Vector r = mean_rewards(inst);

  MomentSet m;
  m.sigma_cov = Matrix::Zero(d, d);
  m.sigma_cr = Matrix::Zero(d, d);
  m.sigma_next = Matrix::Zero(d, d);
  m.theta_phi_r = Vector::Zero(d);
  m.provenance = Provenance::population;
  for (int sa = 0; sa < n; ++sa) {
    const double w = inst.offline.mass(sa);
    if (w == 0.0) continue;
    const Vector f = phi.row(sa).transpose();
    m.sigma_cov.noalias() += w * f * f.transpose();
    m.theta_phi_r += w * r(sa) * f;
    m.mean_reward += w * r(sa);
    Vector fn = Vector::Zero(d);
    Matrix next = Matrix::Zero(d, d);
    for (int k = 0; k < n; ++k) {
      const double q = p(sa, k);
      if (q == 0.0) continue;
      const Vector g = phi.row(k).transpose();
      fn += q * g;
      next.noalias() += q * g * g.transpose();
    }
    m.sigma_cr.noalias() += w * f * fn.transpose();
    m.sigma_next += w * next;
  }
  m.sigma_cov = symmetrize(m.sigma_cov);
  m.sigma_next = symmetrize(m.sigma_next);
  return m;
}

MomentSet empirical_moments(const Dataset& data, const FeatureMap& features, int n_actions) {
  if (data.size() == 0) throw PreconditionError("empirical_moments: empty dataset");
  const int d = features.dim();
  const Matrix& phi = features.matrix();
  MomentSet m;
  m.sigma_cov = Matrix::Zero(d, d);
  m.sigma_cr = Matrix::Zero(d, d);
  m.sigma_next = Matrix::Zero(d, d);
  m.theta_phi_r = Vector::Zero(d);
  m.provenance = Provenance::empirical;
  m.n = data.size();
  m.seed = data.seed;
  for (const Transition& t : data.records) {
    const int sa = pair_index(t.s, t.a, n_actions);
    const int next = pair_index(t.sp, t.ap, n_actions);
    if (sa < 0 || sa >= features.n_pairs() || next < 0 || next >= features.n_pairs()) {
      throw DimensionError("empirical_moments: record indexes outside the feature table");
    }
    const auto f = phi.row(sa).transpose();
    const auto g = phi.row(next).transpose();
    m.sigma_cov.noalias() += f * f.transpose();
    m.sigma_cr.noalias() += f * g.transpose();
    m.sigma_next.noalias() += g * g.transpose();
    m.theta_phi_r += t.r * f;
    m.mean_reward += t.r;
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  m.sigma_cov = symmetrize(m.sigma_cov * inv);
  m.sigma_cr *= inv;
  m.sigma_next = symmetrize(m.sigma_next * inv);
  m.theta_phi_r *= inv;
  m.mean_reward *= inv;
  return m;
}

Vector population_cross_reward(const OpeInstance& inst) {
  const int n = inst.n_pairs();
  const Matrix& phi = inst.features.matrix();
  const Matrix p = policy_transition(inst);
  Vector out = Vector::Zero(inst.dim());
  for (int sa = 0; sa < n; ++sa) {
    const double w = inst.offline.mass(sa);
    if (w == 0.0) continue;
    for (int k = 0; k < n; ++k) {
      const double q = p(sa, k);
      if (q == 0.0) continue;
      out += w * q * conditional_mean_reward(inst, sa, k) * phi.row(k).transpose();
    }
  }
  return out;
}

Vector empirical_cross_reward(const Dataset& data, const FeatureMap& features, int n_actions) {
  if (data.size() == 0) throw PreconditionError("empirical_cross_reward: empty dataset");
  Vector out = Vector::Zero(features.dim());
  for (const Transition& t : data.records) {
    out += t.r * features.matrix().row(pair_index(t.sp, t.ap, n_actions)).transpose();
  }
  return out / static_cast<double>(data.size());
}

Matrix whitened_cross(const MomentSet& m, double gamma) {
  const Matrix w = spd_inverse_sqrt(m.sigma_cov);
  return gamma * w * m.sigma_cr * w;
}

RegularityReport regularity_constants(const OpeInstance& inst) {
  const MomentSet m = population_moments(inst);
  const Matrix white = spd_inverse_sqrt(m.sigma_cov);
  const int d = inst.dim();
  const int n = inst.n_pairs();
  const Matrix& phi = inst.features.matrix();
  const Matrix p = policy_transition(inst);
  // Whitened features of every pair: row sa is (Sigma^{-1/2} phi(sa))^T.
  const Matrix x = phi * white;

  RegularityReport rep;
  Matrix fourth_cov = Matrix::Zero(d, d);  // E ||x||^2 x x^T
  Matrix fourth_y = Matrix::Zero(d, d);    // E ||y||^2 x x^T
  Matrix fourth_x = Matrix::Zero(d, d);    // E ||x||^2 y y^T
  double xr2 = 0.0;                        // E ||x r||^2
  for (int sa = 0; sa < n; ++sa) {
    const double w = inst.offline.mass(sa);
    if (w == 0.0) continue;
    const Vector xs = x.row(sa).transpose();
    const double nx2 = xs.squaredNorm();
    rep.rho_s = std::max(rep.rho_s, std::sqrt(nx2));
    fourth_cov.noalias() += w * nx2 * xs * xs.transpose();
    xr2 += w * nx2 * reward_second_moment(inst, sa);
    for (int k = 0; k < n; ++k) {
      const double q = p(sa, k);
      if (q == 0.0) continue;
      const Vector ys = x.row(k).transpose();
      const double ny2 = ys.squaredNorm();
      rep.rho_sp = std::max(rep.rho_sp, std::sqrt(ny2));
      fourth_y.noalias() += w * q * ny2 * xs * xs.transpose();
      fourth_x.noalias() += w * q * nx2 * ys * ys.transpose();
    }
  }
  const Matrix next_w = white * m.sigma_next * white;
  rep.c_ds = std::max(0.0, lambda_max_symmetric(next_w));
  rep.var_cov = op_norm(symmetrize(fourth_cov) - Matrix::Identity(d, d));
  rep.var_r = std::max(0.0, xr2 - (white * m.theta_phi_r).squaredNorm());
  const Matrix mw = white * m.sigma_cr * white;
  const double left = lambda_max_symmetric(fourth_y - mw * mw.transpose());
  const double right = lambda_max_symmetric(fourth_x - mw.transpose() * mw);
  rep.var_cr = std::max({0.0, left, right});
  return rep;
}

EmpiricalErrorReport estimation_errors(const MomentSet& reference, const MomentSet& estimate, double gamma) {
  if (reference.dim() != estimate.dim()) throw DimensionError("estimation_errors: dimension mismatch");
  EmpiricalErrorReport rep;
  rep.n = estimate.n;
  const Matrix root = spd_sqrt(reference.sigma_cov);
  const Matrix inv_root = spd_inverse_sqrt(reference.sigma_cov);
  const Eigen::LDLT<Matrix> ldlt(estimate.sigma_cov);
  const double lo = estimate.dim() == 0 ? 1.0 : lambda_min_symmetric(estimate.sigma_cov);
  if (ldlt.info() != Eigen::Success || lo <= kCovarianceFloor * std::max(1.0, op_norm(estimate.sigma_cov))) {
    rep.singular = true;
    rep.eps_op = std::numeric_limits<double>::infinity();
    rep.eps_r = std::numeric_limits<double>::infinity();
    return rep;
  }
  const Matrix backup_hat = gamma * ldlt.solve(estimate.sigma_cr);
  const Matrix w_ref = gamma * inv_root * reference.sigma_cr * inv_root;
  rep.eps_op = op_norm(root * backup_hat * inv_root - w_ref);
  const Vector reg_hat = ldlt.solve(estimate.theta_phi_r);
  const Vector reg = inv_root * (inv_root * reference.theta_phi_r);
  rep.eps_r = (root * (reg_hat - reg)).norm();
  return rep;
}

}  // namespace ope
