#include "ope/adversarial.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "ope/diagnostics.hpp"
#include "ope/errors.hpp"

namespace ope {

Vector find_null_vector(const MomentSet& m, double gamma) {
  const InvertibilityCheck inv = check_invertibility(m, gamma);
  if (inv.invertible) {
    throw PreconditionError("find_null_vector: instance is invertible, sigma_min(I - W) = " +
                            std::to_string(inv.sigma_min));
  }
  const int d = m.dim();
  const Matrix op = Matrix::Identity(d, d) - gamma * m.sigma_cov.ldlt().solve(m.sigma_cr);
  Eigen::JacobiSVD<Matrix> svd(op, Eigen::ComputeFullV);
  // Singular values come sorted in decreasing order.
  Vector v = svd.matrixV().col(d - 1);
  v.normalize();
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
  return v;
}

double MomentDeltas::max() const {
  return std::max({sigma_cov, sigma_cr, sigma_next, theta_phi_r, mean_reward});
}

MomentDeltas moment_deltas(const MomentSet& a, const MomentSet& b) {
  if (a.dim() != b.dim()) throw DimensionError("moment_deltas: dimension mismatch");
  auto max_abs = [](const auto& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); };
  MomentDeltas out;
  out.sigma_cov = max_abs(a.sigma_cov - b.sigma_cov);
  out.sigma_cr = max_abs(a.sigma_cr - b.sigma_cr);
  out.sigma_next = max_abs(a.sigma_next - b.sigma_next);
  out.theta_phi_r = max_abs(a.theta_phi_r - b.theta_phi_r);
  out.mean_reward = std::abs(a.mean_reward - b.mean_reward);
  return out;
}

TwinConstruction build_twin(const OpeInstance& inst) {
  for (const auto& r : inst.mdp.rewards) {
    if (r.kind() == RewardSpec::Kind::shifted) throw PreconditionError("build_twin: instance already carries shifted rewards");
  }
  if (!inst.reward_bound) throw PreconditionError("build_twin: rewards must be bounded");
  TwinConstruction tc;
  tc.original = inst;
  tc.reward_scale = *inst.reward_bound > 1.0 ? 1.0 / *inst.reward_bound : 1.0;
  tc.base = tc.reward_scale == 1.0 ? inst : scale_rewards(inst, tc.reward_scale);
  tc.base.reward_bound = std::min(1.0, *inst.reward_bound);

  const MomentSet m = population_moments(tc.base);
  const double gamma = inst.gamma();
  tc.v = find_null_vector(m, gamma);
  tc.b = inst.features.bound();
  if (!(tc.b > 0.0)) throw PreconditionError("build_twin: features are identically zero");
  const int d = inst.dim();
  tc.null_residual = ((Matrix::Identity(d, d) - gamma * m.sigma_cov.ldlt().solve(m.sigma_cr)) * tc.v).norm();

  const double scale = 1.0 / (2.0 * tc.b);
  tc.twin = tc.base;
  tc.twin.name = inst.name + "_twin";
  tc.twin.reward_bound = 2.0;
  for (auto& r : tc.twin.mdp.rewards) r = RewardSpec::shifted(r, tc.v, scale);
  tc.twin.validate();
  tc.twin_reward_sup = reward_support_bound(tc.twin);

  const MomentSet mt = population_moments(tc.twin);
  tc.deltas = moment_deltas(m, mt);

  const Vector q = exact_q(tc.base);
  const Vector qt = exact_q(tc.twin);
  for (int sa = 0; sa < inst.n_pairs(); ++sa) {
    const double diff = q(sa) - qt(sa);
    tc.q_gap += tc.base.offline.mass(sa) * diff * diff;
  }
  tc.q_gap_bound = lambda_min_symmetric(m.sigma_cov) / (4.0 * tc.b * tc.b);

  const RealizabilityFit fit = realizable_weight(tc.base);
  const Vector predicted = fit.theta - scale * tc.v;
  tc.twin_weight_residual = (qt - inst.features.matrix() * predicted).cwiseAbs().maxCoeff();
  return tc;
}

TelescopingResult telescoping_check(const OpeInstance& inst, const std::vector<int>& pairs) {
  const double gamma = inst.gamma();
  if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("telescoping_check: gamma must lie in (0, 1)");
  const double b = inst.features.bound();
  TelescopingResult out;
  out.horizon = b > 1e-10 ? static_cast<int>(std::ceil(std::log(1e-10 / b) / std::log(gamma))) : 0;
  const Matrix p = policy_transition(inst);
  const Matrix& phi = inst.features.matrix();
  // cur = (P^t Phi), acc = sum_t gamma^t (gamma P^{t+1} Phi - P^t Phi).
  Matrix cur = phi;
  Matrix acc = Matrix::Zero(phi.rows(), phi.cols());
  double disc = 1.0;
  for (int t = 0; t <= out.horizon; ++t) {
    const Matrix next = p * cur;
    acc += disc * (gamma * next - cur);
    cur = next;
    disc *= gamma;
  }
  std::vector<int> idx = pairs;
  if (idx.empty()) {
    idx.resize(static_cast<std::size_t>(inst.n_pairs()));
    for (int i = 0; i < inst.n_pairs(); ++i) idx[static_cast<std::size_t>(i)] = i;
  }
  for (int sa : idx) {
    if (sa < 0 || sa >= inst.n_pairs()) throw DimensionError("telescoping_check: pair index out of range");
    out.residual = std::max(out.residual, (phi.row(sa) + acc.row(sa)).norm());
  }
  return out;
}

}  // namespace ope
