#include "ope/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ope/errors.hpp"
#include "ope/lp.hpp"

namespace ope {

const char* to_string(StabilityVerdict v) {
  switch (v) {
    case StabilityVerdict::stable: return "stable";
    case StabilityVerdict::marginal: return "marginal";
    case StabilityVerdict::unstable: return "unstable";
  }
  return "unstable";
}

StabilityCheck check_stability(const MomentSet& m, double gamma) {
  const Matrix w = whitened_cross(m, gamma);
  StabilityCheck out;
  out.rho = spectral_radius(w);
  if (out.rho < 1.0 - kVerdictMargin) {
    out.verdict = StabilityVerdict::stable;
    out.stable = true;
    out.p_gamma = solve_dlyap(w);
    out.p_gamma_opnorm = op_norm(*out.p_gamma);
    out.p_gamma_cond = condition_number(*out.p_gamma);
  } else if (out.rho <= 1.0 + kVerdictMargin) {
    out.verdict = StabilityVerdict::marginal;
  }
  return out;
}

InvertibilityCheck check_invertibility(const MomentSet& m, double gamma) {
  const Matrix w = whitened_cross(m, gamma);
  InvertibilityCheck out;
  out.sigma_min = min_singular_value(Matrix::Identity(w.rows(), w.cols()) - w);
  out.invertible = out.sigma_min > kVerdictMargin;
  return out;
}

bool check_completeness(const OpeInstance& inst, double tol) {
  const Matrix& phi = inst.features.matrix();
  const Matrix proj = phi * pinv(phi);
  const Matrix resid_op = Matrix::Identity(phi.rows(), phi.rows()) - proj;
  Matrix cols(phi.rows(), phi.cols() + 1);
  cols.leftCols(phi.cols()) = policy_transition(inst) * phi;
  cols.col(phi.cols()) = mean_rewards(inst);
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    const double nrm = cols.col(j).norm();
    if (nrm == 0.0) continue;
    if ((resid_op * cols.col(j)).norm() > tol * nrm) return false;
  }
  return true;
}

SymmetricStabilityCheck check_symmetric_stability(const MomentSet& m, double gamma) {
  const Matrix w = whitened_cross(m, gamma);
  SymmetricStabilityCheck out;
  out.kappa = 0.5 * lambda_max_symmetric(w + w.transpose());
  out.sym_stable = out.kappa < 1.0 - kVerdictMargin;
  return out;
}

bool check_contractivity(const MomentSet& m) {
  // Fails fast on a singular covariance, matching the other checks.
  spd_inverse_sqrt(m.sigma_cov);
  const int d = m.dim();
  Matrix block(2 * d, 2 * d);
  block << m.sigma_cov, m.sigma_cr, m.sigma_cr.transpose(), m.sigma_cov;
  return lambda_min_symmetric(block) >= -kVerdictMargin;
}

PushforwardCheck check_pushforward(const OpeInstance& inst) {
  const int s_count = inst.mdp.n_states;
  const int a_count = inst.mdp.n_actions;
  const double inf = std::numeric_limits<double>::infinity();
  Vector state_mass = Vector::Zero(s_count);
  for (int s = 0; s < s_count; ++s) {
    for (int a = 0; a < a_count; ++a) state_mass(s) += inst.offline.mass(pair_index(s, a, a_count));
  }
  PushforwardCheck out;
  bool full_support = true;
  for (int sa = 0; sa < inst.n_pairs(); ++sa) full_support &= inst.offline.mass(sa) > 0.0;
  if (!full_support) {
    out.c_a = inf;
  } else {
    for (int s = 0; s < s_count; ++s) {
      for (int a = 0; a < a_count; ++a) {
        const double cond = inst.offline.mass(pair_index(s, a, a_count)) / state_mass(s);
        out.c_a = std::max(out.c_a, 1.0 / cond);
      }
    }
  }
  for (int sa = 0; sa < inst.n_pairs(); ++sa) {
    for (int sp = 0; sp < s_count; ++sp) {
      const double p = inst.mdp.transitions(sa, sp);
      if (p == 0.0) continue;
      out.c_s = state_mass(sp) > 0.0 ? std::max(out.c_s, p / state_mass(sp)) : inf;
    }
  }
  out.holds = full_support && std::isfinite(out.c_a) && std::isfinite(out.c_s);
  return out;
}

std::optional<std::string> hierarchy_violation(const DiagnosticsReport& r) {
  if (r.low_shift && !r.stable) return "low_shift without stability";
  if (r.complete && !r.stable) return "completeness without stability";
  if (r.contractive && !r.stable) return "contractivity without stability";
  if (r.stable && !r.invertible) return "stability without invertibility";
  if (r.sym_stable && !r.invertible) return "symmetric stability without invertibility";
  return std::nullopt;
}

DiagnosticsReport hierarchy_report(const OpeInstance& inst) {
  const MomentSet m = population_moments(inst);
  const double gamma = inst.gamma();
  DiagnosticsReport r;
  r.name = inst.name;
  r.gamma = gamma;
  r.dim = inst.dim();

  const StabilityCheck st = check_stability(m, gamma);
  r.rho_whitened = st.rho;
  r.stability = st.verdict;
  r.stable = st.stable;
  r.p_gamma_opnorm = st.p_gamma_opnorm;
  r.p_gamma_cond = st.p_gamma_cond;
  if (st.p_gamma_opnorm) r.fqi_eps_op_threshold = 1.0 / (6.0 * *st.p_gamma_opnorm * *st.p_gamma_opnorm);

  const InvertibilityCheck inv = check_invertibility(m, gamma);
  r.sigma_min_inv = inv.sigma_min;
  r.invertible = inv.invertible;
  if (st.stable && inv.sigma_min > 0.0) {
    r.lstd_fqi_constant = (1.0 / inv.sigma_min) / (std::sqrt(*st.p_gamma_cond) * *st.p_gamma_opnorm);
  }

  const RegularityReport reg = regularity_constants(inst);
  r.c_ds = reg.c_ds;
  r.rho_s = reg.rho_s;
  r.rho_sp = reg.rho_sp;
  r.low_shift = gamma * gamma * reg.c_ds < 1.0 - kVerdictMargin;
  r.complete = check_completeness(inst);

  const SymmetricStabilityCheck sym = check_symmetric_stability(m, gamma);
  r.kappa = sym.kappa;
  r.sym_stable = sym.sym_stable;
  r.contractive = check_contractivity(m);
  r.pushforward = check_pushforward(inst);

  const RealizabilityFit fit = realizable_weight(inst);
  r.realizable = fit.realizable;
  r.realizability_residual = fit.residual;

  if (auto bad = hierarchy_violation(r)) {
    throw ValidationError("hierarchy_report(" + inst.name + "): internal inconsistency, " + *bad);
  }
  return r;
}

ChebyshevFit chebyshev_fit(const Matrix& phi, const Vector& q) {
  const int n = static_cast<int>(phi.rows());
  const int d = static_cast<int>(phi.cols());
  if (q.size() != n) throw DimensionError("chebyshev_fit: q has the wrong length");
  // Variables (theta+, theta-, t) >= 0; rows  phi theta - t <= q  and  -phi theta - t <= -q.
  const int nv = 2 * d + 1;
  Matrix a(2 * n, nv);
  Vector b(2 * n);
  a.block(0, 0, n, d) = phi;
  a.block(0, d, n, d) = -phi;
  a.block(0, 2 * d, n, 1).setConstant(-1.0);
  a.block(n, 0, n, d) = -phi;
  a.block(n, d, n, d) = phi;
  a.block(n, 2 * d, n, 1).setConstant(-1.0);
  b.head(n) = q;
  b.tail(n) = -q;
  Vector c = Vector::Zero(nv);
  c(2 * d) = 1.0;
  const LpResult lp = solve_lp(c, a, b);
  if (lp.status != LpStatus::optimal) throw NumericalError("chebyshev_fit: linear program did not reach an optimum");
  ChebyshevFit out;
  out.theta = lp.x.head(d) - lp.x.segment(d, d);
  out.eps = (q - phi * out.theta).cwiseAbs().maxCoeff();
  return out;
}

ChebyshevFit chebyshev_fit(const OpeInstance& inst) { return chebyshev_fit(inst.features.matrix(), exact_q(inst)); }

MisspecReport misspec_bound_check(const OpeInstance& inst, const EstimatorResult& result) {
  const MomentSet m = population_moments(inst);
  const double gamma = inst.gamma();
  const InvertibilityCheck inv = check_invertibility(m, gamma);
  if (!inv.invertible) {
    throw PreconditionError("misspec_bound_check: invertibility fails (sigma_min = " + std::to_string(inv.sigma_min) + ")");
  }
  MisspecReport rep;
  const ChebyshevFit cheb = chebyshev_fit(inst);
  rep.theta_inf = cheb.theta;
  rep.eps_inf = cheb.eps;
  rep.sigma_min = inv.sigma_min;
  rep.rho_s = regularity_constants(inst).rho_s;

  rep.theta_fp = (m.sigma_cov - gamma * m.sigma_cr).partialPivLu().solve(m.theta_phi_r);
  const Vector delta = rep.theta_fp - result.theta;
  rep.eps_fp = std::sqrt(std::max(0.0, delta.dot(m.sigma_cov * delta)));

  const Matrix white = spd_inverse_sqrt(m.sigma_cov);
  const Matrix& phi = inst.features.matrix();
  const Vector q = exact_q(inst);
  const Vector q_hat = phi * result.theta;
  const int n = inst.n_pairs();
  rep.pointwise_bound.resize(n);
  rep.pointwise_error.resize(n);
  const double amplified = rep.eps_fp + rep.rho_s * rep.eps_inf / rep.sigma_min;
  for (int sa = 0; sa < n; ++sa) {
    const double lev = (white * phi.row(sa).transpose()).norm();
    rep.pointwise_bound(sa) = lev * amplified + rep.eps_inf;
    rep.pointwise_error(sa) = std::abs(q(sa) - q_hat(sa));
    if (rep.pointwise_error(sa) == 0.0) continue;
    const double ratio = rep.pointwise_bound(sa) > 0.0 ? rep.pointwise_error(sa) / rep.pointwise_bound(sa)
                                                       : std::numeric_limits<double>::infinity();
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  rep.constant = 1.0;
  while (rep.constant < rep.max_ratio * (1.0 - 1e-12) && std::isfinite(rep.max_ratio)) rep.constant *= 2.0;
  if (!std::isfinite(rep.max_ratio)) rep.constant = std::numeric_limits<double>::infinity();
  return rep;
}

}  // namespace ope
