#pragma once

// Condition-hierarchy checks (stability, invertibility, low distribution
// shift, completeness, symmetric stability, contractivity, pushforward
// concentrability), the aggregated report, and the misspecification tools.

#include <optional>
#include <string>

#include "ope/estimators.hpp"
#include "ope/linalg.hpp"
#include "ope/mdp.hpp"
#include "ope/moments.hpp"

namespace ope {

/// Margin used by every strict inequality in the hierarchy (rho < 1, sigma_min > 0, ...).
inline constexpr double kVerdictMargin = 1e-9;
inline constexpr double kCompletenessTol = 1e-8;

enum class StabilityVerdict { stable, marginal, unstable };
const char* to_string(StabilityVerdict v);

struct StabilityCheck {
  double rho = 0.0;
  StabilityVerdict verdict = StabilityVerdict::unstable;
  bool stable = false;
  std::optional<Matrix> p_gamma;
  std::optional<double> p_gamma_opnorm;
  std::optional<double> p_gamma_cond;
};

/// rho(W) for W = whitened_cross; the Lyapunov certificate P_gamma when stable.
StabilityCheck check_stability(const MomentSet& m, double gamma);

struct InvertibilityCheck {
  double sigma_min = 0.0;  // sigma_min(I - W)
  bool invertible = false;
};
InvertibilityCheck check_invertibility(const MomentSet& m, double gamma);

/// Columns of P^pi Phi and the mean-reward vector lie in span(Phi):
/// ||(I - Phi Phi^+) v|| <= tol ||v||.
bool check_completeness(const OpeInstance& inst, double tol = kCompletenessTol);

struct SymmetricStabilityCheck {
  double kappa = 0.0;  // lambda_max(W + W^T) / 2
  bool sym_stable = false;
};
SymmetricStabilityCheck check_symmetric_stability(const MomentSet& m, double gamma);

/// lambda_min([[S_cov, S_cr], [S_cr^T, S_cov]]) >= -1e-9.
bool check_contractivity(const MomentSet& m);

struct PushforwardCheck {
  double c_a = 0.0;  // +inf when some pair has zero offline mass
  double c_s = 0.0;  // +inf when a reachable state has zero offline mass
  bool holds = false;
};
PushforwardCheck check_pushforward(const OpeInstance& inst);

struct DiagnosticsReport {
  std::string name;
  double gamma = 0.0;
  int dim = 0;
  double rho_whitened = 0.0;
  StabilityVerdict stability = StabilityVerdict::unstable;
  bool stable = false;
  std::optional<double> p_gamma_opnorm;
  std::optional<double> p_gamma_cond;
  /// 1 / (6 ||P_gamma||^2), the eps_op level under which the FQI bound applies.
  std::optional<double> fqi_eps_op_threshold;
  double sigma_min_inv = 0.0;
  bool invertible = false;
  /// (1/sigma_min) / (cond(P)^{1/2} ||P||) when stable.
  std::optional<double> lstd_fqi_constant;
  double c_ds = 0.0;
  bool low_shift = false;
  bool complete = false;
  double kappa = 0.0;
  bool sym_stable = false;
  bool contractive = false;
  PushforwardCheck pushforward;
  double rho_s = 0.0;
  double rho_sp = 0.0;
  bool realizable = false;
  double realizability_residual = 0.0;
};

/// Runs every check and throws ValidationError if any implication
/// (low_shift, complete, contractive => stable => invertible <= sym_stable) fails.
DiagnosticsReport hierarchy_report(const OpeInstance& inst);

/// Returns a description of the first violated implication, or nullopt.
std::optional<std::string> hierarchy_violation(const DiagnosticsReport& r);

struct ChebyshevFit {
  Vector theta;
  double eps = 0.0;
};

/// min_theta max_i |q_i - phi_i^T theta| solved as a linear program.
ChebyshevFit chebyshev_fit(const Matrix& phi, const Vector& q);
ChebyshevFit chebyshev_fit(const OpeInstance& inst);

struct MisspecReport {
  Vector theta_inf;
  double eps_inf = 0.0;
  Vector theta_fp;
  double eps_fp = 0.0;
  double sigma_min = 0.0;
  double rho_s = 0.0;
  /// Per pair: ||Sigma^{-1/2} phi|| (eps_fp + rho_s eps_inf / sigma_min) + eps_inf.
  Vector pointwise_bound;
  /// Per pair: |Q - Q_hat|.
  Vector pointwise_error;
  double max_ratio = 0.0;
  /// Smallest power of two (at least 1) with error <= constant * bound everywhere.
  double constant = 1.0;
};

/// theta_fp is the projected Bellman fixed point (Sigma_cov - gamma Sigma_cr)^{-1} theta_phi_r.
/// Throws PreconditionError if invertibility fails.
MisspecReport misspec_bound_check(const OpeInstance& inst, const EstimatorResult& result);

}  // namespace ope
