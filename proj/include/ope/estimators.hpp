#pragma once

// FQI, LSTD, BRM, their ridge variants, the idealized noisy-reward FQI, and
// error metrics against the exact Q oracle.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ope/linalg.hpp"
#include "ope/mdp.hpp"
#include "ope/moments.hpp"

namespace ope {

inline constexpr double kDivergenceGuard = 1e12;

struct EstimatorResult {
  Vector theta;
  std::string method;
  int iterations = 0;
  bool diverged = false;
  /// ||theta_t|| for t = 0..iterations (FQI only).
  std::vector<double> norm_trace;
  /// sigma_min of the system matrix fell below rank_tol * sigma_max (LSTD, BRM).
  bool rank_deficient = false;

  /// phi(s,a)^T theta for every pair.
  Vector q_hat(const FeatureMap& features) const { return features.matrix() * theta; }
};

/// theta_t = (Sigma_cov + ridge I)^{-1} (gamma Sigma_cr theta_{t-1} + theta_phi_r) for t = 0..T,
/// with theta_{-1} = theta0 (zero by default), so theta_0 is the pure reward regression.
/// Iteration stops early only if the iterate becomes non-finite.
EstimatorResult fqi(const MomentSet& m, double gamma, int iterations, double ridge = 0.0,
                    const std::optional<Vector>& theta0 = std::nullopt);

/// (Sigma_cov + ridge I - gamma Sigma_cr)^+ theta_phi_r.
EstimatorResult lstd(const MomentSet& m, double gamma, double rank_tol = kDefaultRankTol, double ridge = 0.0);

/// (Sigma_cov - gamma Sigma_cr - gamma Sigma_cr^T + gamma^2 Sigma_next)^+ (theta_phi_r - gamma cross_reward).
EstimatorResult brm(const MomentSet& m, const Vector& cross_reward, double gamma,
                    double rank_tol = kDefaultRankTol);

struct IdealizedFqiResult {
  double variance = 0.0;        // Monte-Carlo estimate of E||theta_T - E theta_T||^2
  double standard_error = 0.0;
  double exact_variance = 0.0;  // trace(S Sigma^{-1} Lambda Sigma^{-1} S^T)
  std::size_t trials = 0;
};

/// theta_T = sum_{k<=T} A^k Sigma_cov^{-1} (theta_phi_r + z), A = gamma Sigma_cov^{-1} Sigma_cr,
/// z ~ N(0, noise_cov). Trial i uses stream i of `seed`.
IdealizedFqiResult idealized_fqi(const MomentSet& pop, double gamma, int iterations, const Matrix& noise_cov,
                                 std::size_t trials, std::uint64_t seed);

struct VarianceLowerBound {
  bool applicable = false;  // a real eigenvalue lambda > 1 exists
  double lambda = 0.0;
  /// sigma_min(Lambda) ((lambda^{T+1} - 1) / (lambda - 1))^2
  double literal = 0.0;
  /// sigma_min(Sigma^{-1} Lambda Sigma^{-1}) ((lambda^{T+1} - 1) / (lambda - 1))^2, valid in any coordinates.
  double corrected = 0.0;
};

VarianceLowerBound fqi_variance_lower_bound(const MomentSet& pop, double gamma, int iterations,
                                            const Matrix& noise_cov);

struct ErrorMetrics {
  double weighted_l2 = 0.0;  // sqrt(E_D (Q - Q_hat)^2)
  double mean_abs = 0.0;     // E_D |Q - Q_hat|
  double sup_abs = 0.0;      // max over all pairs
};

/// Scores against exact_q. When the instance is realizable the identity
/// E_D (Q - Q_hat)^2 = ||Sigma^{1/2} (theta - theta*)||^2 is checked and a
/// NumericalError raised if it fails.
ErrorMetrics error_metrics(const Vector& theta, const OpeInstance& inst);
ErrorMetrics error_metrics(const EstimatorResult& result, const OpeInstance& inst);

/// Feature-blind tabular evaluator: empirical P^pi and mean rewards on the
/// visited pairs, then (I - gamma P_hat) Q = r_hat. Unvisited pairs get Q = 0.
Vector tabular_q(const Dataset& data, int n_states, int n_actions, double gamma);

}  // namespace ope
