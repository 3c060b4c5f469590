#pragma once

// Population and empirical second-moment objects, the whitened cross
// covariance, leverages and variance constants, and the estimation errors
// eps_op / eps_r.

#include <cstdint>

#include "ope/linalg.hpp"
#include "ope/mdp.hpp"

namespace ope {

enum class Provenance { population, empirical };

struct MomentSet {
  Matrix sigma_cov;    // E phi phi^T
  Matrix sigma_cr;     // E phi phi'^T
  Matrix sigma_next;   // E phi' phi'^T
  Vector theta_phi_r;  // E phi r
  double mean_reward = 0.0;
  Provenance provenance = Provenance::population;
  std::size_t n = 0;       // empirical only
  std::uint64_t seed = 0;  // empirical only

  int dim() const noexcept { return static_cast<int>(sigma_cov.rows()); }
};

MomentSet population_moments(const OpeInstance& inst);

/// Plug-in averages over the records. `n_actions` maps (s, a) to the feature row.
MomentSet empirical_moments(const Dataset& data, const FeatureMap& features, int n_actions);

/// E[phi(s',a') r(s,a)], the extra moment used by BRM.
Vector population_cross_reward(const OpeInstance& inst);
Vector empirical_cross_reward(const Dataset& data, const FeatureMap& features, int n_actions);

/// gamma Sigma_cov^{-1/2} Sigma_cr Sigma_cov^{-1/2}.
Matrix whitened_cross(const MomentSet& m, double gamma);

struct RegularityReport {
  double rho_s = 0.0;
  double rho_sp = 0.0;
  double c_ds = 0.0;
  double var_cov = 0.0;
  double var_r = 0.0;
  double var_cr = 0.0;
};

/// Exact evaluation over supp(D) and the pairs reachable from it.
RegularityReport regularity_constants(const OpeInstance& inst);

struct EmpiricalErrorReport {
  double eps_op = 0.0;
  double eps_r = 0.0;
  std::size_t n = 0;
  /// Set when the estimate's covariance is singular; eps_* are then +inf.
  bool singular = false;
};

/// Errors of `estimate` measured in the geometry of `reference`.
/// Passing the population moments as `reference` gives the usual eps_op, eps_r;
/// passing another empirical set gives the empirical-only variant.
EmpiricalErrorReport estimation_errors(const MomentSet& reference, const MomentSet& estimate, double gamma);

}  // namespace ope
