#pragma once

// Reward-twisted twin construction for rank-deficient instances: same
// transitions and low-order moments, different Q-function.

#include <vector>

#include "ope/linalg.hpp"
#include "ope/mdp.hpp"
#include "ope/moments.hpp"

namespace ope {

/// Unit right-singular vector of I - gamma Sigma_cov^{-1} Sigma_cr for its smallest
/// singular value, sign-normalized so the largest-magnitude entry is positive.
/// Throws PreconditionError when sigma_min(I - W) exceeds the verdict margin.
Vector find_null_vector(const MomentSet& m, double gamma);

struct MomentDeltas {
  double sigma_cov = 0.0;
  double sigma_cr = 0.0;
  double sigma_next = 0.0;
  double theta_phi_r = 0.0;
  double mean_reward = 0.0;

  double max() const;
};

MomentDeltas moment_deltas(const MomentSet& a, const MomentSet& b);

struct TwinConstruction {
  OpeInstance original;
  /// `original` with rewards rescaled into [-1, 1]; this is the instance that is twinned.
  OpeInstance base;
  OpeInstance twin;
  double reward_scale = 1.0;
  Vector v;
  double b = 0.0;            // max ||phi||
  double null_residual = 0;  // ||(I - gamma Sigma^{-1} Sigma_cr) v||
  MomentDeltas deltas;
  double q_gap = 0.0;        // E_D (Q - Q_twin)^2, both on the rescaled scale
  double q_gap_bound = 0.0;  // sigma_min(Sigma_cov) / (4 B^2)
  double twin_reward_sup = 0.0;
  /// max |Q_twin - phi^T (theta* - v / (2B))| over all pairs.
  double twin_weight_residual = 0.0;
};

/// Rewards are first divided by the declared bound when it exceeds 1.
TwinConstruction build_twin(const OpeInstance& inst);

/// max over `pairs` (all pairs when empty) of
/// ||phi(s,a) + E sum_{t<=H} gamma^t (gamma phi_{t+1} - phi_t)||, with H chosen
/// so that gamma^H max ||phi|| <= 1e-10. Returns the residual and the horizon used.
struct TelescopingResult {
  double residual = 0.0;
  int horizon = 0;
};
TelescopingResult telescoping_check(const OpeInstance& inst, const std::vector<int>& pairs = {});

}  // namespace ope
