#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ope/linalg.hpp"
#include "ope/mdp.hpp"

namespace testing {

inline ope::Matrix random_matrix(std::mt19937_64& gen, int rows, int cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  ope::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = nd(gen);
  }
  return m;
}

/// Random matrix rescaled to spectral radius `rho`.
inline ope::Matrix random_with_radius(std::mt19937_64& gen, int d, double rho) {
  ope::Matrix a = random_matrix(gen, d, d);
  const double r = ope::spectral_radius(a);
  return r > 0.0 ? ope::Matrix(a * (rho / r)) : a;
}

/// Q diag(exp(u)) Q' with Q, Q' random orthogonal and u ~ U(-1, 1).
inline ope::Matrix random_invertible(std::mt19937_64& gen, int d) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  Eigen::HouseholderQR<ope::Matrix> q1(random_matrix(gen, d, d));
  Eigen::HouseholderQR<ope::Matrix> q2(random_matrix(gen, d, d));
  ope::Vector s(d);
  for (int i = 0; i < d; ++i) s(i) = std::exp(ud(gen));
  return ope::Matrix(q1.householderQ()) * s.asDiagonal() * ope::Matrix(q2.householderQ());
}

inline ope::Vector random_simplex(std::mt19937_64& gen, int n, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  ope::Vector p(n);
  do {
    for (int i = 0; i < n; ++i) p(i) = ud(gen) < zero_prob ? 0.0 : -std::log(1.0 - ud(gen));
  } while (p.sum() <= 0.0);
  return p / p.sum();
}

/// Random instance with S <= 5 states, A <= 2 actions, d <= min(5, S*A) random
/// features, deterministic rewards in [-1, 1] and full-support D.
inline ope::OpeInstance random_instance(std::mt19937_64& gen, int max_dim = 5) {
  std::uniform_int_distribution<int> states(2, 5);
  std::uniform_int_distribution<int> actions(1, 2);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  ope::OpeInstance inst;
  inst.name = "random";
  const int s = states(gen);
  const int a = actions(gen);
  const int pairs = s * a;
  inst.mdp.n_states = s;
  inst.mdp.n_actions = a;
  inst.mdp.gamma = 0.5 + 0.49 * (ud(gen) + 1.0) / 2.0;
  inst.mdp.transitions = ope::Matrix(pairs, s);
  for (int sa = 0; sa < pairs; ++sa) inst.mdp.transitions.row(sa) = random_simplex(gen, s, 0.3).transpose();
  for (int sa = 0; sa < pairs; ++sa) inst.mdp.rewards.push_back(ope::RewardSpec::deterministic(ud(gen)));
  inst.policy.probs = ope::Matrix(s, a);
  for (int i = 0; i < s; ++i) inst.policy.probs.row(i) = random_simplex(gen, a).transpose();
  std::uniform_int_distribution<int> dims(1, std::min(max_dim, pairs));
  inst.features = ope::FeatureMap(random_matrix(gen, pairs, dims(gen)));
  inst.offline.mass = random_simplex(gen, pairs);
  inst.validate();
  return inst;
}

}  // namespace testing
