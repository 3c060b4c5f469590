#pragma once

// Finite MDPs, policies, feature maps and offline distributions, plus the
// exact Q^pi oracle and the i.i.d. offline sampler.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ope/linalg.hpp"

namespace ope {

class CounterRng;

/// Reward distribution attached to one (s, a) pair.
///
/// `shifted` is the reward-twisting kind used by the twin construction: a base
/// reward plus the deterministic term scale * <gamma phi(s',a') - phi(s,a), direction>,
/// evaluated against the owning instance's features and discount.
class RewardSpec {
 public:
  enum class Kind { deterministic, uniform_pm, gaussian, shifted };

  static RewardSpec deterministic(double value);
  /// center +/- half_width with equal probability.
  static RewardSpec uniform_pm(double half_width, double center = 0.0);
  static RewardSpec gaussian(double mean, double stddev);
  static RewardSpec shifted(const RewardSpec& base, Vector direction, double scale);

  Kind kind() const noexcept { return kind_; }

  double value() const;       // deterministic
  double half_width() const;  // uniform_pm
  double center() const;      // uniform_pm
  double mean() const;        // gaussian
  double stddev() const;      // gaussian
  const RewardSpec& base() const;     // shifted
  const Vector& direction() const;    // shifted
  double scale() const;               // shifted

  /// Mean, second moment and sup |r| of the state-independent part (the base
  /// reward for `shifted`). Gaussian support is unbounded (+inf).
  double base_mean() const;
  double base_second_moment() const;
  double base_support_bound() const;
  double sample_base(CounterRng& rng) const;

  /// Multiplies every reward outcome by `factor` (shift included).
  RewardSpec scaled(double factor) const;

  friend bool operator==(const RewardSpec& a, const RewardSpec& b);

 private:
  Kind kind_ = Kind::deterministic;
  double p0_ = 0.0;
  double p1_ = 0.0;
  std::shared_ptr<const RewardSpec> base_;
  Vector direction_;
};

/// Transitions are stored as an (S*A) x S matrix; row sa = s * n_actions + a.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 1;
  Matrix transitions;
  std::vector<RewardSpec> rewards;
  double gamma = 0.9;

  int n_pairs() const noexcept { return n_states * n_actions; }
};

struct Policy {
  Matrix probs;  // S x A, row-stochastic
};

class FeatureMap {
 public:
  FeatureMap() = default;
  /// One row per (s, a) pair.
  explicit FeatureMap(Matrix phi);

  const Matrix& matrix() const noexcept { return phi_; }
  int dim() const noexcept { return static_cast<int>(phi_.cols()); }
  int n_pairs() const noexcept { return static_cast<int>(phi_.rows()); }
  Vector at(int sa) const { return phi_.row(sa).transpose(); }
  /// max_{(s,a)} ||phi(s,a)||_2
  double bound() const noexcept { return bound_; }

 private:
  Matrix phi_;
  double bound_ = 0.0;
};

struct OfflineDistribution {
  Vector mass;  // over (s, a) pairs
};

struct OpeInstance {
  std::string name;
  TabularMdp mdp;
  Policy policy;
  FeatureMap features;
  OfflineDistribution offline;
  /// Declared bound on |r|; nullopt means unbounded (Gaussian rewards).
  std::optional<double> reward_bound = 1.0;

  int n_pairs() const noexcept { return mdp.n_pairs(); }
  double gamma() const noexcept { return mdp.gamma; }
  int dim() const noexcept { return features.dim(); }

  /// Throws ValidationError on any broken invariant.
  void validate() const;
};

inline int pair_index(int s, int a, int n_actions) noexcept { return s * n_actions + a; }

/// P^pi[(s,a),(s',a')] = P(s'|s,a) pi(a'|s').
Matrix policy_transition(const OpeInstance& inst);

/// The deterministic part of a `shifted` reward for the transition sa -> sa_next (0 otherwise).
double reward_shift(const OpeInstance& inst, const RewardSpec& spec, int sa, int sa_next);
double conditional_mean_reward(const OpeInstance& inst, int sa, int sa_next);
/// Closed-form mean reward r̄(s,a), integrating shifted rewards over (s', a').
Vector mean_rewards(const OpeInstance& inst);
double reward_second_moment(const OpeInstance& inst, int sa);
/// sup |r| over every outcome reachable from any (s, a).
double reward_support_bound(const OpeInstance& inst);

/// Q^pi solving (I - gamma P^pi) Q = r̄.
Vector exact_q(const OpeInstance& inst);

struct RealizabilityFit {
  Vector theta;        // least-squares fit of Q^pi over all (s,a) pairs
  double residual = 0; // max_{(s,a)} |Q - phi^T theta|
  bool realizable = false;
};

/// Fits Q^pi over every (s, a) pair (not only supp(D)); realizable iff residual <= tol.
RealizabilityFit realizable_weight(const OpeInstance& inst, double tol = 1e-9);

struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int sp = 0;
  int ap = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Dataset {
  std::vector<Transition> records;
  std::uint64_t seed = 0;
  std::size_t size() const noexcept { return records.size(); }
};

/// n i.i.d. records (s,a) ~ D, r ~ R(s,a), s' ~ P(.|s,a), a' ~ pi(s').
/// Record i draws only from stream i of `seed`.
Dataset sample_dataset(const OpeInstance& inst, std::size_t n, std::uint64_t seed);

/// Copy of `inst` with features phi~(s,a) = L phi(s,a).
OpeInstance reparameterize(const OpeInstance& inst, const Matrix& l);

/// Copy of `inst` with every reward outcome multiplied by `factor`.
OpeInstance scale_rewards(const OpeInstance& inst, double factor);

}  // namespace ope
