#include "ope/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ope/errors.hpp"
#include "ope/rng.hpp"

namespace ope {

// ---------------------------------------------------------------- RewardSpec

RewardSpec RewardSpec::deterministic(double value) {
  RewardSpec r;
  r.kind_ = Kind::deterministic;
  r.p0_ = value;
  return r;
}

RewardSpec RewardSpec::uniform_pm(double half_width, double center) {
  if (!(half_width >= 0.0)) throw ValidationError("uniform_pm: half width must be nonnegative");
  RewardSpec r;
  r.kind_ = Kind::uniform_pm;
  r.p0_ = half_width;
  r.p1_ = center;
  return r;
}

RewardSpec RewardSpec::gaussian(double mean, double stddev) {
  if (!(stddev >= 0.0)) throw ValidationError("gaussian: stddev must be nonnegative");
  RewardSpec r;
  r.kind_ = Kind::gaussian;
  r.p0_ = mean;
  r.p1_ = stddev;
  return r;
}

RewardSpec RewardSpec::shifted(const RewardSpec& base, Vector direction, double scale) {
  if (base.kind() == Kind::shifted) throw ValidationError("shifted: base reward cannot itself be shifted");
  RewardSpec r;
  r.kind_ = Kind::shifted;
  r.p0_ = scale;
  r.base_ = std::make_shared<const RewardSpec>(base);
  r.direction_ = std::move(direction);
  return r;
}

namespace {
void expect_kind(const RewardSpec& r, RewardSpec::Kind k, const char* accessor) {
  if (r.kind() != k) throw Error(std::string("RewardSpec::") + accessor + " called on the wrong kind");
}
}  // namespace

double RewardSpec::value() const { expect_kind(*this, Kind::deterministic, "value"); return p0_; }
double RewardSpec::half_width() const { expect_kind(*this, Kind::uniform_pm, "half_width"); return p0_; }
double RewardSpec::center() const { expect_kind(*this, Kind::uniform_pm, "center"); return p1_; }
double RewardSpec::mean() const { expect_kind(*this, Kind::gaussian, "mean"); return p0_; }
double RewardSpec::stddev() const { expect_kind(*this, Kind::gaussian, "stddev"); return p1_; }
const RewardSpec& RewardSpec::base() const { expect_kind(*this, Kind::shifted, "base"); return *base_; }
const Vector& RewardSpec::direction() const { expect_kind(*this, Kind::shifted, "direction"); return direction_; }
double RewardSpec::scale() const { expect_kind(*this, Kind::shifted, "scale"); return p0_; }

double RewardSpec::base_mean() const {
  switch (kind_) {
    case Kind::deterministic: return p0_;
    case Kind::uniform_pm: return p1_;
    case Kind::gaussian: return p0_;
    case Kind::shifted: return base_->base_mean();
  }
  return 0.0;
}

double RewardSpec::base_second_moment() const {
  switch (kind_) {
    case Kind::deterministic: return p0_ * p0_;
    case Kind::uniform_pm: return p1_ * p1_ + p0_ * p0_;
    case Kind::gaussian: return p0_ * p0_ + p1_ * p1_;
    case Kind::shifted: return base_->base_second_moment();
  }
  return 0.0;
}

double RewardSpec::base_support_bound() const {
  switch (kind_) {
    case Kind::deterministic: return std::abs(p0_);
    case Kind::uniform_pm: return std::abs(p1_) + p0_;
    case Kind::gaussian: return p1_ == 0.0 ? std::abs(p0_) : std::numeric_limits<double>::infinity();
    case Kind::shifted: return base_->base_support_bound();
  }
  return 0.0;
}

double RewardSpec::sample_base(CounterRng& rng) const {
  switch (kind_) {
    case Kind::deterministic: return p0_;
    case Kind::uniform_pm: return rng.uniform() < 0.5 ? p1_ - p0_ : p1_ + p0_;
    case Kind::gaussian: return p0_ + p1_ * rng.normal();
    case Kind::shifted: return base_->sample_base(rng);
  }
  return 0.0;
}

RewardSpec RewardSpec::scaled(double factor) const {
  switch (kind_) {
    case Kind::deterministic: return deterministic(factor * p0_);
    case Kind::uniform_pm: return uniform_pm(std::abs(factor) * p0_, factor * p1_);
    case Kind::gaussian: return gaussian(factor * p0_, std::abs(factor) * p1_);
    case Kind::shifted: return shifted(base_->scaled(factor), direction_, factor * p0_);
  }
  return *this;
}

bool operator==(const RewardSpec& a, const RewardSpec& b) {
  if (a.kind_ != b.kind_ || a.p0_ != b.p0_ || a.p1_ != b.p1_) return false;
  if (a.kind_ != RewardSpec::Kind::shifted) return true;
  return *a.base_ == *b.base_ && a.direction_.size() == b.direction_.size() && a.direction_ == b.direction_;
}

// ---------------------------------------------------------------- FeatureMap

FeatureMap::FeatureMap(Matrix phi) : phi_(std::move(phi)) {
  require_finite(phi_, "FeatureMap");
  bound_ = 0.0;
  for (Eigen::Index i = 0; i < phi_.rows(); ++i) bound_ = std::max(bound_, phi_.row(i).norm());
}

// ---------------------------------------------------------------- validation

namespace {

constexpr double kProbTol = 1e-12;

void check_distribution(const Eigen::Ref<const Vector>& p, const std::string& what) {
  if (!p.allFinite()) throw ValidationError(what + ": non-finite probability");
  if (p.size() > 0 && p.minCoeff() < 0.0) throw ValidationError(what + ": negative probability");
  if (std::abs(p.sum() - 1.0) > kProbTol) {
    throw ValidationError(what + ": probabilities sum to " + std::to_string(p.sum()));
  }
}

}  // namespace

void OpeInstance::validate() const {
  const int s_count = mdp.n_states;
  const int a_count = mdp.n_actions;
  if (s_count <= 0 || a_count <= 0) throw ValidationError(name + ": state and action counts must be positive");
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) throw ValidationError(name + ": gamma must lie in (0, 1)");
  const int n = n_pairs();
  if (mdp.transitions.rows() != n || mdp.transitions.cols() != s_count) {
    throw ValidationError(name + ": transition kernel has the wrong shape");
  }
  for (int sa = 0; sa < n; ++sa) {
    check_distribution(mdp.transitions.row(sa).transpose(), name + ": transition row " + std::to_string(sa));
  }
  if (policy.probs.rows() != s_count || policy.probs.cols() != a_count) {
    throw ValidationError(name + ": policy table has the wrong shape");
  }
  for (int s = 0; s < s_count; ++s) {
    check_distribution(policy.probs.row(s).transpose(), name + ": policy row " + std::to_string(s));
  }
  if (features.n_pairs() != n || features.dim() <= 0) throw ValidationError(name + ": feature table has the wrong shape");
  if (offline.mass.size() != n) throw ValidationError(name + ": offline distribution has the wrong size");
  check_distribution(offline.mass, name + ": offline distribution");
  if (static_cast<int>(mdp.rewards.size()) != n) throw ValidationError(name + ": need one reward spec per (s, a)");
  for (const auto& r : mdp.rewards) {
    if (r.kind() == RewardSpec::Kind::shifted && r.direction().size() != features.dim()) {
      throw ValidationError(name + ": shifted reward direction does not match the feature dimension");
    }
  }
  if (reward_bound) {
    const double sup = reward_support_bound(*this);
    if (sup > *reward_bound + 1e-12) {
      throw ValidationError(name + ": reward support " + std::to_string(sup) + " exceeds the declared bound " +
                            std::to_string(*reward_bound));
    }
  }
}

// ---------------------------------------------------------------- oracle

Matrix policy_transition(const OpeInstance& inst) {
  const int a_count = inst.mdp.n_actions;
  const int n = inst.n_pairs();
  Matrix p = Matrix::Zero(n, n);
  for (int sa = 0; sa < n; ++sa) {
    for (int sp = 0; sp < inst.mdp.n_states; ++sp) {
      const double ps = inst.mdp.transitions(sa, sp);
      if (ps == 0.0) continue;
      for (int ap = 0; ap < a_count; ++ap) p(sa, pair_index(sp, ap, a_count)) = ps * inst.policy.probs(sp, ap);
    }
  }
  return p;
}

double reward_shift(const OpeInstance& inst, const RewardSpec& spec, int sa, int sa_next) {
  if (spec.kind() != RewardSpec::Kind::shifted) return 0.0;
  const Matrix& phi = inst.features.matrix();
  const Vector diff = inst.gamma() * phi.row(sa_next).transpose() - phi.row(sa).transpose();
  return spec.scale() * diff.dot(spec.direction());
}

double conditional_mean_reward(const OpeInstance& inst, int sa, int sa_next) {
  const RewardSpec& spec = inst.mdp.rewards[static_cast<std::size_t>(sa)];
  return spec.base_mean() + reward_shift(inst, spec, sa, sa_next);
}

Vector mean_rewards(const OpeInstance& inst) {
  const int n = inst.n_pairs();
  Vector r(n);
  bool any_shifted = false;
  for (int sa = 0; sa < n; ++sa) {
    r(sa) = inst.mdp.rewards[static_cast<std::size_t>(sa)].base_mean();
    any_shifted |= inst.mdp.rewards[static_cast<std::size_t>(sa)].kind() == RewardSpec::Kind::shifted;
  }
  if (!any_shifted) return r;
  const Matrix p = policy_transition(inst);
  for (int sa = 0; sa < n; ++sa) {
    const RewardSpec& spec = inst.mdp.rewards[static_cast<std::size_t>(sa)];
    if (spec.kind() != RewardSpec::Kind::shifted) continue;
    for (int next = 0; next < n; ++next) {
      if (p(sa, next) != 0.0) r(sa) += p(sa, next) * reward_shift(inst, spec, sa, next);
    }
  }
  return r;
}

double reward_second_moment(const OpeInstance& inst, int sa) {
  const RewardSpec& spec = inst.mdp.rewards[static_cast<std::size_t>(sa)];
  if (spec.kind() != RewardSpec::Kind::shifted) return spec.base_second_moment();
  const Matrix p = policy_transition(inst);
  const double m1 = spec.base_mean();
  const double m2 = spec.base_second_moment();
  double total = 0.0;
  for (int next = 0; next < inst.n_pairs(); ++next) {
    if (p(sa, next) == 0.0) continue;
    const double h = reward_shift(inst, spec, sa, next);
    total += p(sa, next) * (m2 + 2.0 * m1 * h + h * h);
  }
  return total;
}

double reward_support_bound(const OpeInstance& inst) {
  double sup = 0.0;
  std::optional<Matrix> p;
  for (int sa = 0; sa < inst.n_pairs(); ++sa) {
    const RewardSpec& spec = inst.mdp.rewards[static_cast<std::size_t>(sa)];
    double bound = spec.base_support_bound();
    if (spec.kind() == RewardSpec::Kind::shifted) {
      if (!p) p = policy_transition(inst);
      double worst = 0.0;
      for (int next = 0; next < inst.n_pairs(); ++next) {
        if ((*p)(sa, next) != 0.0) worst = std::max(worst, std::abs(reward_shift(inst, spec, sa, next)));
      }
      bound += worst;
    }
    sup = std::max(sup, bound);
  }
  return sup;
}

Vector exact_q(const OpeInstance& inst) {
  const int n = inst.n_pairs();
  const Matrix system = Matrix::Identity(n, n) - inst.gamma() * policy_transition(inst);
  return system.partialPivLu().solve(mean_rewards(inst));
}

RealizabilityFit realizable_weight(const OpeInstance& inst, double tol) {
  const Vector q = exact_q(inst);
  const Matrix& phi = inst.features.matrix();
  RealizabilityFit fit;
  fit.theta = pinv(phi) * q;
  fit.residual = (q - phi * fit.theta).cwiseAbs().maxCoeff();
  fit.realizable = fit.residual <= tol;
  return fit;
}

// ---------------------------------------------------------------- sampling

namespace {

int sample_categorical(const Eigen::Ref<const Vector>& p, double u) {
  double cum = 0.0;
  int last_positive = -1;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += p(i);
    if (u < cum) return static_cast<int>(i);
  }
  return last_positive;
}

}  // namespace

Dataset sample_dataset(const OpeInstance& inst, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("sample_dataset: n must be at least 1");
  const int a_count = inst.mdp.n_actions;
  Dataset data;
  data.seed = seed;
  data.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    Transition& t = data.records[i];
    const int sa = sample_categorical(inst.offline.mass, rng.uniform());
    t.s = sa / a_count;
    t.a = sa % a_count;
    t.sp = sample_categorical(inst.mdp.transitions.row(sa).transpose(), rng.uniform());
    t.ap = sample_categorical(inst.policy.probs.row(t.sp).transpose(), rng.uniform());
    const RewardSpec& spec = inst.mdp.rewards[static_cast<std::size_t>(sa)];
    t.r = spec.sample_base(rng) + reward_shift(inst, spec, sa, pair_index(t.sp, t.ap, a_count));
  }
  return data;
}

OpeInstance reparameterize(const OpeInstance& inst, const Matrix& l) {
  if (l.rows() != inst.dim() || l.cols() != inst.dim()) throw DimensionError("reparameterize: L must be d x d");
  OpeInstance out = inst;
  out.features = FeatureMap(inst.features.matrix() * l.transpose());
  // Shifted rewards are defined through <phi, v>; keep them invariant.
  for (auto& r : out.mdp.rewards) {
    if (r.kind() == RewardSpec::Kind::shifted) {
      Vector v = l.transpose().partialPivLu().solve(r.direction());
      r = RewardSpec::shifted(r.base(), v, r.scale());
    }
  }
  return out;
}

OpeInstance scale_rewards(const OpeInstance& inst, double factor) {
  OpeInstance out = inst;
  for (auto& r : out.mdp.rewards) r = r.scaled(factor);
  if (out.reward_bound) *out.reward_bound *= std::abs(factor);
  return out;
}

}  // namespace ope
