#include "ope/gallery.hpp"

#include <cmath>
#include <sstream>

#include "ope/errors.hpp"
#include "ope/estimators.hpp"
#include "ope/rng.hpp"

namespace ope {

namespace {

// Action-free chain: one action per state, transitions given as S x S.
OpeInstance chain(std::string name, Matrix transitions, std::vector<RewardSpec> rewards, Matrix phi, Vector offline,
                  double gamma, std::optional<double> reward_bound = 1.0) {
  OpeInstance inst;
  inst.name = std::move(name);
  inst.mdp.n_states = static_cast<int>(transitions.rows());
  inst.mdp.n_actions = 1;
  inst.mdp.transitions = std::move(transitions);
  inst.mdp.rewards = std::move(rewards);
  inst.mdp.gamma = gamma;
  inst.policy.probs = Matrix::Ones(inst.mdp.n_states, 1);
  inst.features = FeatureMap(std::move(phi));
  inst.offline.mass = std::move(offline);
  inst.reward_bound = reward_bound;
  return inst;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Vector scalar(double x) { return Vector::Constant(1, x); }

class ParamReader {
 public:
  ParamReader(const std::string& entry, const GalleryParams& given) : entry_(entry), values_(gallery_defaults(entry)) {
    for (const auto& [k, v] : given) {
      if (!values_.count(k)) throw ValidationError(entry + ": unknown parameter '" + k + "'");
      if (!std::isfinite(v)) throw ValidationError(entry + ": parameter '" + k + "' must be finite");
      values_[k] = v;
    }
  }

  double get(const std::string& key) const { return values_.at(key); }

  double in_range(const std::string& key, double lo, double hi, bool open_lo, bool open_hi) const {
    const double v = get(key);
    const bool ok_lo = open_lo ? v > lo : v >= lo;
    const bool ok_hi = open_hi ? v < hi : v <= hi;
    if (!ok_lo || !ok_hi) {
      std::ostringstream os;
      os << entry_ << ": parameter '" << key << "' = " << v << " outside " << (open_lo ? "(" : "[") << lo << ", "
         << hi << (open_hi ? ")" : "]");
      throw ValidationError(os.str());
    }
    return v;
  }

  double gamma() const { return in_range("gamma", 0.0, 1.0, true, true); }

  const GalleryParams& values() const { return values_; }

 private:
  std::string entry_;
  GalleryParams values_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

GalleryEntry sharp_selfloop(const ParamReader& pr) {
  const double p = pr.in_range("p", 0.0, 1.0, false, false);
  const double gamma = pr.gamma();
  const double r0 = pr.get("r0");
  const double noise = pr.in_range("noise", 0.0, kInf, false, true);
  Matrix t(2, 2);
  t << p, 1.0 - p, 0.0, 1.0;
  Matrix phi(2, 1);
  phi << 1.0, 0.0;
  GalleryEntry e;
  e.instance = chain("sharp_selfloop", t, {RewardSpec::uniform_pm(noise, r0), RewardSpec::deterministic(0.0)}, phi,
                     vec({1.0, 0.0}), gamma);
  e.citation = "self-loop chain with one-dimensional features";
  e.expected.stable = true;
  e.expected.invertible = true;
  e.expected.realizable = true;
  e.expected.rho_whitened = p * gamma;
  e.expected.p_gamma_opnorm = 1.0 / (1.0 - (p * gamma) * (p * gamma));
  e.expected.sigma_min_inv = 1.0 - p * gamma;
  e.expected.lstd_theta = scalar(r0 / (1.0 - gamma * p));
  return e;
}

GalleryEntry invertible_not_stable(const ParamReader& pr) {
  const double p = pr.in_range("p", 0.0, 1.0, true, true);
  const double gamma = pr.gamma();
  Matrix t(2, 2);
  t << 0.0, 1.0, 0.0, 1.0;
  Matrix phi(2, 1);
  phi << 1.0, 2.0;
  GalleryEntry e;
  e.instance = chain("invertible_not_stable", t, {RewardSpec::uniform_pm(1.0), RewardSpec::uniform_pm(1.0)}, phi,
                     vec({p, 1.0 - p}), gamma);
  e.citation = "two-state chain separating stability from invertibility";
  const double cov = p + 4.0 * (1.0 - p);
  const double cr = 2.0 * p + 4.0 * (1.0 - p);
  const double w = gamma * cr / cov;
  e.expected.invertible = std::abs(1.0 - w) > kVerdictMargin;
  e.expected.stable = w < 1.0 - kVerdictMargin;
  e.expected.realizable = true;
  e.expected.rho_whitened = w;
  e.expected.c_ds = 4.0 / cov;
  e.expected.lstd_theta = scalar(0.0);
  return e;
}

GalleryEntry four_state(const ParamReader& pr) {
  const double eps = pr.in_range("eps", 0.0, kInf, true, true);
  const double gamma = pr.gamma();
  Matrix t = Matrix::Zero(4, 4);
  t(0, 1) = 1.0;
  t(1, 1) = 1.0;
  t(2, 3) = 1.0;
  t(3, 3) = 1.0;
  Matrix phi(4, 2);
  phi << 1.0, 0.0, 0.0, 1.0 / eps, 0.0, 1.0, eps, 0.0;
  std::vector<RewardSpec> r(4, RewardSpec::uniform_pm(1.0));
  GalleryEntry e;
  e.instance = chain("four_state", t, r, phi, vec({0.5, 0.0, 0.5, 0.0}), gamma);
  e.citation = "four-state chain with anti-diagonal whitened operator";
  const double c_ds = std::max(eps * eps, 1.0 / (eps * eps));
  const double kappa = gamma * (eps + 1.0 / eps) / 2.0;
  e.expected.stable = true;
  e.expected.invertible = true;
  e.expected.realizable = true;
  e.expected.complete = false;
  e.expected.rho_whitened = gamma;
  e.expected.c_ds = c_ds;
  e.expected.kappa = kappa;
  e.expected.low_shift = gamma * gamma * c_ds < 1.0 - kVerdictMargin;
  e.expected.sym_stable = kappa < 1.0 - kVerdictMargin;
  if (std::abs(eps - 1.0) > 1e-6) e.expected.contractive = false;
  e.expected.lstd_theta = vec({0.0, 0.0});
  e.expected.tol = 1e-8;
  return e;
}

GalleryEntry two_state_complete_gap(const ParamReader& pr) {
  const double gamma = pr.gamma();
  Matrix t(2, 2);
  t << 0.0, 1.0, 0.0, 1.0;
  Matrix phi(2, 1);
  phi << gamma, 1.0;
  GalleryEntry e;
  e.instance = chain("two_state_complete_gap", t, {RewardSpec::deterministic(0.0), RewardSpec::deterministic(1.0)},
                     phi, vec({0.5, 0.5}), gamma);
  e.citation = "two-state chain that is stable but not Bellman complete";
  e.expected.stable = true;
  e.expected.invertible = true;
  e.expected.complete = false;
  e.expected.realizable = true;
  e.expected.rho_whitened = gamma * (gamma + 1.0) / (gamma * gamma + 1.0);
  e.expected.lstd_theta = scalar(1.0 / (1.0 - gamma));
  return e;
}

GalleryEntry amortila_hard(const ParamReader& pr) {
  const double gamma = pr.gamma();
  const double r_star = pr.in_range("r_star", -1.0, 1.0, false, false);
  Matrix t(2, 2);
  t << 0.0, 1.0, 0.0, 1.0;
  Matrix phi(2, 1);
  phi << gamma, 1.0;
  GalleryEntry e;
  e.instance = chain("amortila_hard", t, {RewardSpec::deterministic(0.0), RewardSpec::deterministic(r_star)}, phi,
                     vec({1.0, 0.0}), gamma);
  e.citation = "two-state chain where the rewarding state is never observed";
  e.expected.stability = StabilityVerdict::marginal;
  e.expected.stable = false;
  e.expected.invertible = false;
  e.expected.realizable = true;
  e.expected.sigma_min_inv = 0.0;
  e.expected.lstd_theta = scalar(0.0);
  e.expected.tol = 1e-12;
  return e;
}

GalleryEntry bvft_gap(const ParamReader& pr) {
  const double gamma = pr.gamma();
  const double r_star = pr.get("r_star");
  const double noise = pr.in_range("noise", 0.0, kInf, true, true);
  const double p = bvft_gap_mass(gamma);
  const double r0 = -gamma * r_star / (2.0 * (1.0 - gamma));
  Matrix t(2, 2);
  t << 0.0, 1.0, 0.0, 1.0;
  Matrix phi(2, 1);
  phi << 1.0, 2.0 / gamma;
  const double bound = std::max(std::abs(r0), std::abs(r_star)) + noise;
  GalleryEntry e;
  e.instance = chain("bvft_gap", t, {RewardSpec::uniform_pm(noise, r0), RewardSpec::uniform_pm(noise, r_star)}, phi,
                     vec({p, 1.0 - p}), gamma, bound);
  e.citation = "full-support chain where pushforward concentrability holds but invertibility fails";
  e.expected.pushforward = true;
  e.expected.invertible = false;
  e.expected.stable = false;
  e.expected.stability = StabilityVerdict::marginal;
  e.expected.realizable = true;
  e.expected.rho_whitened = 1.0;
  e.expected.sigma_min_inv = 0.0;
  return e;
}

GalleryEntry brm_counterexample(const ParamReader& pr) {
  const double gamma = pr.gamma();
  Matrix t(3, 3);
  t << 0.0, 0.5, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0;
  Matrix phi(3, 1);
  phi << gamma / 4.0, 0.5, 0.0;
  GalleryEntry e;
  e.instance = chain("brm_counterexample", t,
                     {RewardSpec::deterministic(0.0), RewardSpec::deterministic(1.0), RewardSpec::deterministic(0.0)},
                     phi, vec({1.0, 0.0, 0.0}), gamma);
  e.citation = "three-state stochastic chain where Bellman residual minimization is inconsistent";
  e.expected.realizable = true;
  e.expected.brm_theta = scalar(0.0);
  e.expected.stability = StabilityVerdict::marginal;
  e.expected.invertible = false;
  return e;
}

GalleryEntry misspecified_selfloop(const ParamReader& pr) {
  const double p = pr.in_range("p", 0.0, 1.0, false, false);
  const double gamma = pr.gamma();
  const double delta = pr.in_range("delta", 0.0, 1.0, false, false);
  Matrix t(2, 2);
  t << p, 1.0 - p, 0.0, 1.0;
  Matrix phi(2, 1);
  phi << 1.0, delta;
  GalleryEntry e;
  e.instance = chain("misspecified_selfloop", t, {RewardSpec::deterministic(1.0), RewardSpec::deterministic(0.0)},
                     phi, vec({1.0, 0.0}), gamma);
  e.citation = "self-loop chain with a perturbed absorbing-state feature";
  const double w = gamma * (p + (1.0 - p) * delta);
  e.expected.stable = w < 1.0 - kVerdictMargin;
  e.expected.invertible = std::abs(1.0 - w) > kVerdictMargin;
  e.expected.rho_whitened = w;
  if (delta > 0.0 && p < 1.0) e.expected.realizable = false;
  return e;
}

GalleryEntry tabular(const ParamReader& pr) {
  const double n_raw = pr.in_range("n", 1.0, 32.0, false, false);
  const double gamma = pr.gamma();
  const double seed_raw = pr.in_range("seed", 0.0, 9007199254740992.0, false, false);
  if (n_raw != std::floor(n_raw) || seed_raw != std::floor(seed_raw)) {
    throw ValidationError("tabular: n and seed must be integers");
  }
  const int n = static_cast<int>(n_raw);
  const int a_count = 2;
  const auto seed = static_cast<std::uint64_t>(seed_raw);
  CounterRng rng(seed, 0);
  // Strictly positive random simplex points keep every pair in the support.
  auto simplex = [&rng](int k) {
    Vector v(k);
    for (int i = 0; i < k; ++i) v(i) = 0.05 + rng.uniform();
    return Vector(v / v.sum());
  };
  OpeInstance inst;
  inst.name = "tabular";
  inst.mdp.n_states = n;
  inst.mdp.n_actions = a_count;
  inst.mdp.gamma = gamma;
  inst.mdp.transitions.resize(n * a_count, n);
  for (int sa = 0; sa < n * a_count; ++sa) inst.mdp.transitions.row(sa) = simplex(n).transpose();
  inst.policy.probs.resize(n, a_count);
  for (int s = 0; s < n; ++s) inst.policy.probs.row(s) = simplex(a_count).transpose();
  for (int sa = 0; sa < n * a_count; ++sa) {
    inst.mdp.rewards.push_back(RewardSpec::uniform_pm(0.5, rng.uniform() - 0.5));
  }
  inst.offline.mass = simplex(n * a_count);
  inst.features = FeatureMap(Matrix::Identity(n * a_count, n * a_count));
  GalleryEntry e;
  e.instance = std::move(inst);
  e.citation = "random tabular instance with identity features";
  e.expected.stable = true;
  e.expected.invertible = true;
  e.expected.complete = true;
  e.expected.realizable = true;
  e.expected.pushforward = true;
  e.expected.rho_whitened = gamma;
  e.expected.tol = 1e-9;
  return e;
}

using Builder = GalleryEntry (*)(const ParamReader&);

Builder find_builder(const std::string& name) {
  if (name == "sharp_selfloop") return sharp_selfloop;
  if (name == "invertible_not_stable") return invertible_not_stable;
  if (name == "four_state") return four_state;
  if (name == "two_state_complete_gap") return two_state_complete_gap;
  if (name == "amortila_hard") return amortila_hard;
  if (name == "bvft_gap") return bvft_gap;
  if (name == "brm_counterexample") return brm_counterexample;
  if (name == "misspecified_selfloop") return misspecified_selfloop;
  if (name == "tabular") return tabular;
  throw CatalogError("unknown gallery entry '" + name + "'");
}

void expect_flag(std::vector<std::string>& out, const char* field, const std::optional<bool>& want, bool got) {
  if (want && *want != got) {
    out.push_back(std::string(field) + ": expected " + (*want ? "true" : "false") + ", got " + (got ? "true" : "false"));
  }
}

void expect_value(std::vector<std::string>& out, const char* field, const std::optional<double>& want,
                  std::optional<double> got, double tol) {
  if (!want) return;
  if (!got) {
    out.push_back(std::string(field) + ": expected a value, got none");
    return;
  }
  if (std::abs(*want - *got) > tol * std::max(1.0, std::abs(*want))) {
    std::ostringstream os;
    os.precision(12);
    os << field << ": expected " << *want << ", got " << *got;
    out.push_back(os.str());
  }
}

void expect_vector(std::vector<std::string>& out, const char* field, const std::optional<Vector>& want,
                   const Vector& got, double tol) {
  if (!want) return;
  if (want->size() != got.size() || (*want - got).cwiseAbs().maxCoeff() > tol * std::max(1.0, want->norm())) {
    std::ostringstream os;
    os.precision(12);
    os << field << ": expected [" << want->transpose() << "], got [" << got.transpose() << "]";
    out.push_back(os.str());
  }
}

}  // namespace

const std::vector<std::string>& gallery_names() {
  static const std::vector<std::string> names = {
      "sharp_selfloop", "invertible_not_stable", "four_state", "two_state_complete_gap", "amortila_hard",
      "bvft_gap",       "brm_counterexample",    "misspecified_selfloop", "tabular"};
  return names;
}

GalleryParams gallery_defaults(const std::string& name) {
  if (name == "sharp_selfloop") return {{"p", 0.5}, {"gamma", 0.8}, {"r0", 0.5}, {"noise", 0.5}};
  if (name == "invertible_not_stable") return {{"p", 0.9}, {"gamma", 0.9}};
  if (name == "four_state") return {{"eps", 0.1}, {"gamma", 0.9}};
  if (name == "two_state_complete_gap") return {{"gamma", 0.5}};
  if (name == "amortila_hard") return {{"gamma", 0.5}, {"r_star", 1.0}};
  if (name == "bvft_gap") return {{"gamma", 0.8}, {"r_star", 1.0}, {"noise", 0.5}};
  if (name == "brm_counterexample") return {{"gamma", 0.5}};
  if (name == "misspecified_selfloop") return {{"p", 0.5}, {"gamma", 0.8}, {"delta", 0.2}};
  if (name == "tabular") return {{"n", 3.0}, {"gamma", 0.9}, {"seed", 1.0}};
  throw CatalogError("unknown gallery entry '" + name + "'");
}

double bvft_gap_mass(double gamma) {
  const double c = 4.0 * (1.0 - gamma);
  return c / (gamma * gamma + c);
}

GalleryEntry build(const std::string& name, const GalleryParams& params) {
  const Builder builder = find_builder(name);
  const ParamReader reader(name, params);
  GalleryEntry e = builder(reader);
  e.params = reader.values();
  e.instance.validate();
  return e;
}

std::vector<std::string> check_entry(const GalleryEntry& entry) {
  std::vector<std::string> out;
  const ExpectedVerdict& ex = entry.expected;
  DiagnosticsReport r;
  try {
    r = hierarchy_report(entry.instance);
  } catch (const Error& err) {
    out.push_back(std::string("hierarchy_report failed: ") + err.what());
    return out;
  }
  expect_flag(out, "stable", ex.stable, r.stable);
  expect_flag(out, "invertible", ex.invertible, r.invertible);
  expect_flag(out, "low_shift", ex.low_shift, r.low_shift);
  expect_flag(out, "complete", ex.complete, r.complete);
  expect_flag(out, "sym_stable", ex.sym_stable, r.sym_stable);
  expect_flag(out, "contractive", ex.contractive, r.contractive);
  expect_flag(out, "pushforward", ex.pushforward, r.pushforward.holds);
  expect_flag(out, "realizable", ex.realizable, r.realizable);
  if (ex.stability && *ex.stability != r.stability) {
    out.push_back(std::string("stability: expected ") + to_string(*ex.stability) + ", got " + to_string(r.stability));
  }
  expect_value(out, "rho_whitened", ex.rho_whitened, r.rho_whitened, ex.tol);
  expect_value(out, "p_gamma_opnorm", ex.p_gamma_opnorm, r.p_gamma_opnorm, ex.tol);
  expect_value(out, "sigma_min_inv", ex.sigma_min_inv, r.sigma_min_inv, ex.tol);
  expect_value(out, "c_ds", ex.c_ds, r.c_ds, ex.tol);
  expect_value(out, "kappa", ex.kappa, r.kappa, ex.tol);
  if (ex.lstd_theta || ex.brm_theta) {
    const MomentSet m = population_moments(entry.instance);
    const double gamma = entry.instance.gamma();
    expect_vector(out, "lstd_theta", ex.lstd_theta, lstd(m, gamma).theta, std::max(ex.tol, 1e-9));
    if (ex.brm_theta) {
      expect_vector(out, "brm_theta", ex.brm_theta,
                    brm(m, population_cross_reward(entry.instance), gamma).theta, std::max(ex.tol, 1e-9));
    }
  }
  return out;
}

std::vector<GalleryCheck> validate_all() {
  std::vector<GalleryCheck> out;
  for (const auto& name : gallery_names()) {
    GalleryCheck c;
    c.name = name;
    try {
      c.mismatches = check_entry(build(name));
    } catch (const Error& err) {
      c.mismatches.push_back(std::string("build failed: ") + err.what());
    }
    c.passed = c.mismatches.empty();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace ope
