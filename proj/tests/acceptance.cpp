// Acceptance report: one PASS/FAIL line per criterion. With `--only k` a single
// criterion runs and the exit status reflects it alone.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ope/adversarial.hpp"
#include "ope/diagnostics.hpp"
#include "ope/errors.hpp"
#include "ope/estimators.hpp"
#include "ope/experiments.hpp"
#include "ope/gallery.hpp"

using ope::Matrix;
using ope::Vector;

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void gallery_golden(Outcome& o) {
  int failed = 0;
  for (const auto& c : ope::validate_all()) {
    if (!c.passed) {
      ++failed;
      o.detail << " " << c.name << ":";
      for (const auto& m : c.mismatches) o.detail << " " << m << ";";
    }
  }
  o.require(failed == 0, "validate_all");
  double worst_p = 0.0;
  for (double gamma : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99}) {
    const auto r = ope::hierarchy_report(ope::build("sharp_selfloop", {{"p", 0.7}, {"gamma", gamma}}).instance);
    worst_p = std::max(worst_p, r.p_gamma_opnorm.value_or(std::numeric_limits<double>::infinity()));
  }
  o.require(worst_p <= 2.0, "||P_gamma|| <= 2");
  const double w = ope::hierarchy_report(ope::build("invertible_not_stable", {{"p", 0.9}, {"gamma", 0.9}}).instance)
                       .rho_whitened;
  o.require(w >= 1.50 && w <= 1.53, "whitened value in [1.50, 1.53]");
  const double s = ope::hierarchy_report(ope::build("amortila_hard", {{"gamma", 0.5}, {"r_star", 1.0}}).instance)
                       .sigma_min_inv;
  o.require(s <= 1e-12, "sigma_min = 0");
  o.detail << " max ||P_gamma|| = " << worst_p << ", whitened = " << w << ", sigma_min = " << s;
}

void hierarchy(Outcome& o) {
  std::mt19937_64 gen(20240601);
  int evaluated = 0;
  int attempts = 0;
  int violations = 0;
  while (evaluated < 1000 && attempts < 5000) {
    ++attempts;
    const auto inst = testing::random_instance(gen, 5);
    ope::DiagnosticsReport r;
    try {
      r = ope::hierarchy_report(inst);
    } catch (const ope::SingularCovarianceError&) {
      continue;
    } catch (const ope::ValidationError& e) {
      ++violations;
      o.detail << " " << e.what() << ";";
      ++evaluated;
      continue;
    }
    if (ope::hierarchy_violation(r)) ++violations;
    ++evaluated;
  }
  o.require(evaluated == 1000, "1000 instances evaluated");
  o.require(violations == 0, "zero violations");
  o.detail << " " << evaluated << " instances, " << violations << " violations";
}

void lyapunov(Outcome& o) {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  double worst_residual = 0.0;
  double worst_series = 0.0;
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 8;
    const Matrix a = testing::random_with_radius(gen, d, 0.9 * ud(gen));
    const Matrix p = ope::solve_dlyap(a);
    const double pn = ope::op_norm(p);
    Matrix series = Matrix::Zero(d, d);
    Matrix power = Matrix::Identity(d, d);
    for (int j = 0; j <= 400; ++j) {
      series += power.transpose() * power;
      power = power * a;
    }
    worst_residual = std::max(worst_residual, ope::op_norm(p - a.transpose() * p * a - Matrix::Identity(d, d)) / pn);
    worst_series = std::max(worst_series, ope::op_norm(p - series) / pn);

    const double cond = ope::condition_number(p);
    const auto norms = ope::matrix_power_norms(a, 50);
    Matrix delta = testing::random_matrix(gen, d, d);
    delta *= ud(gen) / (6.0 * pn * pn * ope::op_norm(delta));
    const auto perturbed = ope::matrix_power_norms(a + delta, 50);
    for (int k = 0; k <= 50; ++k) {
      if (norms[k] * norms[k] > cond * std::pow(1.0 - 1.0 / pn, k) * (1.0 + 1e-9) + 1e-12) ++violations;
      if (perturbed[k] * perturbed[k] > cond * std::pow(1.0 - 1.0 / (2.0 * pn), k) * (1.0 + 1e-9) + 1e-12) ++violations;
    }
  }
  o.require(worst_residual <= 1e-9, "residual <= 1e-9");
  o.require(worst_series <= 1e-6, "series equivalence <= 1e-6");
  o.require(violations == 0, "decay/margin violations");
  o.detail << " max residual " << worst_residual << ", max series gap " << worst_series << ", " << violations
           << " decay/margin violations";
}

void separation(Outcome& o) {
  const auto inst = ope::build("invertible_not_stable", {{"p", 0.9}, {"gamma", 0.9}}).instance;
  const auto m = ope::population_moments(inst);
  const auto from_zero = ope::fqi(m, 0.9, 60);
  const auto from_unit = ope::fqi(m, 0.9, 60, 0.0, Vector::Ones(1));
  const auto lstd = ope::lstd(m, 0.9);
  o.require(from_zero.diverged, "FQI divergence flag by T = 60");
  o.require(std::abs(lstd.theta(0)) <= 1e-10, "LSTD = 0");
  o.detail << " ||theta_60|| from 0 = " << from_zero.norm_trace.back() << " (theta_phi_r = "
           << m.theta_phi_r(0) << "), from 1 = " << from_unit.norm_trace.back() << ", LSTD = " << lstd.theta(0);
  double worst = 0.0;
  for (const auto& name : ope::gallery_names()) {
    const auto e = ope::build(name).instance;
    const auto pm = ope::population_moments(e);
    if (!ope::check_stability(pm, e.gamma()).stable) continue;
    worst = std::max(worst, (ope::fqi(pm, e.gamma(), 200).theta - ope::lstd(pm, e.gamma()).theta).cwiseAbs().maxCoeff());
  }
  o.require(worst <= 1e-6, "FQI(200) = LSTD on stable entries");
  o.detail << ", stable-entry max |FQI - LSTD| = " << worst;
}

void divergence_bound(Outcome& o) {
  const auto c = ope::find_experiment("fqi-divergence");
  const auto rows = ope::run_experiment(c, 0);
  int failures = 0;
  for (const auto& r : rows) failures += r.status != "pass";
  o.require(rows.size() == 10 && failures == 0, "variance >= bound - 3 SE for T = 1..10");
  const auto& last = rows.back();
  o.detail << " " << rows.size() - failures << "/" << rows.size() << " T values pass; T = " << last.t
           << ": variance " << last.metric << " +/- " << last.metric_se << " vs bound " << last.reference;
}

void run_and_verify(Outcome& o, const char* name) {
  const auto c = ope::find_experiment(name);
  const auto rows = ope::run_experiment(c, 0);
  const auto v = ope::verify_experiment(c, rows);
  o.require(v.passed, name);
  for (const auto& m : v.messages) o.detail << " " << m << ";";
}

void rates(Outcome& o) {
  for (const char* name : {"lstd-rate", "fqi-rate", "concentration-scaling"}) run_and_verify(o, name);
}

void unidentifiability(Outcome& o) {
  for (const char* name : {"amortila_hard", "bvft_gap"}) {
    const auto tc = ope::build_twin(ope::build(name).instance);
    const auto a = ope::population_moments(tc.base);
    const auto b = ope::population_moments(tc.twin);
    const double g = tc.base.gamma();
    const double est = std::max({(ope::lstd(a, g).theta - ope::lstd(b, g).theta).cwiseAbs().maxCoeff(),
                                 (ope::fqi(a, g, 200).theta - ope::fqi(b, g, 200).theta).cwiseAbs().maxCoeff(),
                                 (ope::lstd(a, g, ope::kDefaultRankTol, 1e-3).theta -
                                  ope::lstd(b, g, ope::kDefaultRankTol, 1e-3).theta)
                                     .cwiseAbs()
                                     .maxCoeff()});
    const double tab = (ope::exact_q(tc.base) - ope::exact_q(tc.twin)).cwiseAbs().maxCoeff();
    const std::string n = name;
    o.require(tc.deltas.max() <= 1e-8, n + " moment deltas <= 1e-8");
    o.require(est <= 1e-10, n + " estimator outputs identical");
    o.require(tc.q_gap >= tc.q_gap_bound - 1e-9, n + " q_gap bound");
    o.require(tab > 1e-6, n + " tabular distinguishes");
    o.detail << " " << name << ": deltas (cov " << tc.deltas.sigma_cov << ", cr " << tc.deltas.sigma_cr << ", next "
             << tc.deltas.sigma_next << ", phi_r " << tc.deltas.theta_phi_r << ", mean_r " << tc.deltas.mean_reward
             << "), estimator gap " << est << ", q_gap " << tc.q_gap << " >= " << tc.q_gap_bound << ";";
  }
}

void misspecification(Outcome& o) {
  for (double delta : {0.05, 0.2, 0.5}) {
    const auto inst = ope::build("misspecified_selfloop", {{"delta", delta}}).instance;
    const auto rep = ope::misspec_bound_check(inst, ope::lstd(ope::population_moments(inst), inst.gamma()));
    const Vector q = ope::exact_q(inst);
    double grid = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 300000; ++k) {
      grid = std::min(grid, (q - inst.features.matrix().col(0) * (1e-5 * k)).cwiseAbs().maxCoeff());
    }
    o.require(rep.constant <= 8.0, "C <= 8");
    o.require(std::abs(rep.eps_inf - grid) <= 1e-4, "LP matches grid");
    o.detail << " delta " << delta << ": C = " << rep.constant << " (ratio " << rep.max_ratio << "), eps_inf "
             << rep.eps_inf << " vs grid " << grid << ";";
  }
}

void coordinate_invariance(Outcome& o) {
  std::mt19937_64 gen(99);
  double worst = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); };
  for (const char* name : {"sharp_selfloop", "four_state", "tabular"}) {
    const auto inst = ope::build(name).instance;
    const auto base = ope::hierarchy_report(inst);
    for (int trial = 0; trial < 100; ++trial) {
      const auto r = ope::hierarchy_report(ope::reparameterize(inst, testing::random_invertible(gen, inst.dim())));
      worst = std::max({worst, rel(*base.p_gamma_opnorm, *r.p_gamma_opnorm), rel(*base.p_gamma_cond, *r.p_gamma_cond),
                        rel(base.sigma_min_inv, r.sigma_min_inv), rel(base.rho_s, r.rho_s), rel(base.c_ds, r.c_ds)});
    }
  }
  o.require(worst <= 1e-7, "invariance within 1e-7");
  o.detail << " max relative change " << worst;
}

struct Criterion {
  const char* title;
  double limit_seconds;
  std::function<void(Outcome&)> body;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc == 3 && std::string(argv[1]) == "--only") only = std::atoi(argv[2]);

  const std::vector<Criterion> criteria = {
      {"gallery golden suite", 5.0, gallery_golden},
      {"hierarchy implications", 60.0, hierarchy},
      {"Lyapunov suite", 0.0, lyapunov},
      {"FQI/LSTD separation", 0.0, separation},
      {"divergence lower bound", 30.0, divergence_bound},
      {"statistical rates", 300.0, rates},
      {"unidentifiability", 0.0, unidentifiability},
      {"misspecification", 0.0, misspecification},
      {"coordinate invariance", 0.0, coordinate_invariance},
  };

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    if (only != 0 && only != k) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].body(o);
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = seconds_since(t0);
    if (criteria[i].limit_seconds > 0.0 && secs > criteria[i].limit_seconds) {
      o.passed = false;
      o.detail << " [runtime " << secs << " s over " << criteria[i].limit_seconds << " s]";
    }
    std::printf("%s criterion %d: %s (%.2f s)%s\n", o.passed ? "PASS" : "FAIL", k, criteria[i].title, secs,
                o.detail.str().c_str());
    std::fflush(stdout);
    all = all && o.passed;
  }
  return all ? 0 : 1;
}
