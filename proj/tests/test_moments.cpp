#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ope/errors.hpp"
#include "ope/gallery.hpp"
#include "ope/moments.hpp"

using ope::Matrix;
using ope::Vector;

TEST_CASE("population moments of the gallery chains") {
  const auto loop = ope::population_moments(ope::build("sharp_selfloop", {{"p", 0.7}}).instance);
  CHECK(loop.sigma_cov(0, 0) == doctest::Approx(1.0));
  CHECK(loop.sigma_cr(0, 0) == doctest::Approx(0.7));

  const auto ins = ope::population_moments(ope::build("invertible_not_stable").instance);
  CHECK(ins.sigma_cov(0, 0) == doctest::Approx(1.3));
  CHECK(ins.sigma_cr(0, 0) == doctest::Approx(2.2));
  CHECK(ins.sigma_next(0, 0) == doctest::Approx(4.0));
  CHECK(ope::whitened_cross(ins, 0.9)(0, 0) == doctest::Approx(0.9 * 2.2 / 1.3));

  const double g = 0.5;
  const auto brm = ope::population_moments(ope::build("brm_counterexample", {{"gamma", g}}).instance);
  CHECK(brm.sigma_cov(0, 0) == doctest::Approx(g * g / 16.0).epsilon(1e-14));
  CHECK(brm.sigma_cr(0, 0) == doctest::Approx(g / 16.0).epsilon(1e-14));
  CHECK(brm.sigma_next(0, 0) == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
}

TEST_CASE("whitened cross covariance") {
  ope::MomentSet m;
  m.sigma_cov = Matrix::Identity(2, 2) * 3.0;
  m.sigma_cr = Matrix::Zero(2, 2);
  m.sigma_next = Matrix::Zero(2, 2);
  m.theta_phi_r = Vector::Zero(2);
  CHECK(ope::whitened_cross(m, 0.9).norm() == 0.0);

  const auto fs = ope::population_moments(ope::build("four_state", {{"eps", 0.1}, {"gamma", 0.9}}).instance);
  Matrix expected(2, 2);
  expected << 0.0, 9.0, 0.09, 0.0;
  CHECK((ope::whitened_cross(fs, 0.9) - expected).cwiseAbs().maxCoeff() < 1e-12);

  // Uniform D on (s0, s1) with phi = (gamma, 1): Sigma_cov = (gamma^2 + 1) / 2,
  // Sigma_cr = (gamma + 1) / 2, whitened value gamma (gamma + 1) / (gamma^2 + 1).
  const double g = 0.5;
  const auto two = ope::population_moments(ope::build("two_state_complete_gap", {{"gamma", g}}).instance);
  CHECK(two.sigma_cov(0, 0) == doctest::Approx((g * g + 1.0) / 2.0));
  CHECK(two.sigma_cr(0, 0) == doctest::Approx((g + 1.0) / 2.0));
  CHECK(ope::whitened_cross(two, g)(0, 0) == doctest::Approx(0.6));

  m.sigma_cov = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(ope::whitened_cross(m, 0.9), ope::SingularCovarianceError);
}

TEST_CASE("regularity constants") {
  const auto loop = ope::regularity_constants(ope::build("sharp_selfloop").instance);
  CHECK(loop.rho_s == doctest::Approx(1.0));
  CHECK(loop.rho_sp == doctest::Approx(1.0));
  CHECK(loop.c_ds == doctest::Approx(0.5));  // E phi'^2 = p with phi(s0) = 1, phi(s1) = 0

  const auto ins = ope::regularity_constants(ope::build("invertible_not_stable").instance);
  CHECK(ins.c_ds == doctest::Approx(4.0 / 1.3));
  CHECK(ins.c_ds > 1.0 / (0.9 * 0.9));

  const auto fs = ope::regularity_constants(ope::build("four_state", {{"eps", 0.1}}).instance);
  CHECK(fs.c_ds == doctest::Approx(100.0));
  CHECK(fs.var_r <= 2.0 + 1e-12);
}

TEST_CASE("distribution-shift coefficient equals the smallest feasible beta") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = testing::random_instance(gen);
    const auto m = ope::population_moments(inst);
    if (ope::lambda_min_symmetric(m.sigma_cov) < 1e-8) continue;
    const double c = ope::regularity_constants(inst).c_ds;
    CHECK(ope::lambda_min_symmetric(c * (1.0 + 1e-9) * m.sigma_cov - m.sigma_next) >= -1e-9);
    if (c > 1e-6) CHECK(ope::lambda_min_symmetric(0.99 * c * m.sigma_cov - m.sigma_next) < 0.0);
  }
}

TEST_CASE("empirical moments") {
  const auto inst = ope::build("four_state").instance;
  ope::Dataset one;
  one.records.push_back({2, 0, 0.5, 3, 0});
  const auto m1 = ope::empirical_moments(one, inst.features, 1);
  const Vector phi = inst.features.at(2);
  CHECK((m1.sigma_cov - phi * phi.transpose()).norm() < 1e-15);
  CHECK((m1.theta_phi_r - 0.5 * phi).norm() < 1e-15);

  ope::Dataset two = one;
  two.records.push_back(one.records[0]);
  const auto m2 = ope::empirical_moments(two, inst.features, 1);
  CHECK((m2.sigma_cov - m1.sigma_cov).norm() < 1e-15);
  CHECK((m2.sigma_cr - m1.sigma_cr).norm() < 1e-15);
  CHECK_THROWS_AS(ope::empirical_moments(ope::Dataset{}, inst.features, 1), ope::PreconditionError);
}

TEST_CASE("empirical covariance error stays in its concentration envelope") {
  const auto inst = ope::build("sharp_selfloop").instance;
  const auto pop = ope::population_moments(inst);
  const double rho_s = ope::regularity_constants(inst).rho_s;
  const std::size_t n = 100000;
  int outside = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto emp = ope::empirical_moments(ope::sample_dataset(inst, n, seed), inst.features, 1);
    // log d = 0 for d = 1; use log(2) so the envelope is not degenerate.
    if (ope::op_norm(emp.sigma_cov - pop.sigma_cov) > 5.0 * rho_s * rho_s * std::sqrt(std::log(2.0) / n)) ++outside;
  }
  CHECK(outside == 0);
}

TEST_CASE("estimation errors") {
  const auto inst = ope::build("four_state").instance;
  const auto pop = ope::population_moments(inst);
  const auto same = ope::estimation_errors(pop, pop, 0.9);
  CHECK(same.eps_op <= 1e-12);
  CHECK(same.eps_r <= 1e-12);

  auto pert = pop;
  Matrix e(2, 2);
  e << 0.01, -0.02, 0.03, 0.0;
  pert.sigma_cr += e;
  const Matrix w = ope::spd_inverse_sqrt(pop.sigma_cov);
  CHECK(ope::estimation_errors(pop, pert, 0.9).eps_op == doctest::Approx(ope::op_norm(0.9 * w * e * w)).epsilon(1e-10));

  auto singular = pop;
  singular.sigma_cov = Matrix::Zero(2, 2);
  const auto rep = ope::estimation_errors(pop, singular, 0.9);
  CHECK(rep.singular);
  CHECK(std::isinf(rep.eps_op));
}

TEST_CASE("moment identities on random instances") {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 60; ++trial) {
    const auto inst = testing::random_instance(gen);
    const auto m = ope::population_moments(inst);
    if (ope::lambda_min_symmetric(m.sigma_cov) < 1e-8) continue;
    const int d = m.dim();
    Matrix block(2 * d, 2 * d);
    block << m.sigma_cov, m.sigma_cr, m.sigma_cr.transpose(), m.sigma_next;
    CHECK(ope::lambda_min_symmetric(block) >= -1e-9);
    const Matrix w = ope::spd_inverse_sqrt(m.sigma_cov);
    const double schur = std::pow(ope::op_norm(w * m.sigma_cr * w), 2);
    const auto reg = ope::regularity_constants(inst);
    CHECK(schur <= reg.c_ds * (1.0 + 1e-8) + 1e-10);
    CHECK(reg.var_r <= d + 1e-9);
    CHECK(reg.var_cov >= 0.0);
    CHECK(reg.var_cr >= 0.0);
  }
}

TEST_CASE("reward realizability bounds the whitened reward vector") {
  // Rewards r(s,a) = phi^T w with |r| <= 1 on every pair.
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = testing::random_instance(gen);
    const Vector w = testing::random_matrix(gen, inst.dim(), 1).col(0);
    Vector r = inst.features.matrix() * w;
    r /= std::max(1.0, r.cwiseAbs().maxCoeff());
    for (int sa = 0; sa < inst.n_pairs(); ++sa) inst.mdp.rewards[sa] = ope::RewardSpec::deterministic(r(sa));
    const auto m = ope::population_moments(inst);
    if (ope::lambda_min_symmetric(m.sigma_cov) < 1e-8) continue;
    CHECK((ope::spd_inverse_sqrt(m.sigma_cov) * m.theta_phi_r).norm() <= 1.0 + 1e-9);
  }
}

TEST_CASE("regularity constants are coordinate invariant") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = testing::random_instance(gen);
    const auto pop = ope::population_moments(inst);
    if (ope::lambda_min_symmetric(pop.sigma_cov) < 1e-6) continue;
    const Matrix l = testing::random_invertible(gen, inst.dim());
    const auto re = ope::reparameterize(inst, l);
    const auto a = ope::regularity_constants(inst);
    const auto b = ope::regularity_constants(re);
    CHECK(b.rho_s == doctest::Approx(a.rho_s).epsilon(1e-8));
    CHECK(b.rho_sp == doctest::Approx(a.rho_sp).epsilon(1e-8));
    CHECK(b.c_ds == doctest::Approx(a.c_ds).epsilon(1e-8));

    const auto data = ope::sample_dataset(inst, 500, trial);
    const auto ea = ope::estimation_errors(pop, ope::empirical_moments(data, inst.features, inst.mdp.n_actions),
                                           inst.gamma());
    const auto eb = ope::estimation_errors(ope::population_moments(re),
                                           ope::empirical_moments(data, re.features, re.mdp.n_actions), inst.gamma());
    if (ea.singular) continue;
    CHECK(std::abs(ea.eps_op - eb.eps_op) <= 1e-8 * std::max(1.0, ea.eps_op));
    CHECK(std::abs(ea.eps_r - eb.eps_r) <= 1e-8 * std::max(1.0, ea.eps_r));
  }
}
