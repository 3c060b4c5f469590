#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ope/adversarial.hpp"
#include "ope/errors.hpp"
#include "ope/estimators.hpp"
#include "ope/gallery.hpp"

using ope::Matrix;
using ope::Vector;

TEST_CASE("null vector") {
  const auto am = ope::build("amortila_hard").instance;
  const Vector v = ope::find_null_vector(ope::population_moments(am), 0.5);
  CHECK(v.size() == 1);
  CHECK(v(0) == doctest::Approx(1.0));

  const auto bv = ope::build("bvft_gap", {{"gamma", 0.8}}).instance;
  const auto m = ope::population_moments(bv);
  const Vector u = ope::find_null_vector(m, 0.8);
  const Matrix op = Matrix::Identity(1, 1) - 0.8 * m.sigma_cov.inverse() * m.sigma_cr;
  CHECK((op * u).norm() <= 1e-10);

  // Block instance: deficient 1x1 block next to an invertible one.
  ope::MomentSet block;
  block.sigma_cov = Matrix::Identity(2, 2);
  block.sigma_cr = Matrix::Zero(2, 2);
  block.sigma_cr(0, 0) = 2.0;
  block.sigma_cr(1, 1) = 0.3;
  block.sigma_next = Matrix::Identity(2, 2);
  block.theta_phi_r = Vector::Zero(2);
  const Vector w = ope::find_null_vector(block, 0.5);
  CHECK(std::abs(w(0)) == doctest::Approx(1.0));
  CHECK(std::abs(w(1)) < 1e-12);

  CHECK_THROWS_AS(ope::find_null_vector(ope::population_moments(ope::build("sharp_selfloop").instance), 0.8),
                  ope::PreconditionError);
}

TEST_CASE("twin of the unobserved-reward chain") {
  const auto inst = ope::build("amortila_hard", {{"gamma", 0.5}, {"r_star", 1.0}}).instance;
  const auto tc = ope::build_twin(inst);
  CHECK(tc.b == doctest::Approx(1.0));
  CHECK(tc.deltas.max() <= 1e-12);
  CHECK(tc.q_gap == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(tc.q_gap_bound == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(tc.twin_reward_sup <= 2.0);
  CHECK(tc.twin_weight_residual <= 1e-9);
  CHECK(tc.null_residual <= 1e-8);
  CHECK(tc.twin.name == "amortila_hard_twin");

  // r_twin(s0) = 0 + (1/2)(gamma phi(s1) - phi(s0)) v = (1/2)(0.5 - 0.5) = 0 on the only observed pair.
  CHECK(ope::mean_rewards(tc.twin)(0) == doctest::Approx(0.0));
}

TEST_CASE("linear estimators cannot tell the twins apart") {
  for (const char* name : {"amortila_hard", "bvft_gap"}) {
    INFO(name);
    const auto tc = ope::build_twin(ope::build(name).instance);
    const auto a = ope::population_moments(tc.base);
    const auto b = ope::population_moments(tc.twin);
    const double g = tc.base.gamma();
    CHECK(tc.deltas.sigma_cov <= 1e-8);
    CHECK(tc.deltas.sigma_cr <= 1e-8);
    CHECK(tc.deltas.sigma_next <= 1e-8);
    CHECK(tc.deltas.theta_phi_r <= 1e-8);
    CHECK((ope::lstd(a, g).theta - ope::lstd(b, g).theta).norm() <= 1e-10);
    for (int t : {0, 5, 50, 200}) CHECK((ope::fqi(a, g, t).theta - ope::fqi(b, g, t).theta).norm() <= 1e-10);
    CHECK((ope::lstd(a, g, ope::kDefaultRankTol, 0.1).theta - ope::lstd(b, g, ope::kDefaultRankTol, 0.1).theta).norm() <=
          1e-10);
    CHECK((ope::fqi(a, g, 50, 0.1).theta - ope::fqi(b, g, 50, 0.1).theta).norm() <= 1e-10);
    CHECK(tc.q_gap >= tc.q_gap_bound - 1e-9);
    CHECK((ope::exact_q(tc.base) - ope::exact_q(tc.twin)).cwiseAbs().maxCoeff() > 1e-3);
  }
}

TEST_CASE("mean-reward delta of the full-support twin") {
  // With full support on both states and a single non-constant feature, the
  // shift's mean (1/2B) E_D <gamma phi' - phi, v> cannot vanish.
  const auto tc = ope::build_twin(ope::build("bvft_gap").instance);
  const auto& base = tc.base;
  const double g = base.gamma();
  const Vector phi = base.features.matrix().col(0);
  const double p = base.offline.mass(0);
  const double expected = std::abs((p * (g * phi(1) - phi(0)) + (1.0 - p) * (g * phi(1) - phi(1))) * tc.v(0)) / (2.0 * tc.b);
  CHECK(tc.deltas.mean_reward == doctest::Approx(expected).epsilon(1e-10));
  CHECK(tc.deltas.mean_reward > 1e-3);
}

TEST_CASE("twin rescales rewards above the unit bound") {
  const auto inst = ope::build("bvft_gap").instance;
  REQUIRE(inst.reward_bound);
  CHECK(*inst.reward_bound > 1.0);
  const auto tc = ope::build_twin(inst);
  CHECK(tc.reward_scale == doctest::Approx(1.0 / *inst.reward_bound));
  CHECK(ope::reward_support_bound(tc.base) <= 1.0 + 1e-12);
}

TEST_CASE("twin requires a rank-deficient instance") {
  CHECK_THROWS_AS(ope::build_twin(ope::build("sharp_selfloop").instance), ope::PreconditionError);
}

TEST_CASE("telescoping identity") {
  const auto loop = ope::build("sharp_selfloop").instance;
  CHECK(ope::telescoping_check(loop, {1}).residual < 1e-15);
  const auto am = ope::build("amortila_hard").instance;
  const auto res = ope::telescoping_check(am);
  CHECK(res.horizon == static_cast<int>(std::ceil(std::log(1e-10 / am.features.bound()) / std::log(0.5))));
  CHECK(res.residual <= 1e-9);
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = testing::random_instance(gen);
    inst.mdp.gamma = std::min(inst.mdp.gamma, 0.9);
    CHECK(ope::telescoping_check(inst).residual <= 1e-8);
  }
}
