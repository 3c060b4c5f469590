#include <doctest.h>

#include <cmath>

#include "ope/diagnostics.hpp"
#include "ope/errors.hpp"
#include "ope/gallery.hpp"
#include "ope/moments.hpp"

TEST_CASE("catalog validates at defaults") {
  const auto checks = ope::validate_all();
  CHECK(checks.size() == ope::gallery_names().size());
  for (const auto& c : checks) {
    INFO(c.name);
    for (const auto& m : c.mismatches) INFO(m);
    CHECK(c.passed);
  }
}

TEST_CASE("corrupted expectation is reported") {
  auto entry = ope::build("sharp_selfloop");
  entry.expected.stable = false;
  CHECK_FALSE(ope::check_entry(entry).empty());
  auto other = ope::build("invertible_not_stable");
  other.expected.rho_whitened = 0.5;
  CHECK_FALSE(ope::check_entry(other).empty());
}

TEST_CASE("defaults and parameter checks") {
  const auto e = ope::build("four_state");
  CHECK(e.params == ope::gallery_defaults("four_state"));
  CHECK_THROWS_AS(ope::build("no_such_entry"), ope::CatalogError);
  CHECK_THROWS_AS(ope::build("sharp_selfloop", {{"p", 1.5}}), ope::ValidationError);
  CHECK_THROWS_AS(ope::build("sharp_selfloop", {{"bogus", 1.0}}), ope::ValidationError);
  CHECK_THROWS_AS(ope::build("four_state", {{"gamma", 1.0}}), ope::ValidationError);
}

TEST_CASE("golden values") {
  for (double gamma : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99}) {
    const auto r = ope::hierarchy_report(ope::build("sharp_selfloop", {{"p", 0.7}, {"gamma", gamma}}).instance);
    CHECK(*r.p_gamma_opnorm <= 2.0);
  }
  const auto ins = ope::hierarchy_report(ope::build("invertible_not_stable", {{"p", 0.9}, {"gamma", 0.9}}).instance);
  CHECK(ins.rho_whitened >= 1.50);
  CHECK(ins.rho_whitened <= 1.53);
  const auto am = ope::hierarchy_report(ope::build("amortila_hard", {{"gamma", 0.5}, {"r_star", 1.0}}).instance);
  CHECK(am.sigma_min_inv <= 1e-12);
  const auto fs = ope::hierarchy_report(ope::build("four_state", {{"eps", 1.0}, {"gamma", 0.9}}).instance);
  CHECK(fs.c_ds == doctest::Approx(1.0));
}

TEST_CASE("four-state sweep") {
  double prev_c = 0.0;
  double prev_k = 0.0;
  for (double eps : {0.5, 0.1, 0.02}) {
    const auto r = ope::hierarchy_report(ope::build("four_state", {{"eps", eps}, {"gamma", 0.9}}).instance);
    CHECK(r.c_ds == doctest::Approx(1.0 / (eps * eps)).epsilon(1e-8));
    CHECK(r.kappa == doctest::Approx(0.9 * (eps + 1.0 / eps) / 2.0).epsilon(1e-8));
    CHECK(r.rho_whitened == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(r.c_ds > prev_c);
    CHECK(r.kappa > prev_k);
    prev_c = r.c_ds;
    prev_k = r.kappa;
  }
}

TEST_CASE("bvft mass solves the continuity condition") {
  for (double gamma : {0.3, 0.5, 0.8, 0.95}) {
    const auto inst = ope::build("bvft_gap", {{"gamma", gamma}}).instance;
    const auto m = ope::population_moments(inst);
    CHECK(gamma * m.sigma_cr(0, 0) / m.sigma_cov(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK(ope::bvft_gap_mass(0.8) == doctest::Approx(4.0 * 0.2 / (0.64 + 0.8)));
}

TEST_CASE("entries are realizable unless misspecified") {
  for (const auto& name : ope::gallery_names()) {
    const auto fit = ope::realizable_weight(ope::build(name).instance);
    INFO(name);
    if (name == "misspecified_selfloop") {
      CHECK_FALSE(fit.realizable);
    } else {
      CHECK(fit.realizable);
      CHECK(fit.residual <= 1e-9);
    }
  }
}
