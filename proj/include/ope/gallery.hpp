#pragma once

// Named counterexample and reference instances, each bundled with the
// diagnostic verdicts it is expected to produce.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ope/diagnostics.hpp"
#include "ope/mdp.hpp"

namespace ope {

using GalleryParams = std::map<std::string, double>;

/// Partial expectations; unset fields are not checked.
struct ExpectedVerdict {
  std::optional<bool> stable;
  std::optional<bool> invertible;
  std::optional<bool> low_shift;
  std::optional<bool> complete;
  std::optional<bool> sym_stable;
  std::optional<bool> contractive;
  std::optional<bool> pushforward;
  std::optional<bool> realizable;
  std::optional<StabilityVerdict> stability;
  std::optional<double> rho_whitened;
  std::optional<double> p_gamma_opnorm;
  std::optional<double> sigma_min_inv;
  std::optional<double> c_ds;
  std::optional<double> kappa;
  /// Population LSTD and BRM weights (first coordinate checked for d = 1, all otherwise).
  std::optional<Vector> lstd_theta;
  std::optional<Vector> brm_theta;
  double tol = 1e-9;
};

struct GalleryEntry {
  OpeInstance instance;
  ExpectedVerdict expected;
  std::string citation;
  GalleryParams params;  // after defaults are applied
};

/// Catalog names in a fixed order.
const std::vector<std::string>& gallery_names();

/// Documented defaults for `name`.
GalleryParams gallery_defaults(const std::string& name);

/// Throws CatalogError for unknown names, ValidationError for unknown or out-of-range params.
GalleryEntry build(const std::string& name, const GalleryParams& params = {});

/// Compares `entry` against its expectations; returns one message per mismatch.
std::vector<std::string> check_entry(const GalleryEntry& entry);

struct GalleryCheck {
  std::string name;
  bool passed = false;
  std::vector<std::string> mismatches;
};

std::vector<GalleryCheck> validate_all();

/// p = 4(1 - gamma) / (gamma^2 + 4(1 - gamma)), the mass on s0 making gamma Sigma_cr / Sigma_cov = 1.
double bvft_gap_mass(double gamma);

}  // namespace ope
