#pragma once

// Experiment orchestration: configs, the canned catalog, deterministic
// parallel execution, CSV output and acceptance verification.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ope/gallery.hpp"

namespace ope {

struct ExperimentConfig {
  std::string name;
  /// Instance source: a gallery entry (with params) or an instance file.
  std::string gallery;
  GalleryParams params;
  std::string instance_path;
  /// Several gallery entries (with their defaults plus params) in one experiment.
  std::vector<std::string> galleries;
  /// Optional sweep over one gallery parameter; one instance per value.
  std::string sweep_param;
  std::vector<double> sweep_values;
  /// Reparameterize features so that Sigma_cov = I.
  bool unit_covariance = false;
  std::optional<double> gamma;

  std::vector<std::size_t> n_grid{0};
  std::vector<int> t_grid{0};
  int seeds = 1;
  std::uint64_t seed = 0;
  /// Sampled: lstd, fqi, brm, tabular, moments. Population: lstd-pop, fqi-pop,
  /// fqi-pop-unit, brm-pop. Other: idealized-fqi, twin, misspec.
  std::vector<std::string> estimators;
  std::size_t trials = 10000;
  double ridge = 0.0;
  std::string output;

  /// Acceptance window for fitted log-log slopes.
  double slope_lo = -0.6;
  double slope_hi = -0.4;
  /// fqi-pop must trip the divergence flag by this T on unstable instances.
  int divergence_by = 60;
  /// Sub-experiment sizes: wall_time is recorded only when set.
  bool timing = false;
};

/// Throws ValidationError on empty grids, seeds < 1, unknown estimators or an ambiguous instance source.
void validate_config(const ExperimentConfig& c);

struct ResultRow {
  std::string experiment;
  std::string instance;
  std::string estimator;
  std::size_t n = 0;
  int t = 0;
  int seed = 0;
  double weighted_l2 = 0.0;
  double mean_abs = 0.0;
  double eps_op = 0.0;
  double eps_r = 0.0;
  bool diverged = false;
  double wall_time = 0.0;
  double metric = 0.0;
  double metric_se = 0.0;
  double reference = 0.0;
  std::string status = "ok";
};

/// Resolves worker count: explicit value if > 0, else OPE_LAB_WORKERS, else hardware concurrency.
int resolve_workers(int requested);

/// Runs every cell; row order is fixed by the config, independent of `workers`.
std::vector<ResultRow> run_experiment(const ExperimentConfig& c, int workers = 0);

void write_csv(const std::vector<ResultRow>& rows, std::ostream& os);
/// Writes to c.output when set.
void write_csv_file(const std::vector<ResultRow>& rows, const std::string& path);

const std::vector<ExperimentConfig>& canned_experiments();
/// Throws CatalogError for unknown names.
const ExperimentConfig& find_experiment(const std::string& name);

struct ExperimentVerdict {
  bool passed = true;
  std::vector<std::string> messages;
};

/// Applies the experiment's acceptance thresholds to its rows.
ExperimentVerdict verify_experiment(const ExperimentConfig& c, const std::vector<ResultRow>& rows);

/// Least-squares slope of log(median metric over seeds) against log(n).
double loglog_slope(const std::vector<std::size_t>& n, const std::vector<double>& median);

}  // namespace ope
