#include "ope/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "ope/adversarial.hpp"
#include "ope/errors.hpp"
#include "ope/estimators.hpp"
#include "ope/rng.hpp"
#include "ope/serialization.hpp"

namespace ope {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::set<std::string>& sampled_estimators() {
  static const std::set<std::string> s = {"lstd", "fqi", "brm", "tabular", "moments"};
  return s;
}

const std::set<std::string>& known_estimators() {
  static const std::set<std::string> s = {"lstd",    "fqi",          "brm",           "tabular", "moments",
                                          "lstd-pop", "fqi-pop",     "fqi-pop-unit",  "brm-pop", "idealized-fqi",
                                          "twin",     "misspec"};
  return s;
}

std::uint64_t cell_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(base) ^ mix64(a * 0x9E3779B97F4A7C15ULL + b));
}

std::string format_param(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct InstanceCtx {
  std::string label;
  OpeInstance inst;
  MomentSet pop;
  Vector q;
  RealizabilityFit fit;
  StabilityVerdict stability = StabilityVerdict::unstable;
};

std::vector<InstanceCtx> resolve_instances(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, OpeInstance>> raw;
  if (!c.instance_path.empty()) {
    OpeInstance inst = load_instance(c.instance_path);
    if (c.gamma) {
      inst.mdp.gamma = *c.gamma;
      inst.validate();
    }
    raw.emplace_back(inst.name, std::move(inst));
  } else if (!c.galleries.empty()) {
    GalleryParams params = c.params;
    if (c.gamma) params["gamma"] = *c.gamma;
    for (const auto& g : c.galleries) raw.emplace_back(g, build(g, params).instance);
  } else {
    GalleryParams params = c.params;
    if (c.gamma) params["gamma"] = *c.gamma;
    if (c.sweep_param.empty()) {
      raw.emplace_back(c.gallery, build(c.gallery, params).instance);
    } else {
      for (double v : c.sweep_values) {
        params[c.sweep_param] = v;
        raw.emplace_back(c.gallery + "[" + c.sweep_param + "=" + format_param(v) + "]", build(c.gallery, params).instance);
      }
    }
  }
  std::vector<InstanceCtx> out;
  for (auto& [label, inst] : raw) {
    InstanceCtx ctx;
    ctx.label = label;
    ctx.inst = std::move(inst);
    if (c.unit_covariance) {
      const Matrix l = spd_inverse_sqrt(population_moments(ctx.inst).sigma_cov);
      ctx.inst = reparameterize(ctx.inst, l);
    }
    ctx.pop = population_moments(ctx.inst);
    ctx.q = exact_q(ctx.inst);
    ctx.fit = realizable_weight(ctx.inst);
    try {
      ctx.stability = check_stability(ctx.pop, ctx.inst.gamma()).verdict;
    } catch (const Error&) {
      ctx.stability = StabilityVerdict::unstable;
    }
    out.push_back(std::move(ctx));
  }
  return out;
}

struct Cell {
  std::size_t inst = 0;
  std::string estimator;
  std::size_t n = 0;
  int t = 0;
  int seed = 0;
};

std::vector<Cell> enumerate_cells(const ExperimentConfig& c, std::size_t n_instances) {
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < n_instances; ++i) {
    for (const auto& est : c.estimators) {
      if (sampled_estimators().count(est)) {
        for (std::size_t n : c.n_grid) {
          const std::vector<int> ts = est == "fqi" ? c.t_grid : std::vector<int>{0};
          for (int t : ts) {
            for (int s = 0; s < c.seeds; ++s) cells.push_back({i, est, n, t, s});
          }
        }
      } else if (est == "fqi-pop" || est == "fqi-pop-unit" || est == "idealized-fqi") {
        for (int t : c.t_grid) cells.push_back({i, est, 0, t, 0});
      } else {
        cells.push_back({i, est, 0, 0, 0});
      }
    }
  }
  return cells;
}

void fill_metrics(ResultRow& row, const ErrorMetrics& m) {
  row.weighted_l2 = m.weighted_l2;
  row.mean_abs = m.mean_abs;
}

ErrorMetrics metrics_from_q(const Vector& q_hat, const InstanceCtx& ctx) {
  ErrorMetrics m;
  double sq = 0.0;
  for (int sa = 0; sa < ctx.inst.n_pairs(); ++sa) {
    const double w = ctx.inst.offline.mass(sa);
    const double diff = ctx.q(sa) - q_hat(sa);
    sq += w * diff * diff;
    m.mean_abs += w * std::abs(diff);
  }
  m.weighted_l2 = std::sqrt(sq);
  m.sup_abs = (ctx.q - q_hat).cwiseAbs().maxCoeff();
  return m;
}

double theta_error(const InstanceCtx& ctx, const Vector& theta) {
  if (!ctx.fit.realizable || !theta.allFinite()) return kNaN;
  return (theta - ctx.fit.theta).cwiseAbs().maxCoeff();
}

const char* pass_fail(bool ok) { return ok ? "pass" : "fail"; }

std::vector<ResultRow> run_sampled(const ExperimentConfig& c, const Cell& cell, const InstanceCtx& ctx, ResultRow row) {
  const OpeInstance& inst = ctx.inst;
  const double gamma = inst.gamma();
  const Dataset data = sample_dataset(inst, cell.n, cell_seed(c.seed, cell.n, static_cast<std::uint64_t>(cell.seed)));
  const MomentSet emp = empirical_moments(data, inst.features, inst.mdp.n_actions);
  const EmpiricalErrorReport errs = estimation_errors(ctx.pop, emp, gamma);
  row.eps_op = errs.eps_op;
  row.eps_r = errs.eps_r;
  if (errs.singular) row.status = "singular-cov";
  if (cell.estimator == "moments") {
    row.metric = errs.eps_op;
    row.weighted_l2 = kNaN;
    row.mean_abs = kNaN;
  } else if (cell.estimator == "tabular") {
    const ErrorMetrics m = metrics_from_q(tabular_q(data, inst.mdp.n_states, inst.mdp.n_actions, gamma), ctx);
    fill_metrics(row, m);
    row.metric = m.sup_abs;
  } else {
    EstimatorResult res;
    try {
      if (cell.estimator == "lstd") {
        res = lstd(emp, gamma, kDefaultRankTol, c.ridge);
      } else if (cell.estimator == "brm") {
        res = brm(emp, empirical_cross_reward(data, inst.features, inst.mdp.n_actions), gamma);
      } else {
        res = fqi(emp, gamma, cell.t, c.ridge);
      }
    } catch (const SingularCovarianceError&) {
      row.status = "singular-cov";
      row.weighted_l2 = row.mean_abs = row.metric = kNaN;
      return {row};
    }
    row.diverged = res.diverged;
    if (res.theta.allFinite()) {
      fill_metrics(row, error_metrics(res.theta, inst));
    } else {
      row.weighted_l2 = row.mean_abs = kNaN;
    }
    row.metric = theta_error(ctx, res.theta);
    if (res.diverged) row.status = "diverged";
    if (res.rank_deficient) row.status = "rank-deficient";
  }
  return {row};
}

std::vector<ResultRow> run_twin(const ExperimentConfig& c, const InstanceCtx& ctx, const ResultRow& proto) {
  const TwinConstruction tc = build_twin(ctx.inst);
  const double gamma = ctx.inst.gamma();
  std::vector<ResultRow> rows;
  auto add = [&](const std::string& est, double metric, double reference, bool ok) {
    ResultRow r = proto;
    r.estimator = est;
    r.metric = metric;
    r.reference = reference;
    r.status = pass_fail(ok);
    rows.push_back(std::move(r));
  };
  const double moment_tol = 1e-8;
  add("twin-delta-sigma_cov", tc.deltas.sigma_cov, moment_tol, tc.deltas.sigma_cov <= moment_tol);
  add("twin-delta-sigma_cr", tc.deltas.sigma_cr, moment_tol, tc.deltas.sigma_cr <= moment_tol);
  add("twin-delta-sigma_next", tc.deltas.sigma_next, moment_tol, tc.deltas.sigma_next <= moment_tol);
  add("twin-delta-theta_phi_r", tc.deltas.theta_phi_r, moment_tol, tc.deltas.theta_phi_r <= moment_tol);
  add("twin-delta-mean_reward", tc.deltas.mean_reward, moment_tol, tc.deltas.mean_reward <= moment_tol);

  const MomentSet a = population_moments(tc.base);
  const MomentSet b = population_moments(tc.twin);
  const double est_tol = 1e-10;
  const double lstd_gap = (lstd(a, gamma).theta - lstd(b, gamma).theta).cwiseAbs().maxCoeff();
  add("twin-lstd-pop", lstd_gap, est_tol, lstd_gap <= est_tol);
  const int t_max = *std::max_element(c.t_grid.begin(), c.t_grid.end());
  const int t = t_max > 0 ? t_max : 200;
  const double fqi_gap = (fqi(a, gamma, t).theta - fqi(b, gamma, t).theta).cwiseAbs().maxCoeff();
  add("twin-fqi-pop", fqi_gap, est_tol, fqi_gap <= est_tol);
  const double ridge = c.ridge > 0.0 ? c.ridge : 1e-3;
  const double ridge_gap =
      (lstd(a, gamma, kDefaultRankTol, ridge).theta - lstd(b, gamma, kDefaultRankTol, ridge).theta).cwiseAbs().maxCoeff();
  add("twin-lstd-ridge-pop", ridge_gap, est_tol, ridge_gap <= est_tol);
  add("twin-q-gap", tc.q_gap, tc.q_gap_bound, tc.q_gap >= tc.q_gap_bound - 1e-9);
  add("twin-reward-bound", tc.twin_reward_sup, 2.0, tc.twin_reward_sup <= 2.0 + 1e-12);
  add("twin-realizable-weight", tc.twin_weight_residual, 1e-8, tc.twin_weight_residual <= 1e-8);

  // Full-information tabular evaluation (identity features) separates the pair.
  const Vector qa = exact_q(tc.base);
  const Vector qb = exact_q(tc.twin);
  const double oracle_gap = (qa - qb).cwiseAbs().maxCoeff();
  add("twin-tabular-oracle", oracle_gap, 0.0, oracle_gap > 1e-6);

  // Sampled tabular evaluation needs every pair in the offline support.
  if ((tc.base.offline.mass.array() > 0.0).all()) {
    const std::size_t n = std::max<std::size_t>(*std::max_element(c.n_grid.begin(), c.n_grid.end()), 1000);
    const std::uint64_t s = cell_seed(c.seed, n, 0);
    const Vector ha = tabular_q(sample_dataset(tc.base, n, s), ctx.inst.mdp.n_states, ctx.inst.mdp.n_actions, gamma);
    const Vector hb = tabular_q(sample_dataset(tc.twin, n, s), ctx.inst.mdp.n_states, ctx.inst.mdp.n_actions, gamma);
    auto dist = [&](const Vector& x, const Vector& y) {
      double sq = 0.0;
      for (int sa = 0; sa < ctx.inst.n_pairs(); ++sa) sq += tc.base.offline.mass(sa) * (x(sa) - y(sa)) * (x(sa) - y(sa));
      return std::sqrt(sq);
    };
    const bool ok = dist(ha, qa) < dist(ha, qb) && dist(hb, qb) < dist(hb, qa);
    ResultRow r = proto;
    r.estimator = "twin-tabular";
    r.n = n;
    r.metric = dist(ha, hb);
    r.reference = std::sqrt(tc.q_gap);
    r.status = pass_fail(ok);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> run_misspec(const InstanceCtx& ctx, ResultRow row) {
  const double gamma = ctx.inst.gamma();
  const EstimatorResult res = lstd(ctx.pop, gamma);
  const MisspecReport rep = misspec_bound_check(ctx.inst, res);
  fill_metrics(row, error_metrics(res.theta, ctx.inst));
  row.estimator = "misspec-lstd-pop";
  row.metric = rep.constant;
  row.metric_se = rep.max_ratio;
  row.reference = 8.0;
  row.status = pass_fail(rep.constant <= 8.0);
  ResultRow cheb = row;
  cheb.estimator = "chebyshev";
  cheb.metric = rep.eps_inf;
  cheb.metric_se = 0.0;
  cheb.reference = kNaN;
  cheb.status = "ok";
  cheb.weighted_l2 = error_metrics(rep.theta_inf, ctx.inst).weighted_l2;
  cheb.mean_abs = error_metrics(rep.theta_inf, ctx.inst).mean_abs;
  return {row, cheb};
}

std::vector<ResultRow> run_cell(const ExperimentConfig& c, const Cell& cell, const InstanceCtx& ctx) {
  ResultRow row;
  row.experiment = c.name;
  row.instance = ctx.label;
  row.estimator = cell.estimator;
  row.n = cell.n;
  row.t = cell.t;
  row.seed = cell.seed;
  const double gamma = ctx.inst.gamma();
  const std::string& est = cell.estimator;
  if (sampled_estimators().count(est)) return run_sampled(c, cell, ctx, row);
  if (est == "lstd-pop" || est == "brm-pop") {
    const EstimatorResult res = est == "lstd-pop" ? lstd(ctx.pop, gamma, kDefaultRankTol, c.ridge)
                                                  : brm(ctx.pop, population_cross_reward(ctx.inst), gamma);
    fill_metrics(row, error_metrics(res.theta, ctx.inst));
    row.metric = theta_error(ctx, res.theta);
    if (res.rank_deficient) row.status = "rank-deficient";
    return {row};
  }
  if (est == "fqi-pop" || est == "fqi-pop-unit") {
    std::optional<Vector> start;
    if (est == "fqi-pop-unit") start = Vector::Ones(ctx.inst.dim()).normalized();
    const EstimatorResult res = fqi(ctx.pop, gamma, cell.t, c.ridge, start);
    row.diverged = res.diverged;
    row.metric = res.theta.norm();
    if (res.theta.allFinite()) {
      fill_metrics(row, error_metrics(res.theta, ctx.inst));
    } else {
      row.weighted_l2 = row.mean_abs = kNaN;
    }
    if (res.diverged) row.status = "diverged";
    return {row};
  }
  if (est == "idealized-fqi") {
    const Matrix noise = Matrix::Identity(ctx.inst.dim(), ctx.inst.dim());
    const IdealizedFqiResult r =
        idealized_fqi(ctx.pop, gamma, cell.t, noise, c.trials, cell_seed(c.seed, static_cast<std::uint64_t>(cell.t), 7));
    const VarianceLowerBound lb = fqi_variance_lower_bound(ctx.pop, gamma, cell.t, noise);
    row.metric = r.variance;
    row.metric_se = r.standard_error;
    row.weighted_l2 = row.mean_abs = kNaN;
    if (lb.applicable) {
      row.reference = lb.corrected;
      row.status = pass_fail(r.variance >= lb.corrected - 3.0 * r.standard_error);
    } else {
      row.reference = kNaN;
      row.status = "n/a";
    }
    return {row};
  }
  if (est == "twin") return run_twin(c, ctx, row);
  if (est == "misspec") return run_misspec(ctx, row);
  throw ValidationError("unknown estimator '" + est + "'");
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double median_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  if (c.n_grid.empty() || c.t_grid.empty()) throw ValidationError(c.name + ": grids must be nonempty");
  if (c.seeds < 1) throw ValidationError(c.name + ": seeds must be at least 1");
  if (c.estimators.empty()) throw ValidationError(c.name + ": no estimators");
  const int sources = !c.gallery.empty() + !c.galleries.empty() + !c.instance_path.empty();
  if (sources != 1) throw ValidationError(c.name + ": exactly one instance source must be given");
  if (!c.sweep_param.empty() && c.gallery.empty()) throw ValidationError(c.name + ": sweeps need a single gallery entry");
  for (const auto& e : c.estimators) {
    if (!known_estimators().count(e)) throw ValidationError(c.name + ": unknown estimator '" + e + "'");
    if (sampled_estimators().count(e)) {
      for (std::size_t n : c.n_grid) {
        if (n == 0) throw ValidationError(c.name + ": sampled estimators need n >= 1");
      }
    }
  }
  for (int t : c.t_grid) {
    if (t < 0) throw ValidationError(c.name + ": T must be nonnegative");
  }
  if (!c.sweep_param.empty() && c.sweep_values.empty()) throw ValidationError(c.name + ": empty sweep");
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OPE_LAB_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& c, int workers) {
  validate_config(c);
  const std::vector<InstanceCtx> instances = resolve_instances(c);
  const std::vector<Cell> cells = enumerate_cells(c, instances.size());
  std::vector<std::vector<ResultRow>> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        results[i] = run_cell(c, cell, instances[cell.inst]);
      } catch (const Error& e) {
        ResultRow row;
        row.experiment = c.name;
        row.instance = instances[cell.inst].label;
        row.estimator = cell.estimator;
        row.n = cell.n;
        row.t = cell.t;
        row.seed = cell.seed;
        row.weighted_l2 = row.mean_abs = row.metric = kNaN;
        row.status = sanitize(std::string("error: ") + e.what());
        results[i] = {row};
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(cells.size());
        return;
      }
      if (c.timing) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (auto& r : results[i]) r.wall_time = secs;
      }
    }
  };

  const int w = std::max(1, std::min<int>(resolve_workers(workers), static_cast<int>(cells.size())));
  if (w == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < w; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<ResultRow> rows;
  for (auto& rs : results) {
    for (auto& r : rs) rows.push_back(std::move(r));
  }
  if (!c.output.empty()) write_csv_file(rows, c.output);
  return rows;
}

void write_csv(const std::vector<ResultRow>& rows, std::ostream& os) {
  os << "# ope-lab v1\n";
  os << "experiment,instance,estimator,n,T,seed,weighted_l2,mean_abs,eps_op,eps_r,diverged,wall_time,metric,metric_se,"
        "reference,status\n";
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << sanitize(r.experiment) << ',' << sanitize(r.instance) << ',' << sanitize(r.estimator) << ',' << r.n << ','
       << r.t << ',' << r.seed << ',' << num(r.weighted_l2) << ',' << num(r.mean_abs) << ',' << num(r.eps_op) << ','
       << num(r.eps_r) << ',' << (r.diverged ? 1 : 0) << ',' << num(r.wall_time) << ',' << num(r.metric) << ','
       << num(r.metric_se) << ',' << num(r.reference) << ',' << sanitize(r.status) << '\n';
  }
}

void write_csv_file(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_csv(rows, out);
}

const std::vector<ExperimentConfig>& canned_experiments() {
  static const std::vector<ExperimentConfig> catalog = [] {
    std::vector<ExperimentConfig> v;
    const std::vector<std::size_t> rate_grid = {100, 1000, 10000, 100000};

    ExperimentConfig fqi_rate;
    fqi_rate.name = "fqi-rate";
    fqi_rate.gallery = "sharp_selfloop";
    fqi_rate.params = {{"p", 0.5}, {"gamma", 0.8}};
    fqi_rate.n_grid = rate_grid;
    fqi_rate.t_grid = {100};
    fqi_rate.seeds = 100;
    fqi_rate.seed = 11;
    fqi_rate.estimators = {"fqi"};
    v.push_back(fqi_rate);

    ExperimentConfig div;
    div.name = "fqi-divergence";
    div.gallery = "invertible_not_stable";
    div.params = {{"p", 0.9}, {"gamma", 0.9}};
    div.unit_covariance = true;
    div.t_grid = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    div.trials = 10000;
    div.seed = 23;
    div.estimators = {"idealized-fqi"};
    v.push_back(div);

    ExperimentConfig lstd_rate = fqi_rate;
    lstd_rate.name = "lstd-rate";
    lstd_rate.t_grid = {0};
    lstd_rate.seed = 13;
    lstd_rate.estimators = {"lstd"};
    v.push_back(lstd_rate);

    ExperimentConfig sep;
    sep.name = "separation";
    sep.gallery = "invertible_not_stable";
    sep.params = {{"p", 0.9}, {"gamma", 0.9}};
    for (int t = 1; t <= 70; ++t) sep.t_grid.push_back(t);
    sep.estimators = {"fqi-pop", "fqi-pop-unit", "lstd-pop"};
    v.push_back(sep);

    ExperimentConfig twin;
    twin.name = "unidentifiable-twin";
    twin.galleries = {"amortila_hard", "bvft_gap"};
    twin.t_grid = {200};
    twin.n_grid = {100000};
    twin.seed = 29;
    twin.estimators = {"twin"};
    v.push_back(twin);

    ExperimentConfig mis;
    mis.name = "misspec";
    mis.gallery = "misspecified_selfloop";
    mis.params = {{"p", 0.5}, {"gamma", 0.8}};
    mis.sweep_param = "delta";
    mis.sweep_values = {0.05, 0.2, 0.5};
    mis.estimators = {"misspec"};
    v.push_back(mis);

    ExperimentConfig conc;
    conc.name = "concentration-scaling";
    conc.gallery = "sharp_selfloop";
    conc.params = {{"p", 0.5}, {"gamma", 0.8}};
    conc.n_grid = rate_grid;
    conc.seeds = 100;
    conc.seed = 17;
    conc.estimators = {"moments"};
    v.push_back(conc);
    return v;
  }();
  return catalog;
}

const ExperimentConfig& find_experiment(const std::string& name) {
  for (const auto& c : canned_experiments()) {
    if (c.name == name) return c;
  }
  throw CatalogError("unknown experiment '" + name + "'");
}

double loglog_slope(const std::vector<std::size_t>& n, const std::vector<double>& median) {
  if (n.size() != median.size() || n.size() < 2) throw PreconditionError("loglog_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double x = std::log(static_cast<double>(n[i]));
    const double y = std::log(median[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

ExperimentVerdict verify_experiment(const ExperimentConfig& c, const std::vector<ResultRow>& rows) {
  ExperimentVerdict v;
  auto fail = [&v](std::string msg) {
    v.passed = false;
    v.messages.push_back(std::move(msg));
  };
  for (const auto& r : rows) {
    if (r.status == "fail" || r.status.rfind("error", 0) == 0) {
      fail(r.instance + " " + r.estimator + " T=" + std::to_string(r.t) + ": " + r.status + " (metric " +
           fmt(r.metric) + ", reference " + fmt(r.reference) + ")");
    }
  }

  std::set<std::string> labels;
  for (const auto& r : rows) labels.insert(r.instance);

  auto check_slope = [&](const std::string& label, const std::string& est, const char* what, auto pick) {
    if (c.n_grid.size() < 2) return;
    std::vector<double> med;
    int t_pick = *std::max_element(c.t_grid.begin(), c.t_grid.end());
    for (std::size_t n : c.n_grid) {
      std::vector<double> vals;
      for (const auto& r : rows) {
        if (r.instance == label && r.estimator == est && r.n == n && (est != "fqi" || r.t == t_pick)) vals.push_back(pick(r));
      }
      med.push_back(median_of(vals));
    }
    for (double m : med) {
      if (!(m > 0.0) || !std::isfinite(m)) {
        fail(label + " " + est + ": median " + what + " is not positive and finite");
        return;
      }
    }
    const double slope = loglog_slope(c.n_grid, med);
    const std::string msg = label + " " + est + ": log-log slope of median " + what + " = " + fmt(slope);
    if (slope < c.slope_lo || slope > c.slope_hi) {
      fail(msg + " outside [" + fmt(c.slope_lo) + ", " + fmt(c.slope_hi) + "]");
    } else {
      v.messages.push_back(msg);
    }
  };

  for (const auto& label : labels) {
    for (const auto& est : c.estimators) {
      if (est == "lstd" || est == "fqi" || est == "brm" || est == "tabular") {
        check_slope(label, est, "weighted_l2", [](const ResultRow& r) { return r.weighted_l2; });
      } else if (est == "moments") {
        check_slope(label, est, "eps_op", [](const ResultRow& r) { return r.eps_op; });
        check_slope(label, est, "eps_r", [](const ResultRow& r) { return r.eps_r; });
      } else if (est == "fqi-pop") {
        bool unstable = false;
        for (const auto& ic : resolve_instances(c)) {
          if (ic.label == label) unstable = ic.stability == StabilityVerdict::unstable;
        }
        if (!unstable) continue;
        bool tripped = false;
        for (const auto& r : rows) {
          if (r.instance == label && r.estimator == "fqi-pop" && r.t <= c.divergence_by && r.diverged) tripped = true;
        }
        if (!tripped) {
          double norm_at = kNaN;
          for (const auto& r : rows) {
            if (r.instance == label && r.estimator == "fqi-pop" && r.t == c.divergence_by) norm_at = r.metric;
          }
          fail(label + " fqi-pop: divergence flag did not trip by T=" + std::to_string(c.divergence_by) +
               " (||theta_T|| = " + fmt(norm_at) + ")");
        } else {
          v.messages.push_back(label + " fqi-pop: divergence flag tripped by T=" + std::to_string(c.divergence_by));
        }
      } else if (est == "lstd-pop") {
        for (const auto& r : rows) {
          if (r.instance != label || r.estimator != "lstd-pop") continue;
          if (std::isfinite(r.metric) && r.metric > 1e-10) {
            fail(label + " lstd-pop: |theta - theta*| = " + fmt(r.metric) + " > 1e-10");
          }
        }
      }
    }
  }
  return v;
}

}  // namespace ope
