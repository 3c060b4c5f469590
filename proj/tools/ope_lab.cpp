// ope-lab: command-line front end for diagnostics, simulation, estimation,
// twin construction and the canned experiments.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ope/adversarial.hpp"
#include "ope/diagnostics.hpp"
#include "ope/errors.hpp"
#include "ope/estimators.hpp"
#include "ope/experiments.hpp"
#include "ope/gallery.hpp"
#include "ope/moments.hpp"
#include "ope/serialization.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitVerify = 4;

struct InstanceSelector {
  std::string gallery;
  std::string path;
  std::vector<std::string> params;
  std::map<std::string, double> named;
  std::optional<double> gamma;
};

void add_selector(CLI::App* cmd, InstanceSelector& sel) {
  cmd->add_option("--gallery", sel.gallery, "gallery entry name");
  cmd->add_option("--instance", sel.path, "instance JSON file");
  cmd->add_option("--param", sel.params, "gallery parameter as key=value (repeatable)");
  cmd->add_option("--gamma", sel.gamma, "discount factor override");
  for (const char* key : {"p", "eps", "delta", "noise", "r0"}) {
    cmd->add_option_function<double>(std::string("--") + key, [&sel, key](double v) { sel.named[key] = v; },
                                     std::string("gallery parameter ") + key);
  }
  cmd->add_option_function<double>("--r-star", [&sel](double v) { sel.named["r_star"] = v; },
                                   "gallery parameter r_star");
}

ope::OpeInstance resolve(const InstanceSelector& sel) {
  if (sel.gallery.empty() == sel.path.empty()) {
    throw ope::ValidationError("exactly one of --gallery or --instance is required");
  }
  if (!sel.path.empty()) {
    if (!sel.params.empty() || !sel.named.empty()) throw ope::ValidationError("gallery parameters need --gallery");
    ope::OpeInstance inst = ope::load_instance(sel.path);
    if (sel.gamma) {
      inst.mdp.gamma = *sel.gamma;
      inst.validate();
    }
    return inst;
  }
  ope::GalleryParams params(sel.named.begin(), sel.named.end());
  for (const auto& kv : sel.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ope::ValidationError("--param expects key=value, got '" + kv + "'");
    try {
      params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw ope::ValidationError("--param " + kv + ": value is not a number");
    }
  }
  if (sel.gamma) params["gamma"] = *sel.gamma;
  return ope::build(sel.gallery, params).instance;
}

void emit(const ope::Json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw ope::Error("cannot write '" + out + "'");
  f << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ope-lab: linear off-policy evaluation diagnostics and experiments"};
  app.require_subcommand(1);
  std::string out;
  std::uint64_t seed = 0;
  int workers = 0;
  std::function<int()> action;

  // gallery
  auto* gallery = app.add_subcommand("gallery", "list or export gallery instances");
  gallery->require_subcommand(1);
  auto* g_list = gallery->add_subcommand("list", "list entries with their defaults");
  g_list->callback([&] {
    action = [] {
      for (const auto& name : ope::gallery_names()) {
        const ope::GalleryEntry e = ope::build(name);
        std::cout << name;
        for (const auto& [k, v] : e.params) std::cout << ' ' << k << '=' << v;
        std::cout << "  # " << e.citation << '\n';
      }
      return kExitOk;
    };
  });
  auto* g_export = gallery->add_subcommand("export", "write an entry as instance JSON");
  std::string export_name;
  InstanceSelector export_sel;
  g_export->add_option("name", export_name, "gallery entry")->required();
  g_export->add_option("--param", export_sel.params, "parameter as key=value (repeatable)");
  g_export->add_option("--gamma", export_sel.gamma, "discount factor override");
  g_export->add_option("--out", out, "output file (stdout if omitted)");
  g_export->callback([&] {
    action = [&] {
      export_sel.gallery = export_name;
      emit(ope::instance_to_json(resolve(export_sel)), out);
      return kExitOk;
    };
  });

  // diagnose
  InstanceSelector diag_sel;
  auto* diagnose = app.add_subcommand("diagnose", "print the condition-hierarchy report as JSON");
  add_selector(diagnose, diag_sel);
  diagnose->add_option("--out", out, "output file (stdout if omitted)");
  diagnose->callback([&] {
    action = [&] {
      const ope::OpeInstance inst = resolve(diag_sel);
      ope::Json j = ope::diagnostics_to_json(ope::hierarchy_report(inst));
      j["regularity"] = ope::regularity_to_json(ope::regularity_constants(inst));
      j["moments"] = ope::moments_to_json(ope::population_moments(inst));
      emit(j, out);
      return kExitOk;
    };
  });

  // simulate
  InstanceSelector sim_sel;
  std::size_t sim_n = 1000;
  auto* simulate = app.add_subcommand("simulate", "sample an offline dataset as JSONL");
  add_selector(simulate, sim_sel);
  simulate->add_option("--n", sim_n, "number of transitions")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "dataset seed");
  simulate->add_option("--out", out, "output file (stdout if omitted)");
  simulate->callback([&] {
    action = [&] {
      const ope::Dataset data = ope::sample_dataset(resolve(sim_sel), sim_n, seed);
      if (out.empty()) {
        ope::write_dataset_jsonl(data, std::cout);
      } else {
        std::ofstream f(out);
        if (!f) throw ope::Error("cannot write '" + out + "'");
        ope::write_dataset_jsonl(data, f);
      }
      return kExitOk;
    };
  });

  // estimate
  InstanceSelector est_sel;
  std::string est_method = "lstd";
  std::string est_data;
  int est_t = 200;
  double est_ridge = 0.0;
  auto* estimate = app.add_subcommand("estimate", "run an estimator on population moments or a dataset");
  add_selector(estimate, est_sel);
  estimate->add_option("--estimator", est_method, "lstd, fqi, brm or tabular")
      ->check(CLI::IsMember({"lstd", "fqi", "brm", "tabular"}));
  estimate->add_option("--data", est_data, "JSONL dataset (population moments if omitted)");
  estimate->add_option("--T", est_t, "FQI iterations")->check(CLI::NonNegativeNumber);
  estimate->add_option("--ridge", est_ridge, "ridge parameter")->check(CLI::NonNegativeNumber);
  estimate->add_option("--out", out, "output file (stdout if omitted)");
  estimate->callback([&] {
    action = [&] {
      const ope::OpeInstance inst = resolve(est_sel);
      std::optional<ope::Dataset> data;
      if (!est_data.empty()) {
        std::ifstream f(est_data);
        if (!f) throw ope::SchemaError("cannot open '" + est_data + "'");
        data = ope::read_dataset_jsonl(f, est_data);
      }
      ope::Json j;
      j["instance"] = inst.name;
      j["estimator"] = est_method;
      j["source"] = data ? "empirical" : "population";
      j["n"] = data ? data->size() : 0;
      const double gamma = inst.gamma();
      if (est_method == "tabular") {
        if (!data) throw ope::ValidationError("the tabular estimator needs --data");
        const ope::Vector q = ope::tabular_q(*data, inst.mdp.n_states, inst.mdp.n_actions, gamma);
        j["q_hat"] = ope::vector_to_json(q);
        j["q_exact"] = ope::vector_to_json(ope::exact_q(inst));
        emit(j, out);
        return kExitOk;
      }
      const ope::MomentSet m = data ? ope::empirical_moments(*data, inst.features, inst.mdp.n_actions)
                                    : ope::population_moments(inst);
      ope::EstimatorResult res;
      if (est_method == "lstd") {
        res = ope::lstd(m, gamma, ope::kDefaultRankTol, est_ridge);
      } else if (est_method == "fqi") {
        res = ope::fqi(m, gamma, est_t, est_ridge);
      } else {
        const ope::Vector cross =
            data ? ope::empirical_cross_reward(*data, inst.features, inst.mdp.n_actions) : ope::population_cross_reward(inst);
        res = ope::brm(m, cross, gamma);
      }
      j["theta"] = ope::vector_to_json(res.theta);
      j["iterations"] = res.iterations;
      j["diverged"] = res.diverged;
      j["rank_deficient"] = res.rank_deficient;
      if (res.theta.allFinite()) {
        const ope::ErrorMetrics em = ope::error_metrics(res.theta, inst);
        j["weighted_l2"] = em.weighted_l2;
        j["mean_abs"] = em.mean_abs;
        j["sup_abs"] = em.sup_abs;
      }
      emit(j, out);
      return kExitOk;
    };
  });

  // adversarial twin
  auto* adversarial = app.add_subcommand("adversarial", "unidentifiability constructions");
  adversarial->require_subcommand(1);
  InstanceSelector twin_sel;
  std::string report;
  auto* twin = adversarial->add_subcommand("twin", "build the reward-twisted twin of a rank-deficient instance");
  add_selector(twin, twin_sel);
  twin->add_option("--out", out, "twin instance JSON (stdout if omitted)");
  twin->add_option("--report", report, "construction report JSON");
  twin->callback([&] {
    action = [&] {
      const ope::TwinConstruction tc = ope::build_twin(resolve(twin_sel));
      emit(ope::instance_to_json(tc.twin), out);
      if (!report.empty()) emit(ope::twin_report_to_json(tc), report);
      return kExitOk;
    };
  });

  // experiment
  auto* experiment = app.add_subcommand("experiment", "canned experiments");
  experiment->require_subcommand(1);
  auto* e_list = experiment->add_subcommand("list", "list canned experiments");
  e_list->callback([&] {
    action = [] {
      for (const auto& c : ope::canned_experiments()) {
        std::cout << c.name;
        for (const auto& e : c.estimators) std::cout << ' ' << e;
        std::cout << '\n';
      }
      return kExitOk;
    };
  });
  std::string exp_name;
  bool timing = false;
  std::optional<std::uint64_t> exp_seed;
  auto setup_run = [&](CLI::App* cmd) {
    cmd->add_option("name", exp_name, "experiment name")->required();
    cmd->add_option("--out", out, "CSV output (stdout if omitted)");
    cmd->add_option("--workers", workers, "worker threads (default OPE_LAB_WORKERS or all cores)");
    cmd->add_option("--seed", exp_seed, "override the experiment seed");
    cmd->add_flag("--timing", timing, "record per-cell wall time");
  };
  auto run_named = [&] {
    std::vector<ope::ExperimentConfig> configs = {ope::find_experiment(exp_name)};
    std::vector<ope::ResultRow> rows;
    for (auto& c : configs) {
      if (exp_seed) c.seed = *exp_seed;
      c.timing = timing;
      c.output.clear();
      auto part = ope::run_experiment(c, workers);
      rows.insert(rows.end(), part.begin(), part.end());
    }
    if (out.empty()) {
      ope::write_csv(rows, std::cout);
    } else {
      ope::write_csv_file(rows, out);
    }
    return std::make_pair(configs, rows);
  };
  auto* e_run = experiment->add_subcommand("run", "run an experiment and write CSV");
  setup_run(e_run);
  e_run->callback([&] {
    action = [&] {
      run_named();
      return kExitOk;
    };
  });
  auto* e_verify = experiment->add_subcommand("verify", "run an experiment and apply its acceptance thresholds");
  setup_run(e_verify);
  e_verify->callback([&] {
    action = [&] {
      if (out.empty()) out = exp_name + ".csv";
      const auto [configs, rows] = run_named();
      bool passed = true;
      for (const auto& c : configs) {
        const ope::ExperimentVerdict v = ope::verify_experiment(c, rows);
        for (const auto& m : v.messages) std::cerr << c.name << ": " << m << '\n';
        passed = passed && v.passed;
      }
      std::cerr << exp_name << ": " << (passed ? "PASS" : "FAIL") << '\n';
      return passed ? kExitOk : kExitVerify;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    return action ? action() : kExitOk;
  } catch (const ope::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ope::CatalogError& e) {
    std::cerr << "catalog error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ope::DimensionError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const ope::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const ope::SingularCovarianceError& e) {
    std::cerr << "singular covariance: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ope::PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ope::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
