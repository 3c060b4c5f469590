#include "ope/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ope/errors.hpp"

namespace ope {

namespace {

// Non-finite reals are written as the strings "inf", "-inf" or "nan".
Json real(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

Json optional_real(const std::optional<double>& x) { return x ? real(*x) : Json(nullptr); }

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
  throw SchemaError("instance field '" + path + "': " + what);
}

const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) schema_fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema_fail(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

double as_real(const Json& j, const std::string& path) {
  if (!j.is_number()) schema_fail(path, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) schema_fail(path, "must be finite");
  return x;
}

int as_count(const Json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0 || j.get<long long>() > 1'000'000) {
    schema_fail(path, "expected a nonnegative integer");
  }
  return static_cast<int>(j.get<long long>());
}

const Json& as_array(const Json& j, const std::string& path, std::size_t size) {
  if (!j.is_array()) schema_fail(path, "expected an array");
  if (j.size() != size) schema_fail(path, "expected " + std::to_string(size) + " entries, got " + std::to_string(j.size()));
  return j;
}

Vector as_vector(const Json& j, const std::string& path, std::size_t size) {
  as_array(j, path, size);
  Vector v(static_cast<Eigen::Index>(size));
  for (std::size_t i = 0; i < size; ++i) v(static_cast<Eigen::Index>(i)) = as_real(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Matrix as_matrix(const Json& j, const std::string& path, std::size_t rows, std::size_t cols) {
  as_array(j, path, rows);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    m.row(static_cast<Eigen::Index>(i)) = as_vector(j[i], path + "[" + std::to_string(i) + "]", cols).transpose();
  }
  return m;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(real(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(real(v(i)));
  return out;
}

Json reward_to_json(const RewardSpec& r) {
  Json j;
  switch (r.kind()) {
    case RewardSpec::Kind::deterministic:
      j["kind"] = "deterministic";
      j["params"] = {{"value", r.value()}};
      break;
    case RewardSpec::Kind::uniform_pm:
      j["kind"] = "uniform_pm";
      j["params"] = {{"half_width", r.half_width()}, {"center", r.center()}};
      break;
    case RewardSpec::Kind::gaussian:
      j["kind"] = "gaussian";
      j["params"] = {{"mean", r.mean()}, {"stddev", r.stddev()}};
      break;
    case RewardSpec::Kind::shifted:
      j["kind"] = "shifted";
      j["params"] = {{"base", reward_to_json(r.base())}, {"direction", vector_to_json(r.direction())}, {"scale", r.scale()}};
      break;
  }
  return j;
}

RewardSpec reward_from_json(const Json& j, const std::string& path) {
  const Json& kind = field(j, "kind", path);
  if (!kind.is_string()) schema_fail(path + ".kind", "expected a string");
  const Json& p = field(j, "params", path);
  const std::string pp = path + ".params";
  const std::string k = kind.get<std::string>();
  try {
    if (k == "deterministic") return RewardSpec::deterministic(as_real(field(p, "value", pp), pp + ".value"));
    if (k == "uniform_pm") {
      const double c = p.contains("center") ? as_real(p["center"], pp + ".center") : 0.0;
      return RewardSpec::uniform_pm(as_real(field(p, "half_width", pp), pp + ".half_width"), c);
    }
    if (k == "gaussian") {
      return RewardSpec::gaussian(as_real(field(p, "mean", pp), pp + ".mean"),
                                  as_real(field(p, "stddev", pp), pp + ".stddev"));
    }
    if (k == "shifted") {
      const Json& dir = field(p, "direction", pp);
      if (!dir.is_array()) schema_fail(pp + ".direction", "expected an array");
      return RewardSpec::shifted(reward_from_json(field(p, "base", pp), pp + ".base"),
                                 as_vector(dir, pp + ".direction", dir.size()),
                                 as_real(field(p, "scale", pp), pp + ".scale"));
    }
  } catch (const ValidationError& e) {
    schema_fail(path, e.what());
  }
  schema_fail(path + ".kind", "unknown reward kind '" + k + "'");
}

Json instance_to_json(const OpeInstance& inst) {
  const int s_count = inst.mdp.n_states;
  const int a_count = inst.mdp.n_actions;
  Json j;
  j["name"] = inst.name;
  j["n_states"] = s_count;
  j["n_actions"] = a_count;
  j["gamma"] = inst.gamma();
  Json trans = Json::array();
  for (int s = 0; s < s_count; ++s) {
    Json per_action = Json::array();
    for (int a = 0; a < a_count; ++a) {
      per_action.push_back(vector_to_json(inst.mdp.transitions.row(pair_index(s, a, a_count)).transpose()));
    }
    trans.push_back(std::move(per_action));
  }
  j["transitions"] = std::move(trans);
  Json rewards = Json::array();
  for (const auto& r : inst.mdp.rewards) rewards.push_back(reward_to_json(r));
  j["rewards"] = std::move(rewards);
  j["policy"] = matrix_to_json(inst.policy.probs);
  j["features"] = {{"d", inst.dim()}, {"phi", matrix_to_json(inst.features.matrix())}};
  j["offline"] = vector_to_json(inst.offline.mass);
  j["reward_bound"] = inst.reward_bound ? Json(*inst.reward_bound) : Json(nullptr);
  return j;
}

OpeInstance instance_from_json(const Json& j) {
  if (!j.is_object()) schema_fail("", "top level must be an object");
  OpeInstance inst;
  const Json& name = field(j, "name", "");
  if (!name.is_string()) schema_fail("name", "expected a string");
  inst.name = name.get<std::string>();
  const int s_count = as_count(field(j, "n_states", ""), "n_states");
  const int a_count = as_count(field(j, "n_actions", ""), "n_actions");
  if (s_count == 0 || a_count == 0) schema_fail("n_states", "state and action counts must be positive");
  inst.mdp.n_states = s_count;
  inst.mdp.n_actions = a_count;
  inst.mdp.gamma = as_real(field(j, "gamma", ""), "gamma");
  const int n = s_count * a_count;

  const Json& trans = as_array(field(j, "transitions", ""), "transitions", static_cast<std::size_t>(s_count));
  inst.mdp.transitions.resize(n, s_count);
  for (int s = 0; s < s_count; ++s) {
    const std::string ps = "transitions[" + std::to_string(s) + "]";
    const Json& row = as_array(trans[static_cast<std::size_t>(s)], ps, static_cast<std::size_t>(a_count));
    for (int a = 0; a < a_count; ++a) {
      inst.mdp.transitions.row(pair_index(s, a, a_count)) =
          as_vector(row[static_cast<std::size_t>(a)], ps + "[" + std::to_string(a) + "]", static_cast<std::size_t>(s_count))
              .transpose();
    }
  }
  const Json& rewards = as_array(field(j, "rewards", ""), "rewards", static_cast<std::size_t>(n));
  for (int sa = 0; sa < n; ++sa) {
    inst.mdp.rewards.push_back(reward_from_json(rewards[static_cast<std::size_t>(sa)], "rewards[" + std::to_string(sa) + "]"));
  }
  inst.policy.probs = as_matrix(field(j, "policy", ""), "policy", static_cast<std::size_t>(s_count),
                                static_cast<std::size_t>(a_count));
  const Json& feats = field(j, "features", "");
  const int d = as_count(field(feats, "d", "features"), "features.d");
  if (d == 0) schema_fail("features.d", "must be positive");
  inst.features = FeatureMap(as_matrix(field(feats, "phi", "features"), "features.phi", static_cast<std::size_t>(n),
                                       static_cast<std::size_t>(d)));
  inst.offline.mass = as_vector(field(j, "offline", ""), "offline", static_cast<std::size_t>(n));
  if (j.contains("reward_bound")) {
    const Json& rb = j["reward_bound"];
    inst.reward_bound = rb.is_null() ? std::nullopt : std::optional<double>(as_real(rb, "reward_bound"));
  }
  try {
    inst.validate();
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("instance failed validation: ") + e.what());
  }
  return inst;
}

Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw SchemaError(source + ":" + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
}

OpeInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open instance file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return instance_from_json(parse_json_text(ss.str(), path));
}

void save_instance(const OpeInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << instance_to_json(inst).dump(2) << '\n';
}

void write_dataset_jsonl(const Dataset& data, std::ostream& os) {
  for (const Transition& t : data.records) {
    Json j;
    j["s"] = t.s;
    j["a"] = t.a;
    j["r"] = t.r;
    j["sp"] = t.sp;
    j["ap"] = t.ap;
    os << j.dump() << '\n';
  }
}

Dataset read_dataset_jsonl(std::istream& is, const std::string& source) {
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(where + ": malformed JSON (" + e.what() + ")");
    }
    Transition t;
    try {
      t.s = as_count(field(j, "s", where), where + ".s");
      t.a = as_count(field(j, "a", where), where + ".a");
      t.r = as_real(field(j, "r", where), where + ".r");
      t.sp = as_count(field(j, "sp", where), where + ".sp");
      t.ap = as_count(field(j, "ap", where), where + ".ap");
    } catch (const SchemaError& e) {
      throw SchemaError(std::string("dataset ") + e.what());
    }
    data.records.push_back(t);
  }
  return data;
}

Json moments_to_json(const MomentSet& m) {
  Json j;
  j["provenance"] = m.provenance == Provenance::population ? "population" : "empirical";
  if (m.provenance == Provenance::empirical) {
    j["n"] = m.n;
    j["seed"] = m.seed;
  }
  j["sigma_cov"] = matrix_to_json(m.sigma_cov);
  j["sigma_cr"] = matrix_to_json(m.sigma_cr);
  j["sigma_next"] = matrix_to_json(m.sigma_next);
  j["theta_phi_r"] = vector_to_json(m.theta_phi_r);
  j["mean_reward"] = real(m.mean_reward);
  return j;
}

Json regularity_to_json(const RegularityReport& r) {
  Json j;
  j["rho_s"] = real(r.rho_s);
  j["rho_sp"] = real(r.rho_sp);
  j["c_ds"] = real(r.c_ds);
  j["var_cov"] = real(r.var_cov);
  j["var_r"] = real(r.var_r);
  j["var_cr"] = real(r.var_cr);
  return j;
}

Json diagnostics_to_json(const DiagnosticsReport& r) {
  Json j;
  j["name"] = r.name;
  j["gamma"] = r.gamma;
  j["d"] = r.dim;
  j["rho_whitened"] = real(r.rho_whitened);
  j["stability"] = to_string(r.stability);
  j["stable"] = r.stable;
  j["p_gamma_opnorm"] = optional_real(r.p_gamma_opnorm);
  j["p_gamma_cond"] = optional_real(r.p_gamma_cond);
  j["fqi_eps_op_threshold"] = optional_real(r.fqi_eps_op_threshold);
  j["sigma_min_inv"] = real(r.sigma_min_inv);
  j["invertible"] = r.invertible;
  j["lstd_fqi_constant"] = optional_real(r.lstd_fqi_constant);
  j["c_ds"] = real(r.c_ds);
  j["low_shift"] = r.low_shift;
  j["complete"] = r.complete;
  j["kappa"] = real(r.kappa);
  j["sym_stable"] = r.sym_stable;
  j["contractive"] = r.contractive;
  j["pushforward"] = {{"C_A", real(r.pushforward.c_a)}, {"C_S", real(r.pushforward.c_s)}, {"holds", r.pushforward.holds}};
  j["rho_s"] = real(r.rho_s);
  j["rho_sp"] = real(r.rho_sp);
  j["realizable"] = r.realizable;
  j["realizability_residual"] = real(r.realizability_residual);
  return j;
}

Json twin_report_to_json(const TwinConstruction& tc) {
  Json j;
  j["original"] = tc.original.name;
  j["twin"] = tc.twin.name;
  j["reward_scale"] = tc.reward_scale;
  j["v"] = vector_to_json(tc.v);
  j["B"] = tc.b;
  j["null_residual"] = real(tc.null_residual);
  j["moment_deltas"] = {{"sigma_cov", real(tc.deltas.sigma_cov)},
                        {"sigma_cr", real(tc.deltas.sigma_cr)},
                        {"sigma_next", real(tc.deltas.sigma_next)},
                        {"theta_phi_r", real(tc.deltas.theta_phi_r)},
                        {"mean_reward", real(tc.deltas.mean_reward)}};
  j["q_gap"] = real(tc.q_gap);
  j["q_gap_bound"] = real(tc.q_gap_bound);
  j["twin_reward_sup"] = real(tc.twin_reward_sup);
  j["twin_weight_residual"] = real(tc.twin_weight_residual);
  return j;
}

Json misspec_to_json(const MisspecReport& r) {
  Json j;
  j["theta_inf"] = vector_to_json(r.theta_inf);
  j["eps_inf"] = real(r.eps_inf);
  j["theta_fp"] = vector_to_json(r.theta_fp);
  j["eps_fp"] = real(r.eps_fp);
  j["sigma_min"] = real(r.sigma_min);
  j["rho_s"] = real(r.rho_s);
  j["pointwise_bound"] = vector_to_json(r.pointwise_bound);
  j["pointwise_error"] = vector_to_json(r.pointwise_error);
  j["max_ratio"] = real(r.max_ratio);
  j["constant"] = real(r.constant);
  return j;
}

}  // namespace ope
