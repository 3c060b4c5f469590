#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(OPE_LAB_BINARY) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string temp_path(const std::string& name) { return std::string(OPE_LAB_TMPDIR) + "/" + name; }

}  // namespace

TEST_CASE("diagnose reports the golden verdicts") {
  const auto am = run("diagnose --gallery amortila_hard");
  REQUIRE(am.code == 0);
  CHECK(nlohmann::json::parse(am.out)["invertible"] == false);

  const auto loop = run("diagnose --gallery sharp_selfloop --p 0.7 --gamma 0.9");
  REQUIRE(loop.code == 0);
  const auto j = nlohmann::json::parse(loop.out);
  CHECK(j["stable"] == true);
  CHECK(j["p_gamma_opnorm"].get<double>() <= 2.0);
}

TEST_CASE("exit codes") {
  const std::string bad = temp_path("malformed.json");
  std::ofstream(bad) << "{\"name\": ";
  CHECK(run("diagnose --instance " + bad).code == 2);
  CHECK(run("diagnose --gallery no_such_entry").code == 2);
  CHECK(run("diagnose --gallery sharp_selfloop --p 2").code == 2);
  CHECK(run("experiment run no_such_experiment").code == 2);
  CHECK(run("adversarial twin --gallery sharp_selfloop").code == 3);
  CHECK(run("frobnicate").code == 2);

  // A singular covariance: all offline mass on a zero-feature state.
  const std::string singular = temp_path("singular.json");
  auto inst = nlohmann::json::parse(run("gallery export sharp_selfloop").out);
  inst["offline"] = {0.0, 1.0};
  std::ofstream(singular) << inst.dump();
  CHECK(run("diagnose --instance " + singular).code == 3);
}

TEST_CASE("gallery export, simulate and estimate round-trip") {
  const std::string inst = temp_path("loop.json");
  const std::string data = temp_path("loop.jsonl");
  REQUIRE(run("gallery export sharp_selfloop --param r0=1 --param noise=0 --out " + inst).code == 0);
  CHECK(run("diagnose --instance " + inst).code == 0);
  REQUIRE(run("simulate --instance " + inst + " --n 500 --seed 3 --out " + data).code == 0);
  std::ifstream f(data);
  int lines = 0;
  for (std::string line; std::getline(f, line);) ++lines;
  CHECK(lines == 500);
  const auto pop = run("estimate --instance " + inst + " --estimator lstd");
  REQUIRE(pop.code == 0);
  CHECK(nlohmann::json::parse(pop.out)["theta"][0].get<double>() == doctest::Approx(1.0 / 0.6));
  const auto emp = run("estimate --instance " + inst + " --data " + data + " --estimator fqi --T 50");
  REQUIRE(emp.code == 0);
  CHECK(nlohmann::json::parse(emp.out)["source"] == "empirical");
}

TEST_CASE("adversarial twin writes both files") {
  const std::string twin = temp_path("twin.json");
  const std::string report = temp_path("twin_report.json");
  REQUIRE(run("adversarial twin --gallery amortila_hard --out " + twin + " --report " + report).code == 0);
  std::ifstream rf(report);
  const auto rep = nlohmann::json::parse(rf);
  CHECK(rep["q_gap"].get<double>() >= rep["q_gap_bound"].get<double>() - 1e-9);
  CHECK(run("diagnose --instance " + twin).code == 0);
}

TEST_CASE("experiment run writes a versioned CSV") {
  const std::string out = temp_path("separation.csv");
  REQUIRE(run("experiment run separation --workers 2 --out " + out).code == 0);
  std::ifstream f(out);
  std::string header;
  std::getline(f, header);
  CHECK(header == "# ope-lab v1");
  std::string columns;
  std::getline(f, columns);
  CHECK(columns.rfind("experiment,instance,estimator,n,T,seed,weighted_l2,mean_abs,eps_op,eps_r,diverged,wall_time", 0) ==
        0);
  CHECK(run("experiment verify misspec --out " + temp_path("misspec.csv")).code == 0);
  const auto list = run("experiment list");
  CHECK(list.code == 0);
  CHECK(list.out.find("unidentifiable-twin") != std::string::npos);
}
