#include "biasaware/inference.hpp"
#include "biasaware/model.hpp"

#include "../helpers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace biasaware;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args) {
  auto dir = std::filesystem::temp_directory_path() / "biasaware_tests";
  std::filesystem::create_directories(dir);
  auto out = dir / "cli_out.txt", err = dir / "cli_err.txt";
  std::string cmd = std::string(BIASAWARE_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

const std::string kData = std::string("--data ") + BIASAWARE_DEMO_CSV +
                          " --y y --w w --baseline const,x1,x2 --restricted 'z*'";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("estimate matches the library") {
    Run r = run("estimate " + kData + " --C 1 --penalty l1");
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["schema_version"] == 1);
    CHECK(j["command"] == "estimate");
    CHECK(j["n"] == 200);
    CHECK(j["k1"] == 3);
    CHECK(j["k2"] == 40);
    std::vector<std::string> z;
    for (int i = 1; i <= 40; ++i) z.push_back("z" + std::to_string(i));
    Dataset d = load_dataset(BIASAWARE_DEMO_CSV, {"y", "w", {"const", "x1", "x2"}, z});
    auto [mse, fl] = BiasAwareAnalysis(d, PenaltySpec::l1()).reports(1.0, 0.05);
    CHECK(j["reports"]["flci"]["beta_hat"].get<double>() == fl.beta_hat);
    CHECK(j["reports"]["flci"]["ci_lo"].get<double>() == fl.ci_lo);
    CHECK(j["reports"]["flci"]["ci_hi"].get<double>() == fl.ci_hi);
    CHECK(j["reports"]["mse"]["beta_hat"].get<double>() == mse.beta_hat);
    CHECK(j["reports"]["flci"]["variance_mode"] == "robust");
  }

  TEST_CASE("known sigma gives null robust errors") {
    Run r = run("estimate " + kData + " --C 1 --penalty l2 --sigma 1.5");
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["reports"]["flci"]["variance_mode"] == "known");
    CHECK(j["reports"]["flci"]["sd_robust"].is_null());
    CHECK(j["reports"]["flci"]["sigma2"].get<double>() == doctest::Approx(2.25));
  }

  TEST_CASE("sensitivity in json and csv") {
    Run r = run("sensitivity " + kData + " --C-grid 0:2:0.25 --null 0");
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["rows"].size() == 9);
    CHECK(j.contains("breakdown_C"));
    double prev = 0.0;
    for (const auto& row : j["rows"]) {
      double len = row["flci"]["ci_hi"].get<double>() - row["flci"]["ci_lo"].get<double>();
      CHECK(len >= prev * (1 - 1e-9));
      prev = len;
    }
    Run c = run("sensitivity " + kData + " --C-grid 0:2:0.25 --format csv");
    REQUIRE(c.code == 0);
    CHECK(std::count(c.out.begin(), c.out.end(), '\n') == 10);
  }

  TEST_CASE("lower-c, efficiency and r2curve") {
    Run l = run("lower-c " + kData + " --sigma 1");
    REQUIRE(l.code == 0);
    json jl = json::parse(l.out);
    CHECK(jl["mode"] == "known-sigma-mc");
    CHECK(jl["c_hat"].get<double>() >= 0.0);
    Run m = run("lower-c " + kData);
    REQUIRE(m.code == 0);
    CHECK(json::parse(m.out)["mode"] == "moderate-deviations");

    Run e = run("efficiency " + kData + " --C 1");
    REQUIRE(e.code == 0);
    json je = json::parse(e.out);
    CHECK(je["kappa_flci"].get<double>() >= 0.717);
    CHECK(je["kappa_mse_lo"].get<double>() <= je["kappa_mse_hi"].get<double>());

    Run r2 = run("r2curve " + kData + " --C-grid 0:3:1");
    REQUIRE(r2.code == 0);
    json jr = json::parse(r2.out);
    CHECK(jr["command"] == "r2curve");
  }

  TEST_CASE("simulate from a config file") {
    auto cfg = testutil::temp_file("sim.cfg",
                                   "kind = coverage\nn = 60\nk2 = 10\ngamma_style = sparse\ngamma_C = 0.5\n"
                                   "sparse_s = 2\nC = 0.5\nreps = 100\nknown_sigma = true\n");
    Run r = run("simulate --config " + cfg.string());
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["summary"]["reps"] == 100);
    CHECK(j["summary"]["coverage"].get<double>() > 0.8);
    Run o = run("simulate --config " + cfg.string() + " --C 2");
    REQUIRE(o.code == 0);
    CHECK(json::parse(o.out)["summary"]["C_assumed"].get<double>() == 2.0);
  }

  TEST_CASE("exit codes") {
    CHECK(run("estimate " + kData).code == 2);                 // missing --C
    CHECK(run("estimate " + kData + " --C 1 --bogus").code == 2);
    Run bad = run("estimate --data " + std::string(BIASAWARE_DEMO_CSV) + " --y y --w w --restricted nope --C 1");
    CHECK(bad.code == 2);
    json je = json::parse(bad.err);
    CHECK(je["error"] == "SchemaError");
    CHECK(je["validation"] == true);
    Run num = run("estimate " + kData + " --C 1 --lind-cap 1e-9");
    CHECK(num.code == 3);
    CHECK(json::parse(num.err)["error"] == "EmptyFeasibleSet");
    CHECK(run("estimate " + kData + " --C -1").code == 2);
  }
}
