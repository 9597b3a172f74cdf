#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "doctest.h"
#include "nsiss/errors.hpp"
#include "nsiss/scenario.hpp"

using namespace nsiss;
using nlohmann::json;

namespace {

std::string fresh_dir(const std::string& leaf) {
  auto dir = std::filesystem::temp_directory_path() / "nsiss-tests" / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

// One stable 1-D check scenario: x' = -x with V = x^2, so the sharpest
// admissible decrease rate is exactly 2 s^2.
json line_check(double rho_coeff) {
  json sc;
  sc["kind"] = "check";
  sc["name"] = "line-main";
  sc["method"] = "main";
  sc["system"] = {
      {"regions", json::array({{{"label", "all"}, {"constraints", json::array()}}})},
      {"modes", json::array({{{"A", json::array({json::array({-1.0})})}}})},
      {"input_dim", 0},
  };
  sc["certificate"] = {
      {"pieces", json::array({json::array({json::array({1.0})})})},
      {"alpha_lo", {{"form", "power"}, {"c", 0.5}, {"p", 2.0}}},
      {"alpha_hi", {{"form", "power"}, {"c", 2.0}, {"p", 2.0}}},
      {"rho", {{"form", "power"}, {"c", rho_coeff}, {"p", 2.0}}},
      {"gamma", {{"form", "linear"}, {"c", 1.0}}},
  };
  sc["plan"] = {{"box_lo", json::array({-2.0})},
                {"box_hi", json::array({2.0})},
                {"n_state", 200},
                {"seed", 3}};
  return sc;
}

json rotate_sim() {
  json sc;
  sc["kind"] = "simulate";
  sc["name"] = "rotate";
  sc["system"] = {
      {"regions", json::array({{{"label", "all"}, {"constraints", json::array()}}})},
      {"modes",
       json::array({{{"A", json::array({json::array({0.0, 1.0}),
                                        json::array({-1.0, 0.0})})}}})},
      {"input_dim", 0},
  };
  sc["sim"] = {{"x0", json::array({1.0, 0.0})},
               {"horizon", 0.5},
               {"input", {{"form", "zero"}}}};
  return sc;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("canonical serialization is sorted, formatted and newline terminated") {
  json j;
  j["b"] = 1;
  j["a"] = 1.5;
  j["c"] = json::array({true, "s", 2});
  j["x"] = std::numeric_limits<double>::infinity();
  j["y"] = -std::numeric_limits<double>::infinity();
  j["z"] = std::numeric_limits<double>::quiet_NaN();
  std::string s = canonical_json(j);
  CHECK(s ==
        "{\n"
        "  \"a\": 1.500000000000e+00,\n"
        "  \"b\": 1,\n"
        "  \"c\": [true, \"s\", 2],\n"
        "  \"x\": \"inf\",\n"
        "  \"y\": \"-inf\",\n"
        "  \"z\": \"nan\"\n"
        "}\n");
  // canonical output reparses to the same canonical bytes
  CHECK(canonical_json(json::parse(s)) == s);
}

TEST_CASE("builtin scenarios are enumerable and parse") {
  auto names = builtin_scenario_names();
  REQUIRE(names.size() == 4);
  CHECK(names[0] == "flower");
  CHECK(names[1] == "sign1d");
  CHECK(names[2] == "cascade-linear");
  CHECK(names[3] == "closed-loop-fixture");
  for (const auto& n : names) {
    json sc = builtin_scenario(n);
    CHECK(sc.contains("kind"));
    CHECK(sc.at("name").get<std::string>() == n);
  }
  CHECK_THROWS_AS(builtin_scenario("no-such"), SchemaError);
}

TEST_CASE("a passing check exits 0 and writes its report") {
  std::string dir = fresh_dir("pass");
  ScenarioOutcome out = run_scenario_json(line_check(1.0), dir);
  CHECK(out.exit_code == 0);
  CHECK(out.report.at("pass").get<bool>());
  CHECK(out.report.at("check").at("pass").get<bool>());
  REQUIRE(!out.report_path.empty());
  CHECK(slurp(out.report_path) == canonical_json(out.report));
}

TEST_CASE("a failing check exits 1 but still reports") {
  std::string dir = fresh_dir("fail");
  ScenarioOutcome out = run_scenario_json(line_check(3.0), dir);
  CHECK(out.exit_code == 1);
  CHECK(!out.report.at("pass").get<bool>());
  CHECK(std::filesystem::exists(out.report_path));
  // the decrease condition is the one that broke
  bool found = false;
  for (const auto& c : out.report.at("check").at("conditions")) {
    if (c.at("name") == "decrease") {
      found = true;
      CHECK(!c.at("pass").get<bool>());
    }
  }
  CHECK(found);
}

TEST_CASE("schema violations exit 2 with a diagnostic") {
  std::string dir = fresh_dir("schema");

  json bad_kind = line_check(1.0);
  bad_kind["kind"] = "bogus";
  ScenarioOutcome k = run_scenario_json(bad_kind, dir);
  CHECK(k.exit_code == 2);
  CHECK(k.diagnostic.find("unknown scenario kind") != std::string::npos);

  json dup = line_check(1.0);
  dup["system"]["regions"] = json::array(
      {{{"label", "all"}, {"constraints", json::array()}},
       {{"label", "all"}, {"constraints", json::array()}}});
  ScenarioOutcome d = run_scenario_json(dup, dir);
  CHECK(d.exit_code == 2);
  CHECK(d.diagnostic.find("duplicate region label") != std::string::npos);

  json nokind = line_check(1.0);
  nokind.erase("kind");
  CHECK(run_scenario_json(nokind, dir).exit_code == 2);
}

TEST_CASE("simulate scenarios write a trajectory csv") {
  std::string dir = fresh_dir("sim");
  ScenarioOutcome out = run_scenario_json(rotate_sim(), dir);
  REQUIRE(out.exit_code == 0);
  REQUIRE(!out.csv_path.empty());
  std::string csv = slurp(out.csv_path);
  CHECK(csv.rfind("t,x1,x2,active,event\n", 0) == 0);
  CHECK(out.report.at("trajectory").at("complete").get<bool>());
  CHECK(out.report.at("trajectory").at("steps").get<int>() >= 50);
  CHECK(out.report.at("csv").get<std::string>() == "rotate-trajectory.csv");
}

TEST_CASE("reports are byte-identical across reruns and reloads") {
  std::string dir_a = fresh_dir("rt-a");
  std::string dir_b = fresh_dir("rt-b");
  for (const char* name : {"sign1d", "cascade-linear"}) {
    json sc = builtin_scenario(name);
    ScenarioOutcome a = run_scenario_json(sc, dir_a);
    REQUIRE(a.exit_code == 0);
    // serialize, reload, run again
    json reloaded = json::parse(canonical_json(sc));
    ScenarioOutcome b = run_scenario_json(reloaded, dir_b);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(a.report_path) == slurp(b.report_path));
    if (!a.csv_path.empty()) CHECK(slurp(a.csv_path) == slurp(b.csv_path));
  }
}

TEST_CASE("worker count does not change the bytes") {
  std::string dir_a = fresh_dir("thr-1");
  std::string dir_b = fresh_dir("thr-4");
  json sc = line_check(1.0);
  sc["plan"]["n_state"] = 2000;
  setenv("NSISS_THREADS", "1", 1);
  ScenarioOutcome a = run_scenario_json(sc, dir_a);
  setenv("NSISS_THREADS", "4", 1);
  ScenarioOutcome b = run_scenario_json(sc, dir_b);
  unsetenv("NSISS_THREADS");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(a.report_path) == slurp(b.report_path));
}

TEST_CASE("seed override rewrites every seed deterministically") {
  std::string dir_a = fresh_dir("seed-a");
  std::string dir_b = fresh_dir("seed-b");
  json sc = line_check(1.0);
  ScenarioOutcome a = run_scenario_json(sc, dir_a, 123);
  ScenarioOutcome b = run_scenario_json(sc, dir_b, 123);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(a.report_path) == slurp(b.report_path));
}

TEST_CASE("file front end resolves files, builtins and nothing else") {
  std::string dir = fresh_dir("front");
  std::string path = dir + "/my-check.json";
  {
    std::ofstream os(path, std::ios::binary);
    os << line_check(1.0).dump();
  }
  CHECK(run_scenario(path, dir).exit_code == 0);
  CHECK(run_scenario("sign1d", dir).exit_code == 0);

  ScenarioOutcome missing = run_scenario(dir + "/absent.json", dir);
  CHECK(missing.exit_code == 2);
  CHECK(missing.diagnostic.find("no such scenario") != std::string::npos);

  std::string garbled = dir + "/garbled.json";
  {
    std::ofstream os(garbled, std::ios::binary);
    os << "{ not json";
  }
  ScenarioOutcome parse_fail = run_scenario(garbled, dir);
  CHECK(parse_fail.exit_code == 2);
  CHECK(parse_fail.diagnostic.find("parse error") != std::string::npos);
}

TEST_CASE("load_scenario mirrors the front end resolution") {
  CHECK(load_scenario("flower").at("kind") == "flower");
  CHECK_THROWS_AS(load_scenario("definitely-absent.json"), SchemaError);
}

}  // TEST_SUITE
