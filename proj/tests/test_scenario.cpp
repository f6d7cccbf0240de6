#include "doctest.h"
#include "kstab/errors.hpp"
#include "kstab/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace kstab;

namespace {

fs::path scratch(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("kstab_test_" + std::to_string(::getpid()) + "_" + tag);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

size_t count_ext(const fs::path& dir, const std::string& ext) {
  size_t n = 0;
  for (auto& e : fs::recursive_directory_iterator(dir))
    if (e.path().extension() == ext) ++n;
  return n;
}

const char* interval_x = R"({"name": "t", "polytope": {"dim": 1, "vertices": [["0"], ["1"]]}, "pl": [[1, 0]], )";

Err code_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error");
  return Err::IoError;
}

}  // namespace

TEST_CASE("malformed scenario JSON is a parse error with a byte offset") {
  try {
    parse_scenario(R"({"name": "x", "tasks": [)");
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ParseError);
    CHECK(exit_code(e.code()) == 2);
    std::string m = e.what();
    CHECK(m.find("byte ") != std::string::npos);
    CHECK(m.find('\n') == std::string::npos);
  }
}

TEST_CASE("scenario validation") {
  std::string base = interval_x;
  CHECK(code_of(base + R"("tasks": []})") == Err::ValidationError);
  CHECK(code_of(base + R"("tasks": [{"type": "blowup", "vertex": ["1/2"]}]})") == Err::ValidationError);
  CHECK(code_of(base + R"("tasks": [{"type": "slopes", "theorems": [{"kind": "POINT", "vertex": ["2"]}]}]})") ==
        Err::ValidationError);
  CHECK(code_of(base + R"("tasks": [{"type": "slopes", "theorems": ["JALPHA"]}]})") == Err::ValidationError);
  CHECK(code_of(base + R"("tasks": [{"type": "slopes", "theorems": ["XYZ"]}]})") == Err::ValidationError);
  CHECK(code_of(base + R"("tasks": ["dance"]})") == Err::ParseError);
  CHECK(code_of(base + R"("tasks": [{"type": "l1", "schedule": {"taus": [2, 1]}}]})") == Err::NonMonotoneTau);
  CHECK(exit_code(Err::NonMonotoneTau) == 3);
  CHECK(code_of(R"({"polytope": {"dim": 1, "vertices": [["0"], ["1"]]}, "pl": [[1, 0]], "tasks": ["l1"]})") ==
        Err::ParseError);
  CHECK(exit_code(Err::NewtonDivergence) == 4);
  CHECK(exit_code(Err::IoError) == 5);
}

TEST_CASE("invariants task on the interval with g = x reports df 0/1") {
  auto sc = parse_scenario(std::string(interval_x) + R"("tasks": ["invariants"]})");
  RunOptions o;
  fs::path d = scratch("inv");
  o.out = d.string();
  auto r = run_scenario(sc, o);
  CHECK(exit_status(r) == 0);
  CHECK(r.report["tasks"][0]["report"]["df"] == "0/1");
  CHECK(r.report["schema_version"] == 1);
  CHECK(fs::exists(d / "report.json"));
  CHECK(count_ext(d, ".csv") == 0);
  fs::remove_all(d);
}

TEST_CASE("one slope task gives one CSV and one SVG; reruns are identical up to the timestamp") {
  auto sc = parse_scenario(std::string(interval_x) + R"("tasks": [{"type": "slopes", "theorems": ["AM"]}]})");
  fs::path d = scratch("slope");
  RunOptions o;
  o.out = d.string();
  auto r1 = run_scenario(sc, o);
  CHECK(exit_status(r1) == 0);
  CHECK(count_ext(d, ".csv") == 1);
  CHECK(count_ext(d, ".svg") == 1);
  std::string a = slurp(d / "report.json");
  auto r2 = run_scenario(sc, o);
  std::string b = slurp(d / "report.json");
  auto strip = [](std::string s) {
    auto i = s.find("\"timestamp\"");
    auto e = s.find('\n', i);
    return s.erase(i, e - i);
  };
  CHECK(strip(a) == strip(b));
  fs::path plot = d / "plots" / "00_AM.svg";
  REQUIRE(fs::exists(plot));
  std::string s = slurp(plot);
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("exact -1/1") != std::string::npos);
  CHECK(s.find("<polyline") != std::string::npos);
  std::string csv = slurp(d / "traces" / "00_AM.csv");
  CHECK(csv.rfind("tau,value,rate,err_estimate\n", 0) == 0);
  fs::remove_all(d);
}

TEST_CASE("failed verdicts exit 1 and still write the report") {
  // the J slope carries quadrature error far above 1e-12
  auto sc = parse_scenario(std::string(interval_x) +
                           R"("tasks": [{"type": "slopes", "theorems": ["MINNORM"], "schedule": {"tol": 1e-12}}]})");
  fs::path d = scratch("fail");
  RunOptions o;
  o.out = d.string();
  auto r = run_scenario(sc, o);
  CHECK(exit_status(r) == 1);
  CHECK(r.report["status"] == "fail");
  CHECK(fs::exists(d / "report.json"));
  fs::remove_all(d);
}

TEST_CASE("tau-max and quad-order overrides reach the schedule") {
  auto sc = parse_scenario(std::string(interval_x) + R"("tasks": [{"type": "slopes", "theorems": ["AM"]}]})");
  fs::path d = scratch("ovr");
  RunOptions o;
  o.out = d.string();
  o.tau_max = 9;
  o.quad_order = 12;
  auto r = run_scenario(sc, o);
  auto& s = r.report["tasks"][0]["schedule"];
  CHECK(s["taus"].back() == 9.0);
  CHECK(s["taus"].size() == 6);
  CHECK(s["quad_order"] == 12);
  CHECK(r.report["overrides"]["tau_max"] == 9.0);
  fs::remove_all(d);
}

TEST_CASE("unwritable output directory is an IoError") {
  auto sc = parse_scenario(std::string(interval_x) + R"("tasks": ["invariants"]})");
  fs::path d = scratch("io");
  { std::ofstream(d) << "a file, not a directory"; }
  RunOptions o;
  o.out = (d / "sub").string();
  CHECK_THROWS_WITH_AS(run_scenario(sc, o), doctest::Contains("IoError"), Error);
  fs::remove_all(d);
}
