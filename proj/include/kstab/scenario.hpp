#pragma once

#include "kstab/io.hpp"
#include "kstab/slope_lab.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kstab {

struct TaskSpec {
  std::string type;  // invariants | slopes | blowup | scan | l1
  json params;
};

struct Scenario {
  std::string name;
  ToricTestConfig cfg;
  std::optional<Polytope> alpha;
  std::vector<TaskSpec> tasks;
  std::string output_dir;
};

// ParseError carries the byte offset for malformed JSON; schema and
// consistency problems are ValidationError
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

struct RunOptions {
  std::optional<std::string> out;
  std::optional<double> tau_max;
  std::optional<int> quad_order;
  uint64_t seed = 0;
};

struct RunResult {
  json report;
  bool all_pass = true;
  std::string out_dir;
  std::vector<std::string> files;  // relative to out_dir
};

// runs the tasks in order and writes report.json, traces/*.csv and plots/*.svg
RunResult run_scenario(const Scenario& sc, const RunOptions& opt = {});

// 0 pass, 1 verdict failure; errors are thrown
inline int exit_status(const RunResult& r) { return r.all_pass ? 0 : 1; }

// self-contained line plot of rate vs tau with the exact value as a horizontal rule
std::string slope_svg(const Verdict& v, const std::string& title);

}  // namespace kstab
