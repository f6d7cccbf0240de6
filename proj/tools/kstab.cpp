#include "kstab/errors.hpp"
#include "kstab/scenario.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#ifndef KSTAB_SCENARIO_DIR
#define KSTAB_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace kstab;

namespace {

int report_error(const std::string& where, const Error& e) {
  std::cerr << "kstab: " << where << e.what() << "\n";
  return exit_code(e.code());
}

int run_one(const std::string& path, const RunOptions& opt, bool quiet) {
  try {
    auto t0 = std::chrono::steady_clock::now();
    Scenario sc = load_scenario(path);
    RunResult r = run_scenario(sc, opt);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!quiet) {
      for (auto& t : r.report["tasks"]) {
        if (t.contains("verdicts"))
          for (auto& v : t["verdicts"])
            std::printf("  %-8s exact %-10s slope %-12.8g %s\n", v["theorem"].get<std::string>().c_str(),
                        v["exact"].get<std::string>().c_str(), v["slope"].get<double>(),
                        v["pass"].get<bool>() ? "pass" : "FAIL");
        else if (t.contains("pass"))
          std::printf("  %-8s %s\n", t["type"].get<std::string>().c_str(), t["pass"].get<bool>() ? "pass" : "FAIL");
        else
          std::printf("  %-8s done\n", t["type"].get<std::string>().c_str());
      }
    }
    std::printf("%s %s (%.1f s) -> %s\n", r.all_pass ? "PASS" : "FAIL", sc.name.c_str(), secs, r.out_dir.c_str());
    return exit_status(r);
  } catch (const Error& e) {
    return report_error(path + ": ", e);
  } catch (const std::exception& e) {
    std::cerr << "kstab: " << path << ": NumericalFailure: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toric K-stability lab"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  double tau_max = 0;
  int quad_order = 0;
  uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run one scenario file");
  run->add_option("scenario", scenario, "scenario JSON")->required();
  auto* o_out = run->add_option("--out", out, "output directory (overrides output_dir)");
  auto* o_tau = run->add_option("--tau-max", tau_max, "largest tau of every schedule")->check(CLI::PositiveNumber);
  auto* o_q = run->add_option("--quad-order", quad_order, "Gauss-Legendre points per panel axis")
                  ->check(CLI::Range(1, 64));
  run->add_option("--seed", seed, "seed for random scan points");

  std::string suite_dir = KSTAB_SCENARIO_DIR, suite_out = "kstab-suite";
  auto* suite = app.add_subcommand("check-suite", "run the bundled acceptance scenarios");
  suite->add_option("--dir", suite_dir, "scenario directory");
  suite->add_option("--out", suite_out, "root of the per-scenario output directories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*run) {
    RunOptions opt;
    if (*o_out) opt.out = out;
    if (*o_tau) opt.tau_max = tau_max;
    if (*o_q) opt.quad_order = quad_order;
    opt.seed = seed;
    return run_one(scenario, opt, false);
  }

  std::vector<fs::path> files;
  std::error_code ec;
  for (auto& e : fs::directory_iterator(suite_dir, ec))
    if (e.path().extension() == ".json") files.push_back(e.path());
  if (ec) {
    std::cerr << "kstab: IoError: cannot list " << suite_dir << ": " << ec.message() << "\n";
    return 5;
  }
  if (files.empty()) {
    std::cerr << "kstab: IoError: no scenarios in " << suite_dir << "\n";
    return 5;
  }
  std::sort(files.begin(), files.end());
  int worst = 0;
  for (auto& f : files) {
    RunOptions opt;
    opt.out = (fs::path(suite_out) / f.stem()).string();
    int rc = run_one(f.string(), opt, true);
    // errors outrank verdict failures
    if (rc != 0 && (worst == 0 || (worst == 1 && rc > 1))) worst = rc;
  }
  std::printf("%zu scenarios, status %d\n", files.size(), worst);
  return worst;
}
