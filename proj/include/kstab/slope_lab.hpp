#pragma once

#include "kstab/functionals.hpp"
#include "kstab/io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kstab {

struct TracePoint {
  double tau = 0, value = 0, err = 0;
  double rate = 0;  // d/dtau of value where the path provides it
};

enum class SlopeModel { window_diff, exp_fit };
const char* model_name(SlopeModel m);

struct SlopeEstimate {
  double value = 0;
  SlopeModel model = SlopeModel::exp_fit;
  double residual = 0;
  double window = 0;  // finite-difference slope over the last four intervals
  double tau_max = 0;
  int samples_used = 0;
};

// >= 6 samples, strictly increasing tau, tau_max >= 8; fits a + s tau + c e^{-tau} on the
// last five samples and cross-checks against the window difference
SlopeEstimate estimate_limit_slope(const std::vector<TracePoint>& trace);

enum class TheoremKind { AM, DF, MINNORM, JALPHA, POINT };
const char* theorem_name(TheoremKind k);

struct Theorem {
  TheoremKind kind = TheoremKind::AM;
  RVec vertex;                     // POINT
  std::optional<Polytope> alpha;   // JALPHA
};

struct Schedule {
  std::vector<double> taus{1, 2, 4, 6, 8, 10, 12};
  double beta0 = 10;
  std::optional<double> tol;  // overrides the per-theorem default
  BoxOptions box;
  PathOptions path;
  double point_radius = 60;
};

struct Verdict {
  TheoremKind kind = TheoremKind::AM;
  std::string theorem;
  Rational exact;
  SlopeEstimate slope;
  double tol = 0;
  bool pass = false;
  bool certified = true;  // affine g; PL g is the experimental tier
  Normalization normalization = Normalization::raw;
  std::vector<TracePoint> trace;
  std::vector<PathPoint> states;  // functional states behind the trace (empty for POINT)
};

double default_tolerance(TheoremKind k, bool certified);

// functional states at every scheduled tau: one path for affine g, one per target tau for PL g
std::vector<PathPoint> schedule_paths(const ToricTestConfig& cfg, const std::optional<Polytope>& alpha,
                                      const Schedule& sch);

// theorems sharing a normalization reuse one set of paths
std::vector<Verdict> verify_theorems(const ToricTestConfig& cfg, const std::vector<Theorem>& ths,
                                     const Schedule& sch = {});
Verdict verify_theorem(const ToricTestConfig& cfg, const Theorem& th, const Schedule& sch = {});

// {theorem, exact, decimal, slope, residual, tol, pass, tier, ...}
json verdict_json(const Verdict& v);

struct DestabilizerReport {
  bool destabilizing = false;  // max > 0
  double value = 0;
  std::optional<Rational> exact;  // vertex candidates
  std::vector<double> point;
  int index = -1;
  std::vector<double> values;  // per candidate
};
// exact Chow weights over the vertices
DestabilizerReport scan_vertices(const ToricTestConfig& cfg);
// numeric POINT slopes at interior points: Ch_p = -lim theta_dot(p), average_zero normalized
DestabilizerReport scan_points(const ToricTestConfig& cfg, const std::vector<std::vector<double>>& pts,
                               const Schedule& sch = {});
json destabilizer_json(const DestabilizerReport& r);

}  // namespace kstab
