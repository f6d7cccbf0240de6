#pragma once

#include "kstab/toric.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace kstab {

// toric class data for alpha: its polytope and gamma = V(P_alpha, P, ..., P) / Vol(P)
struct AlphaData {
  Polytope polytope;
  Rational gamma;
};
AlphaData alpha_data(const ToricTestConfig& cfg, const Polytope& P_alpha);

struct PathOptions {
  double rel_tol = 1e-7;
  double abs_floor = 1e-10;  // below this a quantity counts as converged absolutely
  int per_unit = 4;          // initial Simpson intervals per unit of tau
  int max_doublings = 6;
  Exec exec = Exec::parallel;
};

// functionals at one tau of a ray, integrated along the path from 0
struct PathPoint {
  double tau = 0;
  int dim = 0;
  double am = 0, am_direct = 0, i_val = 0, j_val = 0;
  std::optional<double> l_alpha;
  std::optional<double> gamma;
  double l_ric = 0, entropy = 0;
  double mabuchi_a = 0, mabuchi_b = 0;
  // instantaneous tau-derivatives at this tau
  double d_am = 0, d_j = 0, d_mabuchi = 0;
  std::optional<double> d_l_alpha;
  double l1_density = 0;  // n! int |phi_dot| dmu_tau
  double length = 0;      // int_0^tau of l1_density
  double err = 0;         // largest change over the last refinement
  int intervals = 0;      // Simpson intervals used on [0, tau]
};

// taus increasing in [0, ctx.tau_max]; each segment between consecutive taus is refined
// independently until every integrated quantity is stable to rel_tol
std::vector<PathPoint> evaluate_path(const RayContext& ctx, const std::vector<double>& taus,
                                     const AlphaData* alpha = nullptr, const PathOptions& opt = {});

struct EnergyReport {
  double am = 0, i_val = 0, j_val = 0;
  std::optional<double> l_alpha;
  double tau = 0;
};
// MissingAlpha if want_alpha and the path was evaluated without alpha
EnergyReport energy_report(const PathPoint& p, bool want_alpha = false);

// route (a), after checking it against route (b); RouteMismatch beyond rel_tol
double mabuchi(const PathPoint& p, double rel_tol = 1e-4);

struct JAlphaResult {
  double j_alpha = 0, twisted_mabuchi = 0;
  double d_j_alpha = 0;
};
JAlphaResult j_alpha_twisted(const PathPoint& p);

struct L1Result {
  double limit = 0;   // extrapolated n! int |phi_dot| dmu_tau
  double length = 0;  // path length up to the largest tau
};
// NormalizationRequired unless cfg is average_zero normalized
L1Result l1_norm_path(const ToricTestConfig& cfg, const std::vector<PathPoint>& pts);

// n! int_P |g| dmu exactly, as 2 max(g, 0) - g; the tau -> infinity value of the density
Rational l1_exact(const ToricTestConfig& cfg);

// tau, AM, I, J, L_alpha, M, J_alpha, M_twisted, err_estimate
void write_trace_csv(std::ostream& os, const std::vector<PathPoint>& pts);

}  // namespace kstab
