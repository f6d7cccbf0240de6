#pragma once

#include "kstab/pl.hpp"
#include "kstab/quadrature.hpp"

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

namespace kstab {

constexpr int kMaxDim = 4;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

// affine coordinates w = ell_K at a vertex: y = v - N^{-1} w, ell_j = c_j + <m_j, w>
struct Chart {
  int vertex = 0;
  std::vector<int> facets;
  Mat Ninv;
  Vec v;
  std::vector<Vec> m;
  std::vector<double> c;
  std::vector<int> slot;  // position in facets, -1 off chart
};

enum class Exec { serial, parallel };

struct SymplecticPotential {
  Polytope base;
  int n = 0;
  std::vector<Vec> normals;
  std::vector<double> offsets;
  std::vector<Chart> charts;

  // plain evaluation in the original coordinates
  double value(const double* x) const;
  Vec gradient(const double* x) const;
  Mat hessian(const double* x) const;
};

SymplecticPotential guillemin_potential(const Polytope& P);

// log-sum-exp smoothing of a PL function, doubles only
struct Smoothing {
  int n = 0;
  std::vector<Vec> grads;
  std::vector<double> consts;
  double beta = 1;

  Smoothing() = default;
  Smoothing(const PLConvexFn& g, double beta);
  double value(const double* x) const;
};

// u_tau = u0 + tau g_beta; tau = 0 or g = nullptr gives u0
struct RayPotential {
  const SymplecticPotential* u0 = nullptr;
  const Smoothing* g = nullptr;
  double tau = 0;
};

// a point of int P stored through a chart so tiny ell stay exact
struct MomentPoint {
  int chart = -1;
  Vec w;
  Vec x;
  std::vector<double> ell;
};

MomentPoint moment_point(const SymplecticPotential& u, const double* x);
// re-express in the chart that keeps the off-chart ell largest
void rechart(const SymplecticPotential& u, MomentPoint& p);
void set_chart_coords(const SymplecticPotential& u, MomentPoint& p, int chart, const Vec& w);

double potential_value(const RayPotential& r, const MomentPoint& p);
// gradient of u_tau in the original coordinates
Vec dual_point(const RayPotential& r, const MomentPoint& p);
Mat hessian(const RayPotential& r, const MomentPoint& p);
Mat inverse_hessian(const RayPotential& r, const MomentPoint& p);
double logdet_hessian(const RayPotential& r, const MomentPoint& p);

struct NewtonStats {
  int iterations = 0;
  int rechart = 0;
};
// solves grad u_tau(y) = xi; throws NewtonDivergence
MomentPoint legendre_solve(const RayPotential& r, const Vec& xi, const MomentPoint* init,
                           NewtonStats* stats = nullptr);

// raw Abreu expression -sum d_j d_k u^{jk}: closed form through fourth derivatives
double abreu_raw(const RayPotential& r, const MomentPoint& p);
// same by 4th order central differences of the inverse Hessian, step h
double abreu_raw_fd(const RayPotential& r, const double* x, double h);
// calibrated constant kappa with mean S = n slope_mu
double curvature_kappa();
double abreu_scalar_curvature(const SymplecticPotential& u, const double* x);

// kappa D^2_xi log det Hess u0 at the dual point, as a (2,0) tensor in the original coordinates
Mat ricci_potential_hessian(const SymplecticPotential& u, const MomentPoint& p, double kappa);

// mean of kappa * raw S over P, on a Gauss-Legendre grid, finite differences
double calibration_mean(const Polytope& P, int q, double kappa);

// --- rays ---

// Quadrature lives in the dual coordinates xi: a box of Gauss-Legendre panels covering the
// reference measure and every rho_s with s <= tau_max. Per node the reference moment point x,
// rho_0 = 1 / det Hess u0(x) and the Ricci data are fixed along the ray.
struct RayContext {
  ToricTestConfig cfg;
  SymplecticPotential u0;
  Smoothing g;
  double kappa = 0.5;
  double tau_max = 0;
  Grid grid;  // nodes xi, weights d xi
  std::vector<Vec> xi;
  std::vector<MomentPoint> ref;
  std::vector<double> rho0, psi0;
  std::vector<Mat> ricci;
};

struct BoxOptions {
  int quad_order = 16;
  double margin = 16;     // e^{-2 margin} tail mass
  double panel = 3;       // panel width for smooth data
  double layer = 4;       // PL data: panel width at most layer / beta
  size_t max_nodes = 400000;
};

RayContext make_ray_context(const ToricTestConfig& cfg, double tau_max, double beta,
                            const BoxOptions& opt = {}, Exec exec = Exec::parallel);

// per node: reference point x, u_tau point y sharing the dual coordinate
struct RayState {
  double tau = 0, beta = 0;
  int dim = 0;
  std::vector<double> weight;
  std::vector<MomentPoint> y;
  std::vector<double> rho, u_tau, phi, phi_dot, logdet, log_volume_ratio, S;
  std::vector<Mat> hessian, inv_hessian;
  size_t size() const { return weight.size(); }
};

RayState ray_state(const RayContext& ctx, double tau, const RayState* warm = nullptr,
                   Exec exec = Exec::parallel);
void write_ray_csv(std::ostream& os, const RayContext& ctx, const RayState& s);

// theta_tau at a fixed dual point xi: psi_tau(xi) - psi_0(xi)
double phi_at(const RayContext& ctx, double tau, const Vec& xi);
// d/dtau theta_tau at xi: -g_beta at the u_tau moment point
double phi_dot_at(const RayContext& ctx, double tau, const Vec& xi);

int configured_threads();
// runs f(i) for i < m; the parallel branch rethrows the first exception after the loop
void for_nodes(size_t m, Exec exec, const std::function<void(size_t)>& f);

}  // namespace kstab
