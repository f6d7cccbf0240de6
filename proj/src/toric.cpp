#include "kstab/toric.hpp"
#include "kstab/errors.hpp"
#include "kstab/invariants.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>

namespace kstab {

namespace {

double dotv(const Vec& a, const double* x) {
  double s = 0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * x[i];
  return s;
}

// log-sum-exp weights at x
struct SoftMax {
  std::vector<double> pi;
  double value = 0;
};

SoftMax softmax(const Smoothing& g, const double* x) {
  SoftMax s;
  size_t k = g.grads.size();
  s.pi.resize(k);
  double mx = -1e300;
  for (size_t i = 0; i < k; ++i) {
    s.pi[i] = dotv(g.grads[i], x) + g.consts[i];
    mx = std::max(mx, s.pi[i]);
  }
  double z = 0;
  for (size_t i = 0; i < k; ++i) {
    s.pi[i] = std::exp(g.beta * (s.pi[i] - mx));
    z += s.pi[i];
  }
  for (auto& p : s.pi) p /= z;
  s.value = mx + std::log(z) / g.beta;
  return s;
}

bool has_g(const RayPotential& r) { return r.g && r.tau != 0; }

// derivatives of u_tau in chart coordinates, up to fourth order
struct Local {
  int n = 0;
  Mat H;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> T{};
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> Q{};
  double& t(int a, int b, int c) { return T[(a * n + b) * n + c]; }
  double& q(int a, int b, int c, int d) { return Q[((a * n + b) * n + c) * n + d]; }
};

Local local_derivs(const RayPotential& r, const MomentPoint& p, int order) {
  const SymplecticPotential& u = *r.u0;
  const Chart& ch = u.charts[p.chart];
  int n = u.n;
  Local L;
  L.n = n;
  L.H = Mat::Zero(n, n);
  for (size_t j = 0; j < ch.m.size(); ++j) {
    const Vec& m = ch.m[j];
    double il = 1.0 / p.ell[j];
    L.H.noalias() += (0.5 * il) * m * m.transpose();
    if (order < 3) continue;
    double il2 = il * il, il3 = il2 * il;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double mabc = m[a] * m[b] * m[c];
          L.t(a, b, c) -= 0.5 * il2 * mabc;
          if (order < 4) continue;
          for (int d = 0; d < n; ++d) L.q(a, b, c, d) += il3 * mabc * m[d];
        }
  }
  if (!has_g(r)) return L;
  const Smoothing& g = *r.g;
  SoftMax sm = softmax(g, p.x.data());
  size_t k = g.grads.size();
  std::vector<Vec> d(k);
  Vec mean = Vec::Zero(n);
  for (size_t i = 0; i < k; ++i) {
    d[i] = -(ch.Ninv.transpose() * g.grads[i]);
    mean += sm.pi[i] * d[i];
  }
  Mat cov = Mat::Zero(n, n);
  for (size_t i = 0; i < k; ++i) {
    d[i] -= mean;
    cov.noalias() += sm.pi[i] * d[i] * d[i].transpose();
  }
  double tb = r.tau * g.beta;
  L.H += tb * cov;
  if (order < 3) return L;
  double tb2 = tb * g.beta, tb3 = tb2 * g.beta;
  for (size_t i = 0; i < k; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double w3 = sm.pi[i] * d[i][a] * d[i][b] * d[i][c];
          L.t(a, b, c) += tb2 * w3;
          if (order < 4) continue;
          for (int e = 0; e < n; ++e) L.q(a, b, c, e) += tb3 * w3 * d[i][e];
        }
  if (order >= 4)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int e = 0; e < n; ++e)
            L.q(a, b, c, e) -= tb3 * (cov(a, b) * cov(c, e) + cov(a, c) * cov(b, e) +
                                      cov(a, e) * cov(b, c));
  return L;
}

// Jacobi-scaled Cholesky: log det and inverse of an SPD matrix with wildly scaled entries
void spd_inverse(const Mat& H, Mat* W, double* logdet) {
  int n = (int)H.rows();
  Vec s(n);
  for (int i = 0; i < n; ++i) {
    if (!(H(i, i) > 0)) throw Error(Err::SingularHessian, "non-positive Hessian diagonal");
    s[i] = 1 / std::sqrt(H(i, i));
  }
  Mat M = s.asDiagonal() * H * s.asDiagonal();
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) throw Error(Err::SingularHessian, "Hessian not positive definite");
  if (logdet) {
    double ld = 0;
    for (int i = 0; i < n; ++i) ld += 2 * std::log(llt.matrixLLT()(i, i)) - 2 * std::log(s[i]);
    *logdet = ld;
  }
  if (W) {
    Mat Mi = llt.solve(Mat::Identity(n, n));
    *W = s.asDiagonal() * Mi * s.asDiagonal();
    *W = 0.5 * (*W + W->transpose());
  }
}

// contractions shared by the curvature and the Ricci data
struct Contractions {
  Vec v, G;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> U{};  // U_kbc = W_bd T_kde W_ec
};

Contractions contract(Local& L, const Mat& W) {
  int n = L.n;
  Contractions c;
  c.v = Vec::Zero(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int e = 0; e < n; ++e) c.v[a] += W(b, e) * L.t(a, b, e);
  c.G = W * c.v;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> TW{};
  for (int k = 0; k < n; ++k)
    for (int d = 0; d < n; ++d)
      for (int cc = 0; cc < n; ++cc) {
        double s = 0;
        for (int e = 0; e < n; ++e) s += L.t(k, d, e) * W(e, cc);
        TW[(k * n + d) * n + cc] = s;
      }
  for (int k = 0; k < n; ++k)
    for (int b = 0; b < n; ++b)
      for (int cc = 0; cc < n; ++cc) {
        double s = 0;
        for (int d = 0; d < n; ++d) s += W(b, d) * TW[(k * n + d) * n + cc];
        c.U[(k * n + b) * n + cc] = s;
      }
  return c;
}

// D_k G^j in chart coordinates
Mat grad_G(Local& L, const Mat& W, const Contractions& c) {
  int n = L.n;
  Mat dv = Mat::Zero(n, n);  // dv(k, a) = d_k v_a
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a) {
      double s = 0;
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc)
          s += -c.U[(k * n + b) * n + cc] * L.t(a, b, cc) + W(b, cc) * L.q(k, a, b, cc);
      dv(k, a) = s;
    }
  Mat D(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      double s = 0;
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc) s -= W(j, b) * L.t(k, b, cc) * c.G[cc];
      for (int a = 0; a < n; ++a) s += W(j, a) * dv(k, a);
      D(j, k) = s;
    }
  return D;
}

Vec to_vec(const std::vector<double>& v) {
  Vec r(v.size());
  for (size_t i = 0; i < v.size(); ++i) r[i] = v[i];
  return r;
}

double chart_score(const Chart& ch, const std::vector<double>& ell) {
  double s = 1e300;
  for (size_t j = 0; j < ell.size(); ++j)
    if (ch.slot[j] < 0) s = std::min(s, ell[j]);
  return s;
}

}  // namespace

// --- potential ---

double SymplecticPotential::value(const double* x) const {
  double s = 0;
  for (size_t j = 0; j < normals.size(); ++j) {
    double l = offsets[j] - dotv(normals[j], x);
    s += 0.5 * l * std::log(l);
  }
  return s;
}

Vec SymplecticPotential::gradient(const double* x) const {
  Vec g = Vec::Zero(n);
  for (size_t j = 0; j < normals.size(); ++j) {
    double l = offsets[j] - dotv(normals[j], x);
    g -= 0.5 * (std::log(l) + 1) * normals[j];
  }
  return g;
}

Mat SymplecticPotential::hessian(const double* x) const {
  Mat H = Mat::Zero(n, n);
  for (size_t j = 0; j < normals.size(); ++j) {
    double l = offsets[j] - dotv(normals[j], x);
    H.noalias() += (0.5 / l) * normals[j] * normals[j].transpose();
  }
  return H;
}

SymplecticPotential guillemin_potential(const Polytope& P) {
  if (!P.delzant) throw Error(Err::NonDelzant, "Guillemin potential needs a Delzant polytope");
  if (P.dim > kMaxDim) throw Error(Err::DimensionMismatch, "analytic layer supports dim <= 4");
  SymplecticPotential u;
  u.base = P;
  u.n = P.dim;
  for (auto& h : P.halfspaces) {
    u.normals.push_back(to_vec(to_doubles(h.normal)));
    u.offsets.push_back(to_double(h.offset));
  }
  int n = P.dim;
  for (size_t vi = 0; vi < P.vertices.size(); ++vi) {
    Chart ch;
    ch.vertex = (int)vi;
    ch.facets = P.vertex_facets[vi];
    Mat N(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) N(r, c) = to_double(P.halfspaces[ch.facets[r]].normal[c]);
    // unimodular, so the inverse is integral
    ch.Ninv = N.inverse().array().round().matrix();
    ch.v = to_vec(to_doubles(P.vertices[vi]));
    ch.slot.assign(P.halfspaces.size(), -1);
    for (int r = 0; r < n; ++r) ch.slot[ch.facets[r]] = r;
    for (size_t j = 0; j < P.halfspaces.size(); ++j) {
      auto& h = P.halfspaces[j];
      ch.m.push_back(ch.Ninv.transpose() * u.normals[j]);
      ch.c.push_back(to_double(h.offset - dot(h.normal, P.vertices[vi])));
    }
    u.charts.push_back(ch);
  }
  return u;
}

Smoothing::Smoothing(const PLConvexFn& g, double b) : n(g.dim()), beta(b) {
  for (auto& p : g.pieces) {
    grads.push_back(to_vec(to_doubles(p.gradient)));
    consts.push_back(to_double(p.constant));
  }
}

double Smoothing::value(const double* x) const { return softmax(*this, x).value; }

// --- moment points ---

void set_chart_coords(const SymplecticPotential& u, MomentPoint& p, int chart, const Vec& w) {
  const Chart& ch = u.charts[chart];
  p.chart = chart;
  p.w = w;
  p.x = ch.v - ch.Ninv * w;
  p.ell.resize(ch.m.size());
  for (size_t j = 0; j < ch.m.size(); ++j)
    p.ell[j] = ch.slot[j] >= 0 ? w[ch.slot[j]] : ch.c[j] + ch.m[j].dot(w);
}

void rechart(const SymplecticPotential& u, MomentPoint& p) {
  int best = p.chart;
  double bs = best >= 0 ? chart_score(u.charts[best], p.ell) : -1e300;
  // factor 2 hysteresis: near ties the chart would otherwise flip every round
  double need = best >= 0 ? 2 * bs : bs;
  for (size_t c = 0; c < u.charts.size(); ++c) {
    double s = chart_score(u.charts[c], p.ell);
    if (s > need && s > bs * (1 + 1e-12) + 1e-300) {
      bs = s;
      best = (int)c;
    }
  }
  if (best == p.chart) return;
  const Chart& ch = u.charts[best];
  Vec w(u.n);
  for (int r = 0; r < u.n; ++r) w[r] = p.ell[ch.facets[r]];
  set_chart_coords(u, p, best, w);
}

MomentPoint moment_point(const SymplecticPotential& u, const double* x) {
  MomentPoint p;
  p.ell.resize(u.normals.size());
  for (size_t j = 0; j < u.normals.size(); ++j) p.ell[j] = u.offsets[j] - dotv(u.normals[j], x);
  p.chart = -1;
  rechart(u, p);
  return p;
}

double potential_value(const RayPotential& r, const MomentPoint& p) {
  double s = 0;
  for (double l : p.ell) s += 0.5 * l * std::log(l);
  if (has_g(r)) s += r.tau * r.g->value(p.x.data());
  return s;
}

Vec dual_point(const RayPotential& r, const MomentPoint& p) {
  const SymplecticPotential& u = *r.u0;
  Vec g = Vec::Zero(u.n);
  for (size_t j = 0; j < p.ell.size(); ++j) g -= 0.5 * (std::log(p.ell[j]) + 1) * u.normals[j];
  if (has_g(r)) {
    SoftMax sm = softmax(*r.g, p.x.data());
    for (size_t i = 0; i < sm.pi.size(); ++i) g += r.tau * sm.pi[i] * r.g->grads[i];
  }
  return g;
}

Mat hessian(const RayPotential& r, const MomentPoint& p) {
  Local L = local_derivs(r, p, 2);
  Mat N = r.u0->charts[p.chart].Ninv.inverse();
  return N.transpose() * L.H * N;
}

Mat inverse_hessian(const RayPotential& r, const MomentPoint& p) {
  Local L = local_derivs(r, p, 2);
  Mat W;
  spd_inverse(L.H, &W, nullptr);
  const Mat& Ni = r.u0->charts[p.chart].Ninv;
  return Ni * W * Ni.transpose();
}

double logdet_hessian(const RayPotential& r, const MomentPoint& p) {
  Local L = local_derivs(r, p, 2);
  double ld;
  spd_inverse(L.H, nullptr, &ld);
  return ld;
}

// --- Legendre inversion ---

namespace {

bool residual(const RayPotential& r, const Chart& ch, const Vec& b, MomentPoint& p, Vec& res) {
  for (size_t j = 0; j < p.ell.size(); ++j)
    if (!(p.ell[j] > 0)) return false;
  res = b;
  for (size_t j = 0; j < ch.m.size(); ++j) {
    double lg = ch.slot[j] >= 0 ? std::log(p.w[ch.slot[j]]) : std::log(p.ell[j]);
    res += 0.5 * (lg + 1) * ch.m[j];
  }
  if (has_g(r)) {
    SoftMax sm = softmax(*r.g, p.x.data());
    for (size_t i = 0; i < sm.pi.size(); ++i)
      res -= r.tau * sm.pi[i] * (ch.Ninv.transpose() * r.g->grads[i]);
  }
  return true;
}

// Newton in z = log w inside one chart; returns true when converged
bool chart_newton(const RayPotential& r, const Vec& xi, MomentPoint& p, double tol, int max_it,
                  int& iters) {
  const Chart& ch = r.u0->charts[p.chart];
  int n = r.u0->n;
  Vec b = ch.Ninv.transpose() * xi;
  Vec res(n);
  if (!residual(r, ch, b, p, res)) return false;
  double rn = res.norm();
  for (int it = 0; it < max_it; ++it) {
    if (res.lpNorm<Eigen::Infinity>() < tol) return true;
    ++iters;
    Local L = local_derivs(r, p, 2);
    Mat J = L.H * p.w.asDiagonal();
    Vec dz = J.partialPivLu().solve(-res);
    // at the rounding floor of a stiff Hessian the residual cannot drop below tol
    if (dz.lpNorm<Eigen::Infinity>() < 1e-14 && res.lpNorm<Eigen::Infinity>() < 1e-8) return true;
    double cap = dz.lpNorm<Eigen::Infinity>();
    double t = cap > 20 ? 20 / cap : 1.0;
    Vec z = p.w.array().log().matrix();
    // res is the w-gradient of u - <xi, x>, a convex objective; Armijo on it keeps the
    // iteration global when the residual norm alone stalls near a stiff softmax
    double slope = res.dot(p.w.cwiseProduct(dz));
    double f0 = potential_value(r, p) - xi.dot(p.x);
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      MomentPoint q = p;
      Vec zn = z + t * dz;
      set_chart_coords(*r.u0, q, p.chart, zn.array().exp().matrix());
      Vec rq(n);
      if (!residual(r, ch, b, q, rq)) continue;
      double qn = rq.norm();
      bool armijo = slope < 0 && potential_value(r, q) - xi.dot(q.x) <= f0 + 1e-4 * t * slope;
      if (qn <= (1 - 1e-4 * t) * rn || qn < tol || armijo) {
        p = q;
        res = rq;
        rn = qn;
        moved = true;
        break;
      }
    }
    if (!moved) return res.lpNorm<Eigen::Infinity>() < 1e3 * tol;
  }
  return res.lpNorm<Eigen::Infinity>() < tol;
}

}  // namespace

namespace {

MomentPoint cold_start(const SymplecticPotential& u, const Vec& xi) {
  int best = 0;
  double bv = -1e300;
  for (size_t c = 0; c < u.charts.size(); ++c) {
    double s = u.charts[c].v.dot(xi);
    if (s > bv) { bv = s; best = (int)c; }
  }
  auto vd = volume_data(u.base);
  Vec bary = to_vec(to_doubles(vd.barycenter));
  MomentPoint b0 = moment_point(u, bary.data());
  Vec w(u.n);
  for (int k = 0; k < u.n; ++k) w[k] = b0.ell[u.charts[best].facets[k]];
  MomentPoint p;
  set_chart_coords(u, p, best, w);
  return p;
}

bool solve_from(const RayPotential& r, const Vec& xi, MomentPoint& p, int& iters, int& swaps) {
  double tol = 1e-13 * (1 + xi.lpNorm<Eigen::Infinity>());
  for (int round = 0; round < 6; ++round) {
    bool ok = chart_newton(r, xi, p, tol, 200, iters);
    int before = p.chart;
    rechart(*r.u0, p);
    if (p.chart != before) ++swaps;
    if (ok && p.chart == before) return true;
  }
  return false;
}

}  // namespace

MomentPoint legendre_solve(const RayPotential& r, const Vec& xi, const MomentPoint* init,
                           NewtonStats* stats) {
  const SymplecticPotential& u = *r.u0;
  int iters = 0, swaps = 0;
  auto done = [&](MomentPoint& p) {
    if (stats) { stats->iterations += iters; stats->rechart += swaps; }
    return p;
  };
  MomentPoint p = init ? *init : cold_start(u, xi);
  if (solve_from(r, xi, p, iters, swaps)) return done(p);
  if (init) {
    p = cold_start(u, xi);
    if (solve_from(r, xi, p, iters, swaps)) return done(p);
  }
  // continuation in tau for stiff smoothings: the solution moves continuously with tau
  if (has_g(r) && r.tau > 0) {
    for (int steps : {8, 64}) {
      p = cold_start(u, xi);
      bool ok = true;
      for (int k = 0; k <= steps && ok; ++k) {
        RayPotential rk = r;
        rk.tau = r.tau * k / steps;
        ok = solve_from(rk, xi, p, iters, swaps);
      }
      if (ok) return done(p);
    }
  }
  throw Error(Err::NewtonDivergence, "Legendre inversion did not converge");
}

// --- curvature ---

double abreu_raw(const RayPotential& r, const MomentPoint& p) {
  Local L = local_derivs(r, p, 4);
  int n = L.n;
  Mat W;
  spd_inverse(L.H, &W, nullptr);
  Contractions c = contract(L, W);
  double t1 = -c.G.dot(c.v), t2 = 0, t3 = 0;
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc) {
          t2 += W(j, a) * c.U[(j * n + b) * n + cc] * L.t(a, b, cc);
          t3 += W(j, a) * W(b, cc) * L.q(j, a, b, cc);
        }
  return t1 - t2 + t3;
}

Mat ricci_potential_hessian(const SymplecticPotential& u, const MomentPoint& p, double kappa) {
  RayPotential r{&u, nullptr, 0};
  Local L = local_derivs(r, p, 4);
  Mat W;
  spd_inverse(L.H, &W, nullptr);
  Contractions c = contract(L, W);
  Mat A = kappa * grad_G(L, W, c) * W;
  A = 0.5 * (A + A.transpose()).eval();
  const Mat& Ni = u.charts[p.chart].Ninv;
  return Ni * A * Ni.transpose();
}

namespace {

Mat inverse_hessian_at(const RayPotential& r, const double* x) {
  const SymplecticPotential& u = *r.u0;
  Mat H = u.hessian(x);
  if (has_g(r)) {
    SoftMax sm = softmax(*r.g, x);
    Vec mean = Vec::Zero(u.n);
    for (size_t i = 0; i < sm.pi.size(); ++i) mean += sm.pi[i] * r.g->grads[i];
    for (size_t i = 0; i < sm.pi.size(); ++i) {
      Vec d = r.g->grads[i] - mean;
      H.noalias() += r.tau * r.g->beta * sm.pi[i] * d * d.transpose();
    }
  }
  return H.fullPivLu().inverse();
}

}  // namespace

double abreu_raw_fd(const RayPotential& r, const double* x0, double h) {
  int n = r.u0->n;
  static const double c1[5] = {1.0 / 12, -8.0 / 12, 0, 8.0 / 12, -1.0 / 12};
  static const double c2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
  std::vector<double> x(x0, x0 + n);
  double s = 0;
  for (int j = 0; j < n; ++j) {
    double d2 = 0;
    for (int a = 0; a < 5; ++a) {
      if (c2[a] == 0) continue;
      x[j] = x0[j] + (a - 2) * h;
      d2 += c2[a] * inverse_hessian_at(r, x.data())(j, j);
      x[j] = x0[j];
    }
    s += d2 / (h * h);
    for (int k = j + 1; k < n; ++k) {
      double dm = 0;
      for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
          if (c1[a] == 0 || c1[b] == 0) continue;
          x[j] = x0[j] + (a - 2) * h;
          x[k] = x0[k] + (b - 2) * h;
          dm += c1[a] * c1[b] * inverse_hessian_at(r, x.data())(j, k);
          x[j] = x0[j];
          x[k] = x0[k];
        }
      s += 2 * dm / (h * h);
    }
  }
  return -s;
}

namespace {

double diameter(const Polytope& P) {
  double d = 0;
  for (auto& a : P.vertices)
    for (auto& b : P.vertices) {
      double s = 0;
      for (int i = 0; i < P.dim; ++i) {
        double t = to_double(a[i] - b[i]);
        s += t * t;
      }
      d = std::max(d, std::sqrt(s));
    }
  return d;
}

}  // namespace

double calibration_mean(const Polytope& P, int q, double kappa) {
  SymplecticPotential u = guillemin_potential(P);
  RayPotential r{&u, nullptr, 0};
  Grid g = polytope_grid(P, q);
  double h = 1e-3 * diameter(P);
  double s = 0, vol = 0;
  for (size_t i = 0; i < g.size(); ++i) {
    s += g.wts[i] * kappa * abreu_raw_fd(r, g.point(i), h);
    vol += g.wts[i];
  }
  return s / vol;
}

double curvature_kappa() {
  static std::once_flag once;
  static double kappa;
  std::call_once(once, [] {
    Polytope I = from_halfspaces(1, {{{Rational(-1)}, Rational(0)}, {{Rational(1)}, Rational(1)}});
    kappa = to_double(slope_mu(I)) / calibration_mean(I, 16, 1.0);
  });
  return kappa;
}

double abreu_scalar_curvature(const SymplecticPotential& u, const double* x) {
  RayPotential r{&u, nullptr, 0};
  return curvature_kappa() * abreu_raw_fd(r, x, 1e-3 * diameter(u.base));
}

// --- rays ---

void for_nodes(size_t m, Exec exec, const std::function<void(size_t)>& f) {
  if (exec == Exec::serial) {
    for (size_t i = 0; i < m; ++i) f(i);
    return;
  }
  std::exception_ptr err;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic, 64) num_threads(configured_threads())
  for (long i = 0; i < (long)m; ++i) {
    try {
      f((size_t)i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

RayContext make_ray_context(const ToricTestConfig& cfg, double tau_max, double beta,
                            const BoxOptions& opt, Exec exec) {
  if (tau_max < 0) throw Error(Err::ValidationError, "tau must be nonnegative");
  RayContext ctx;
  ctx.cfg = cfg;
  ctx.u0 = guillemin_potential(cfg.base);
  ctx.g = Smoothing(cfg.g, beta);
  ctx.kappa = curvature_kappa();
  ctx.tau_max = tau_max;
  int n = ctx.u0.n;
  Vec bary = to_vec(to_doubles(volume_data(cfg.base).barycenter));
  Vec c0 = ctx.u0.gradient(bary.data());
  std::vector<double> lo(n), hi(n);
  for (int k = 0; k < n; ++k) {
    double amin = 0, amax = 0;
    for (auto& a : ctx.g.grads) {
      amin = std::min(amin, a[k]);
      amax = std::max(amax, a[k]);
    }
    lo[k] = c0[k] - opt.margin + tau_max * amin;
    hi[k] = c0[k] + opt.margin + tau_max * amax;
  }
  double h = opt.panel;
  if (ctx.g.grads.size() > 1) h = std::min(h, opt.layer / beta);
  auto count = [&](double hh) {
    double c = 1;
    for (int k = 0; k < n; ++k) c *= std::ceil((hi[k] - lo[k]) / hh) * opt.quad_order;
    return c;
  };
  while (count(h) > (double)opt.max_nodes) h *= 1.25;
  const Rule1D& r = gauss_legendre(opt.quad_order);
  std::vector<std::vector<double>> nodes(n), wts(n);
  for (int k = 0; k < n; ++k) {
    int np = (int)std::ceil((hi[k] - lo[k]) / h);
    double w = (hi[k] - lo[k]) / np;
    for (int p = 0; p < np; ++p)
      for (int i = 0; i < opt.quad_order; ++i) {
        nodes[k].push_back(lo[k] + w * (p + r.x[i]));
        wts[k].push_back(w * r.w[i]);
      }
  }
  Grid& g = ctx.grid;
  g.dim = n;
  std::vector<size_t> idx(n, 0);
  while (true) {
    double w = 1;
    for (int k = 0; k < n; ++k) {
      g.pts.push_back(nodes[k][idx[k]]);
      w *= wts[k][idx[k]];
    }
    g.wts.push_back(w);
    int k = n - 1;
    while (k >= 0 && ++idx[k] == nodes[k].size()) idx[k--] = 0;
    if (k < 0) break;
  }
  size_t m = g.size();
  ctx.xi.resize(m);
  ctx.ref.resize(m);
  ctx.rho0.resize(m);
  ctx.psi0.resize(m);
  ctx.ricci.resize(m);
  RayPotential r0{&ctx.u0, nullptr, 0};
  for_nodes(m, exec, [&](size_t i) {
    Vec xi(n);
    for (int k = 0; k < n; ++k) xi[k] = g.point(i)[k];
    MomentPoint x = legendre_solve(r0, xi, nullptr);
    ctx.xi[i] = xi;
    ctx.rho0[i] = std::exp(-logdet_hessian(r0, x));
    ctx.psi0[i] = x.x.dot(xi) - potential_value(r0, x);
    ctx.ricci[i] = ricci_potential_hessian(ctx.u0, x, ctx.kappa);
    ctx.ref[i] = std::move(x);
  });
  return ctx;
}

namespace {

void eval_node(const RayContext& ctx, double tau, const RayState* warm, RayState& s, size_t i) {
  RayPotential r{&ctx.u0, &ctx.g, tau};
  const Vec& xi = ctx.xi[i];
  MomentPoint y = tau == 0 ? ctx.ref[i] : legendre_solve(r, xi, warm ? &warm->y[i] : &ctx.ref[i]);
  double ut = potential_value(r, y);
  Local L = local_derivs(r, y, 2);
  Mat W;
  double ld;
  spd_inverse(L.H, &W, &ld);
  const Mat& Ni = ctx.u0.charts[y.chart].Ninv;
  Mat N = Ni.inverse();
  s.weight[i] = ctx.grid.wts[i];
  s.u_tau[i] = ut;
  s.phi[i] = tau == 0 ? 0.0 : y.x.dot(xi) - ut - ctx.psi0[i];
  s.phi_dot[i] = -ctx.g.value(y.x.data());
  s.hessian[i] = N.transpose() * L.H * N;
  s.inv_hessian[i] = Ni * W * Ni.transpose();
  s.logdet[i] = ld;
  s.rho[i] = std::exp(-ld);
  s.log_volume_ratio[i] = -ld - std::log(ctx.rho0[i]);
  s.S[i] = ctx.kappa * abreu_raw(r, y);
  s.y[i] = std::move(y);
}

}  // namespace

RayState ray_state(const RayContext& ctx, double tau, const RayState* warm, Exec exec) {
  if (tau < 0) throw Error(Err::ValidationError, "tau must be nonnegative");
  size_t m = ctx.grid.size();
  RayState s;
  s.tau = tau;
  s.beta = ctx.g.beta;
  s.dim = ctx.u0.n;
  s.weight.resize(m);
  s.y.resize(m);
  for (auto* v : {&s.rho, &s.u_tau, &s.phi, &s.phi_dot, &s.logdet, &s.log_volume_ratio, &s.S})
    v->resize(m);
  s.hessian.resize(m);
  s.inv_hessian.resize(m);
  if (warm && warm->size() != m) warm = nullptr;
  for_nodes(m, exec, [&](size_t i) { eval_node(ctx, tau, warm, s, i); });
  return s;
}

void write_ray_csv(std::ostream& os, const RayContext& ctx, const RayState& s) {
  for (int k = 0; k < s.dim; ++k) os << "x" << k << ",";
  for (int k = 0; k < s.dim; ++k) os << "y" << k << ",";
  os << "weight,phi,phi_dot,logdet,S\n";
  os.precision(17);
  for (size_t i = 0; i < s.size(); ++i) {
    for (int k = 0; k < s.dim; ++k) os << ctx.ref[i].x[k] << ",";
    for (int k = 0; k < s.dim; ++k) os << s.y[i].x[k] << ",";
    os << s.weight[i] * ctx.rho0[i] << "," << s.phi[i] << "," << s.phi_dot[i] << ","
       << s.logdet[i] << "," << s.S[i] << "\n";
  }
}

double phi_at(const RayContext& ctx, double tau, const Vec& xi) {
  RayPotential r{&ctx.u0, &ctx.g, tau};
  RayPotential r0{&ctx.u0, nullptr, 0};
  MomentPoint y = legendre_solve(r, xi, nullptr);
  MomentPoint x = legendre_solve(r0, xi, nullptr);
  return (y.x.dot(xi) - potential_value(r, y)) - (x.x.dot(xi) - potential_value(r0, x));
}

double phi_dot_at(const RayContext& ctx, double tau, const Vec& xi) {
  RayPotential r{&ctx.u0, &ctx.g, tau};
  MomentPoint y = legendre_solve(r, xi, nullptr);
  return -ctx.g.value(y.x.data());
}

int configured_threads() {
  int hw = omp_get_num_procs();
  if (const char* e = std::getenv("KSTAB_THREADS")) {
    int t = std::atoi(e);
    if (t > 0) return std::min(t, std::max(hw, 1));
  }
  return std::max(hw, 1);
}

}  // namespace kstab
