#include "kstab/functionals.hpp"
#include "kstab/errors.hpp"
#include "kstab/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace kstab {

AlphaData alpha_data(const ToricTestConfig& cfg, const Polytope& P_alpha) {
  return {P_alpha, twisted_weights(cfg, P_alpha).gamma};
}

namespace {

double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binom(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// elementary symmetric functions of the eigenvalues via Newton's identities
std::vector<double> elementary(const Mat& M) {
  int n = (int)M.rows();
  std::vector<double> p(n + 1), e(n + 1);
  Mat P = Mat::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    P = (P * M).eval();
    p[k] = P.trace();
  }
  e[0] = 1;
  for (int k = 1; k <= n; ++k) {
    double s = 0;
    for (int i = 1; i <= k; ++i) s += (i % 2 ? 1 : -1) * e[k - i] * p[i];
    e[k] = s / k;
  }
  return e;
}

// D^2 of (1/2) log sum exp 2<v, xi> over the vertices of P_alpha: twice the covariance
Mat alpha_hessian(const Polytope& Pa, const Vec& xi) {
  int n = (int)xi.size();
  std::vector<Vec> vs;
  for (auto& v : Pa.vertices) {
    Vec d(n);
    for (int k = 0; k < n; ++k) d[k] = to_double(v[k]);
    vs.push_back(d);
  }
  double mx = -1e300;
  std::vector<double> z(vs.size());
  for (size_t i = 0; i < vs.size(); ++i) mx = std::max(mx, z[i] = 2 * vs[i].dot(xi));
  double tot = 0;
  for (auto& t : z) tot += (t = std::exp(t - mx));
  Vec mean = Vec::Zero(n);
  for (size_t i = 0; i < vs.size(); ++i) mean += z[i] / tot * vs[i];
  Mat C = Mat::Zero(n, n);
  for (size_t i = 0; i < vs.size(); ++i) {
    Vec d = vs[i] - mean;
    C.noalias() += z[i] / tot * d * d.transpose();
  }
  return 2 * C;
}

// path integrands at one s
struct Rates {
  double am = 0, lric = 0, la = 0, mb = 0, l1 = 0;
};
constexpr int kRates = 5;
double rate(const Rates& r, int k) {
  switch (k) {
    case 0: return r.am;
    case 1: return r.lric;
    case 2: return r.la;
    case 3: return r.mb;
    default: return r.l1;
  }
}

struct Evaluator {
  const RayContext& ctx;
  const AlphaData* alpha;
  const PathOptions& opt;
  int n;
  double nf, mu;
  std::vector<Mat> a_alpha;

  Evaluator(const RayContext& c, const AlphaData* a, const PathOptions& o)
      : ctx(c), alpha(a), opt(o), n(c.u0.n), nf(factorial(c.u0.n)),
        mu(to_double(slope_mu(c.cfg.base))) {
    if (alpha) {
      if (alpha->polytope.dim != n) throw Error(Err::DimensionMismatch, "alpha polytope dimension");
      a_alpha.resize(ctx.xi.size());
      for_nodes(ctx.xi.size(), opt.exec,
                [&](size_t i) { a_alpha[i] = alpha_hessian(alpha->polytope, ctx.xi[i]); });
    }
  }

  // fixed-order serial sums over a per-node buffer
  Rates rates(const RayState& s) const {
    Rates r;
    for (size_t i = 0; i < s.size(); ++i) {
      double wr = s.weight[i] * s.rho[i], pd = s.phi_dot[i];
      r.am += wr * pd;
      r.lric += wr * pd * (s.hessian[i] * ctx.ricci[i]).trace();
      if (alpha) r.la += wr * pd * (s.hessian[i] * a_alpha[i]).trace();
      r.mb -= wr * pd * (s.S[i] - n * mu);
      r.l1 += wr * std::abs(pd);
    }
    r.am *= (n + 1) * nf;
    r.lric *= nf;
    r.la *= nf;
    r.mb *= nf;
    r.l1 *= nf;
    return r;
  }

  RayState state(double tau, const RayState* warm) const {
    return ray_state(ctx, tau, warm, opt.exec);
  }
};

double simpson(const std::vector<Rates>& f, int k, double h) {
  size_t N = f.size() - 1;
  double s = rate(f[0], k) + rate(f[N], k);
  for (size_t i = 1; i < N; ++i) s += (i % 2 ? 4 : 2) * rate(f[i], k);
  return s * h / 3;
}

}  // namespace

std::vector<PathPoint> evaluate_path(const RayContext& ctx, const std::vector<double>& taus,
                                     const AlphaData* alpha, const PathOptions& opt) {
  for (size_t k = 0; k < taus.size(); ++k) {
    if (taus[k] < 0 || (k && taus[k] <= taus[k - 1]))
      throw Error(Err::NonMonotoneTau, "tau samples must be increasing and nonnegative");
    if (taus[k] > ctx.tau_max * (1 + 1e-12))
      throw Error(Err::ValidationError, "tau beyond the range of the quadrature box");
  }
  Evaluator ev(ctx, alpha, opt);
  int n = ev.n;
  double nf = ev.nf;
  std::vector<PathPoint> out;
  double a = 0;
  RayState sa = ev.state(0, nullptr);
  Rates ra = ev.rates(sa);
  double tot[kRates] = {0, 0, 0, 0, 0}, err = 0;
  int intervals = 0;
  // PL data switches on over s ~ 1/beta: geometric knots 2^k / beta keep Simpson panels
  // proportional to the local scale
  std::vector<std::pair<double, bool>> knots;
  double last = taus.empty() ? 0 : taus.back();
  if (ctx.g.grads.size() > 1)
    for (double k = 1 / ctx.g.beta; k < last; k *= 2) knots.push_back({k, false});
  for (double t : taus) knots.push_back({t, true});
  std::stable_sort(knots.begin(), knots.end(),
                   [](auto& x, auto& y) { return x.first < y.first; });
  for (auto [b, report] : knots) {
    if (!report && b <= a) continue;
    RayState sb = sa;
    Rates rb = ra;
    if (b > a) {
      int N = std::max(2, 2 * (int)std::ceil(0.5 * opt.per_unit * (b - a)));
      std::vector<Rates> f(N + 1);
      f[0] = ra;
      const RayState* warm = &sa;
      for (int i = 1; i <= N; ++i) {
        sb = ev.state(a + (b - a) * i / N, warm);
        f[i] = ev.rates(sb);
        warm = &sb;
      }
      double prev[kRates];
      for (int k = 0; k < kRates; ++k) prev[k] = simpson(f, k, (b - a) / N);
      double seg_err = 0;
      const RayState& left = sa;
      for (int d = 0; d < opt.max_doublings; ++d) {
        std::vector<Rates> g(2 * N + 1);
        for (int i = 0; i <= N; ++i) g[2 * i] = f[i];
        const RayState* warm = &left;
        RayState cur, last;
        for (int i = 0; i < N; ++i) {
          cur = ev.state(a + (b - a) * (2 * i + 1) / (2 * N), warm);
          g[2 * i + 1] = ev.rates(cur);
          last = std::move(cur);
          warm = &last;
        }
        N *= 2;
        f.swap(g);
        bool ok = true;
        seg_err = 0;
        for (int k = 0; k < kRates; ++k) {
          double cur_v = simpson(f, k, (b - a) / N);
          // the change bounds the error of the Richardson-corrected sum with a wide margin
          double dlt = cur_v - prev[k];
          seg_err = std::max(seg_err, std::abs(dlt));
          double scale = std::max(std::abs(tot[k] + cur_v), std::abs(cur_v));
          if (std::abs(dlt) > opt.rel_tol * scale + opt.abs_floor) ok = false;
          prev[k] = cur_v + dlt / 15;
        }
        if (ok) break;
      }
      for (int k = 0; k < kRates; ++k) tot[k] += prev[k];
      err += seg_err;
      intervals += N;
      rb = f.back();
    }
    if (!report) {
      a = b;
      ra = rb;
      sa = std::move(sb);
      continue;
    }
    PathPoint p;
    p.tau = b;
    p.dim = n;
    p.intervals = intervals;
    p.err = err;
    p.am = tot[0];
    p.l_ric = tot[1];
    p.mabuchi_b = tot[3];
    p.length = tot[4];
    p.d_am = rb.am;
    p.d_mabuchi = rb.mb;
    p.l1_density = rb.l1;
    if (alpha) {
      p.l_alpha = tot[2];
      p.d_l_alpha = rb.la;
      p.gamma = to_double(alpha->gamma);
    }
    // terminal integrals at b
    double ent = 0, phi0 = 0, phit = 0, dphi0 = 0, amd = 0;
    RayPotential r0{&ctx.u0, nullptr, 0};
    for (size_t i = 0; i < sb.size(); ++i) {
      double w = sb.weight[i];
      ent += w * sb.rho[i] * sb.log_volume_ratio[i];
      phi0 += w * ctx.rho0[i] * sb.phi[i];
      phit += w * sb.rho[i] * sb.phi[i];
      dphi0 += w * ctx.rho0[i] * sb.phi_dot[i];
      if (b > 0) {
        Mat M = sb.hessian[i] * inverse_hessian(r0, ctx.ref[i]);
        auto e = elementary(M);
        double s = 0;
        for (int j = 0; j <= n; ++j) s += e[j] / binom(n, j);
        amd += w * sb.rho[i] * sb.phi[i] * s;
      }
    }
    p.entropy = ctx.kappa * nf * ent;
    p.am_direct = nf * amd;
    p.j_val = nf * phi0 - p.am / (n + 1);
    p.i_val = nf * (phi0 - phit);
    p.d_j = nf * dphi0 - rb.am / (n + 1);
    p.mabuchi_a = p.entropy + double(n) / (n + 1) * ev.mu * p.am - p.l_ric;
    if (b == 0) p.mabuchi_a = p.entropy = 0;
    out.push_back(p);
    a = b;
    ra = rb;
    sa = std::move(sb);
  }
  return out;
}

EnergyReport energy_report(const PathPoint& p, bool want_alpha) {
  if (want_alpha && !p.l_alpha) throw Error(Err::MissingAlpha, "L_alpha requested without alpha data");
  return {p.am, p.i_val, p.j_val, p.l_alpha, p.tau};
}

double mabuchi(const PathPoint& p, double rel_tol) {
  if (std::abs(p.mabuchi_a - p.mabuchi_b) > rel_tol * (1 + std::abs(p.mabuchi_a)))
    throw Error(Err::RouteMismatch, "explicit and path Mabuchi values disagree at tau " +
                                        std::to_string(p.tau) + ": " + std::to_string(p.mabuchi_a) +
                                        " vs " + std::to_string(p.mabuchi_b));
  return p.mabuchi_a;
}

JAlphaResult j_alpha_twisted(const PathPoint& p) {
  if (!p.l_alpha || !p.gamma) throw Error(Err::MissingAlpha, "J_alpha needs alpha data");
  double c = double(p.dim) / (p.dim + 1) * *p.gamma;
  JAlphaResult r;
  r.j_alpha = *p.l_alpha - c * p.am;
  r.twisted_mabuchi = p.mabuchi_a + r.j_alpha;
  r.d_j_alpha = *p.d_l_alpha - c * p.d_am;
  return r;
}

L1Result l1_norm_path(const ToricTestConfig& cfg, const std::vector<PathPoint>& pts) {
  if (cfg.norm != Normalization::average_zero && !cfg.trivial)
    throw Error(Err::NormalizationRequired, "L1 norm needs the average_zero normalization");
  L1Result r;
  if (pts.empty()) return r;
  r.length = pts.back().length;
  // fit a + c e^{-tau} through the last two samples when they are distinct
  size_t m = pts.size();
  if (m >= 2 && pts[m - 1].tau > pts[m - 2].tau) {
    double t1 = pts[m - 2].tau, t2 = pts[m - 1].tau;
    double f1 = pts[m - 2].l1_density, f2 = pts[m - 1].l1_density;
    double e1 = std::exp(-t1), e2 = std::exp(-t2);
    double c = (f1 - f2) / (e1 - e2);
    r.limit = f2 - c * e2;
  } else {
    r.limit = pts.back().l1_density;
  }
  return r;
}

Rational l1_exact(const ToricTestConfig& cfg) {
  auto pieces = cfg.g.pieces;
  Rational whole = integrate(cfg.base, pieces, Region::interior);
  AffineFn zero;
  zero.gradient = RVec(cfg.base.dim, Rational(0));
  zero.constant = 0;
  pieces.push_back(zero);
  Rational pos = integrate(cfg.base, pieces, Region::interior);
  Rational f = 1;
  for (int i = 2; i <= cfg.base.dim; ++i) f *= i;
  return f * (2 * pos - whole);
}

void write_trace_csv(std::ostream& os, const std::vector<PathPoint>& pts) {
  os << "tau,AM,I,J,L_alpha,M,J_alpha,M_twisted,err_estimate\n";
  auto num = [&](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    os << buf;
  };
  for (auto& p : pts) {
    num(p.tau);
    for (double v : {p.am, p.i_val, p.j_val}) os << ",", num(v);
    os << ",";
    if (p.l_alpha) num(*p.l_alpha);
    os << ",";
    num(p.mabuchi_a);
    os << ",";
    if (p.l_alpha && p.gamma) {
      auto j = j_alpha_twisted(p);
      num(j.j_alpha);
      os << ",";
      num(j.twisted_mabuchi);
    } else {
      os << ",";
    }
    os << ",";
    num(p.err);
    os << "\n";
  }
}

}  // namespace kstab
