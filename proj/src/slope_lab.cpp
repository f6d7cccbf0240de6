#include "kstab/slope_lab.hpp"
#include "kstab/errors.hpp"
#include "kstab/invariants.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace kstab {

const char* model_name(SlopeModel m) { return m == SlopeModel::exp_fit ? "exp_fit" : "window_diff"; }

const char* theorem_name(TheoremKind k) {
  switch (k) {
    case TheoremKind::AM: return "AM";
    case TheoremKind::DF: return "DF";
    case TheoremKind::MINNORM: return "MINNORM";
    case TheoremKind::JALPHA: return "JALPHA";
    default: return "POINT";
  }
}

SlopeEstimate estimate_limit_slope(const std::vector<TracePoint>& tr) {
  if (tr.size() < 6) throw Error(Err::InsufficientSamples, "slope estimate needs at least 6 samples");
  for (size_t i = 1; i < tr.size(); ++i)
    if (!(tr[i].tau > tr[i - 1].tau))
      throw Error(Err::NonMonotoneTau, "trace tau must be strictly increasing");
  if (tr.back().tau < 8) throw Error(Err::InsufficientSamples, "slope estimate needs tau_max >= 8");
  constexpr int K = 4;
  size_t m = tr.size(), lo = m - 1 - K;
  SlopeEstimate e;
  e.tau_max = tr.back().tau;
  e.samples_used = K + 1;
  e.window = (tr[m - 1].value - tr[lo].value) / (tr[m - 1].tau - tr[lo].tau);
  // shift tau so the decaying column is O(1) on the window
  double t0 = tr[lo].tau;
  Eigen::MatrixXd A(K + 1, 3);
  Eigen::VectorXd b(K + 1);
  for (int i = 0; i <= K; ++i) {
    double t = tr[lo + i].tau;
    A(i, 0) = 1;
    A(i, 1) = t - t0;
    A(i, 2) = std::exp(-(t - t0));
    b[i] = tr[lo + i].value;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-12);
  if (qr.rank() == 3) {
    Eigen::VectorXd x = qr.solve(b);
    e.value = x[1];
    e.model = SlopeModel::exp_fit;
  } else {
    e.value = e.window;
    e.model = SlopeModel::window_diff;
  }
  e.residual = std::abs(e.window - e.value);
  return e;
}

double default_tolerance(TheoremKind k, bool certified) {
  if (!certified) return 3e-2;
  return k == TheoremKind::AM || k == TheoremKind::POINT ? 1e-3 : 1e-2;
}

namespace {

// only u0 and g_beta are used: a one-node box
RayContext bare_context(const ToricTestConfig& cfg, double tau, double beta) {
  BoxOptions o;
  o.quad_order = 1;
  o.margin = 0;
  o.panel = o.layer = 1e300;
  o.max_nodes = 1;
  return make_ray_context(cfg, tau, beta, o, Exec::serial);
}

Vec far_point(const SymplecticPotential& u, const RVec& v, double R) {
  Vec vd(u.n);
  for (int k = 0; k < u.n; ++k) vd[k] = to_double(v[k]);
  for (auto& ch : u.charts)
    if ((ch.v - vd).norm() < 1e-12) {
      Vec d = Vec::Zero(u.n);
      for (int f : ch.facets) d += u.normals[f];
      return R * d;
    }
  throw Error(Err::NotAVertex, "POINT theorem needs a vertex of P");
}

struct PathCache {
  const ToricTestConfig* cfg;
  std::optional<Polytope> alpha;
  std::vector<PathPoint> pts;
};

bool same_alpha(const std::optional<Polytope>& a, const std::optional<Polytope>& b) {
  if (!a || !b) return !a && !b;
  return a->vertices == b->vertices;
}

}  // namespace

std::vector<PathPoint> schedule_paths(const ToricTestConfig& cfg, const std::optional<Polytope>& alpha,
                                 const Schedule& sch) {
  std::optional<AlphaData> ad;
  if (alpha) ad = alpha_data(cfg, *alpha);
  const AlphaData* ap = ad ? &*ad : nullptr;
  bool affine = cfg.g.pieces.size() == 1;
  double tmax = sch.taus.empty() ? 0 : sch.taus.back();
  if (affine) {
    RayContext ctx = make_ray_context(cfg, tmax, sch.beta0 * std::max(tmax, 1.0), sch.box, sch.path.exec);
    return evaluate_path(ctx, sch.taus, ap, sch.path);
  }
  // one path per target: the smoothing beta0 * tau is fixed along each
  std::vector<PathPoint> out;
  for (double t : sch.taus) {
    if (t <= 0) {
      RayContext ctx = make_ray_context(cfg, 0, sch.beta0, sch.box, sch.path.exec);
      out.push_back(evaluate_path(ctx, {0.0}, ap, sch.path)[0]);
      continue;
    }
    RayContext ctx = make_ray_context(cfg, t, sch.beta0 * t, sch.box, sch.path.exec);
    out.push_back(evaluate_path(ctx, {t}, ap, sch.path)[0]);
  }
  return out;
}

std::vector<Verdict> verify_theorems(const ToricTestConfig& cfg, const std::vector<Theorem>& ths,
                                     const Schedule& sch) {
  bool certified = cfg.g.pieces.size() == 1;
  ToricTestConfig minz = normalize(cfg, Normalization::min_zero);
  ToricTestConfig avgz = normalize(cfg, Normalization::average_zero);
  // JALPHA rides on the min_zero paths when its alpha is the first one requested
  std::optional<Polytope> alpha;
  for (auto& t : ths)
    if (t.kind == TheoremKind::JALPHA) {
      if (!t.alpha) throw Error(Err::MissingAlpha, "JALPHA needs an alpha polytope");
      if (!alpha) alpha = t.alpha;
    }
  std::vector<PathCache> cache;
  auto paths = [&](const ToricTestConfig& c, const std::optional<Polytope>& a) -> const std::vector<PathPoint>& {
    for (auto& pc : cache)
      if (pc.cfg == &c && (same_alpha(pc.alpha, a) || (!a && pc.alpha))) return pc.pts;
    cache.push_back({&c, a, schedule_paths(c, a, sch)});
    return cache.back().pts;
  };
  // compute the min_zero group with alpha up front so DF and MINNORM reuse it
  for (auto& t : ths)
    if (t.kind != TheoremKind::AM && t.kind != TheoremKind::POINT) {
      paths(minz, alpha);
      break;
    }

  std::vector<Verdict> out;
  for (auto& th : ths) {
    Verdict v;
    v.kind = th.kind;
    v.theorem = theorem_name(th.kind);
    v.certified = certified;
    v.tol = sch.tol ? *sch.tol : default_tolerance(th.kind, certified);
    Provenance prov;
    switch (th.kind) {
      case TheoremKind::AM: {
        v.normalization = cfg.norm;
        v.exact = am_top(cfg, prov);
        bool same = cfg.shift == minz.shift && cfg.g.pieces == minz.g.pieces;
        v.states = paths(same ? minz : cfg, std::nullopt);
        for (auto& p : v.states) v.trace.push_back({p.tau, p.am, p.err, p.d_am});
        break;
      }
      case TheoremKind::DF: {
        v.normalization = Normalization::min_zero;
        v.exact = donaldson_futaki(minz);
        v.states = paths(minz, alpha);
        for (auto& p : v.states) v.trace.push_back({p.tau, mabuchi(p), p.err, p.d_mabuchi});
        break;
      }
      case TheoremKind::MINNORM: {
        v.normalization = Normalization::min_zero;
        v.exact = minimum_norm(minz);
        v.states = paths(minz, alpha);
        for (auto& p : v.states) v.trace.push_back({p.tau, p.j_val, p.err, p.d_j});
        break;
      }
      case TheoremKind::JALPHA: {
        if (!th.alpha) throw Error(Err::MissingAlpha, "JALPHA needs an alpha polytope");
        v.normalization = Normalization::min_zero;
        v.exact = twisted_weights(minz, *th.alpha).j_weight;
        v.states = paths(minz, th.alpha);
        for (auto& p : v.states) {
          auto j = j_alpha_twisted(p);
          v.trace.push_back({p.tau, j.j_alpha, p.err, j.d_j_alpha});
        }
        break;
      }
      case TheoremKind::POINT: {
        v.normalization = Normalization::average_zero;
        v.exact = -chow_weight(avgz, th.vertex);
        for (double t : sch.taus) {
          RayContext ctx = bare_context(avgz, t, sch.beta0 * std::max(t, 1.0));
          Vec xi = far_point(ctx.u0, th.vertex, sch.point_radius);
          v.trace.push_back({t, phi_at(ctx, t, xi), 0, phi_dot_at(ctx, t, xi)});
        }
        break;
      }
    }
    v.slope = estimate_limit_slope(v.trace);
    double ex = to_double(v.exact);
    v.pass = std::abs(v.slope.value - ex) <= v.tol * (1 + std::abs(ex));
    out.push_back(std::move(v));
  }
  return out;
}

Verdict verify_theorem(const ToricTestConfig& cfg, const Theorem& th, const Schedule& sch) {
  return verify_theorems(cfg, {th}, sch)[0];
}

json verdict_json(const Verdict& v) {
  json j;
  j["theorem"] = v.theorem;
  j["exact"] = rational_json(v.exact);
  j["decimal"] = to_double(v.exact);
  j["slope"] = v.slope.value;
  j["residual"] = v.slope.residual;
  j["tol"] = v.tol;
  j["pass"] = v.pass;
  j["tier"] = v.certified ? "certified" : "experimental";
  j["model"] = model_name(v.slope.model);
  j["window_slope"] = v.slope.window;
  j["normalization"] = norm_name(v.normalization);
  json tr = json::array();
  for (auto& t : v.trace) tr.push_back({{"tau", t.tau}, {"value", t.value}, {"rate", t.rate}, {"err", t.err}});
  j["trace"] = tr;
  return j;
}

DestabilizerReport scan_vertices(const ToricTestConfig& cfg) {
  DestabilizerReport r;
  std::optional<Rational> best;
  for (size_t i = 0; i < cfg.base.vertices.size(); ++i) {
    Rational c = chow_weight(cfg, cfg.base.vertices[i]);
    r.values.push_back(to_double(c));
    if (!best || c > *best) {
      best = c;
      r.index = (int)i;
    }
  }
  if (best) {
    r.exact = *best;
    r.value = to_double(*best);
    r.destabilizing = *best > 0;
    r.point = to_doubles(cfg.base.vertices[r.index]);
  }
  return r;
}

DestabilizerReport scan_points(const ToricTestConfig& cfg, const std::vector<std::vector<double>>& pts,
                               const Schedule& sch) {
  ToricTestConfig c = normalize(cfg, Normalization::average_zero);
  double t = sch.taus.empty() ? 12 : sch.taus.back();
  RayContext ctx = bare_context(c, t, sch.beta0 * t);
  DestabilizerReport r;
  for (size_t i = 0; i < pts.size(); ++i) {
    if ((int)pts[i].size() != ctx.u0.n) throw Error(Err::DimensionMismatch, "scan point dimension");
    Vec xi = ctx.u0.gradient(pts[i].data());
    double ch = -phi_dot_at(ctx, t, xi);
    r.values.push_back(ch);
    if (r.index < 0 || ch > r.value) {
      r.value = ch;
      r.index = (int)i;
    }
  }
  if (r.index >= 0) {
    r.point = pts[r.index];
    r.destabilizing = r.value > 1e-9;
  }
  return r;
}

json destabilizer_json(const DestabilizerReport& r) {
  json j;
  j["destabilizing"] = r.destabilizing;
  j["value"] = r.value;
  if (r.exact) j["exact"] = rational_json(*r.exact);
  j["index"] = r.index;
  j["point"] = r.point;
  j["values"] = r.values;
  return j;
}

}  // namespace kstab
