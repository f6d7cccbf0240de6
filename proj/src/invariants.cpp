#include "kstab/invariants.hpp"
#include "kstab/errors.hpp"

#include <map>
#include <mutex>

namespace kstab {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::boundary_formula: return "boundary_formula";
    case Provenance::mixed_volume: return "mixed_volume";
    case Provenance::both_agree: return "both_agree";
  }
  return "boundary_formula";
}

namespace {

Rational factorial(int n) {
  Rational f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

Rational sigma_ratio(const Polytope& P) {
  auto vd = volume_data(P);
  return vd.boundary_sigma_volume / vd.volume;
}

void require_normalized(const ToricTestConfig& cfg) {
  if (cfg.norm == Normalization::raw)
    throw Error(Err::NotNormalized, "normalize the configuration first");
}

}  // namespace

Rational slope_mu(const Polytope& P) {
  if (!P.delzant) throw Error(Err::NonDelzant, "slope needs a Delzant polytope");
  return sigma_ratio(P) / P.dim;
}

Rational boundary_functional(const Polytope& P, const std::vector<AffineFn>& g) {
  return integrate(P, g, Region::boundary) - sigma_ratio(P) * integrate(P, g, Region::interior);
}

Rational df_cayley(const ToricTestConfig& cfg) {
  const Polytope& Q = cfg.cayley;
  int n = cfg.base.dim;
  Rational volP = volume(cfg.base);
  Rational mu = sigma_ratio(cfg.base) / n;
  Rational bdry = 0;
  for (size_t f = 0; f < Q.facets.size(); ++f) {
    RVec nu = Q.halfspaces[Q.facets[f].halfspace].normal;
    if (nu[n] > 0) nu = scale(nu, 1 / nu[n]);
    bdry += facet_measure(Q, (int)f, nu);
  }
  return Rational(n, n + 1) * mu * factorial(n + 1) * volume(Q) - factorial(n) * (bdry - 2 * volP);
}

Rational calibration_constant(int n) {
  static std::mutex mu;
  static std::map<int, Rational> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<Halfspace> hs;
  for (int i = 0; i < n; ++i) {
    RVec a(n, 0), b(n, 0);
    a[i] = -1;
    b[i] = 1;
    hs.push_back({a, 0});
    hs.push_back({b, 1});
  }
  Polytope cube = from_halfspaces(n, hs);
  AffineFn up, down;
  up.gradient.assign(n, 0);
  up.gradient[0] = 1;
  up.constant = 0;
  down.gradient.assign(n, 0);
  down.gradient[0] = -1;
  down.constant = 1;
  auto cfg = make_config(cube, make_pl(cube, {up, down}));
  Rational c = df_cayley(cfg) / boundary_functional(cube, cfg.g.pieces);
  cache[n] = c;
  return c;
}

Rational donaldson_futaki(const ToricTestConfig& cfg, Provenance& prov) {
  require_normalized(cfg);
  Rational b = calibration_constant(cfg.base.dim) * boundary_functional(cfg.base, cfg.g.pieces);
  prov = b == df_cayley(cfg) ? Provenance::both_agree : Provenance::boundary_formula;
  return b;
}

Rational donaldson_futaki(const ToricTestConfig& cfg) {
  Provenance p;
  return donaldson_futaki(cfg, p);
}

Rational minimum_norm(const ToricTestConfig& cfg, Provenance& prov) {
  require_normalized(cfg);
  int n = cfg.base.dim;
  std::vector<std::vector<RVec>> bodies{cfg.cayley.vertices};
  for (int i = 0; i < n; ++i) bodies.push_back(embed_flat(cfg.base.vertices));
  Rational mv = factorial(n + 1) * mixed_volume(bodies, n + 1) - factorial(n) * volume(cfg.cayley);
  Rational closed = factorial(n) * (integrate(cfg.base, cfg.g.pieces, Region::interior) -
                                    volume(cfg.base) * cfg.g.min_value());
  prov = mv == closed ? Provenance::both_agree : Provenance::mixed_volume;
  return mv;
}

Rational minimum_norm(const ToricTestConfig& cfg) {
  Provenance p;
  return minimum_norm(cfg, p);
}

Rational am_top(const ToricTestConfig& cfg, Provenance& prov) {
  int n = cfg.base.dim;
  Rational q = factorial(n + 1) * (volume(cfg.cayley) - cfg.shift * volume(cfg.base));
  Rational b = -factorial(n + 1) * integrate(cfg.base, cfg.g.pieces, Region::interior);
  prov = q == b ? Provenance::both_agree : Provenance::mixed_volume;
  return q;
}

Rational chow_weight(const ToricTestConfig& cfg, const RVec& v) {
  if (cfg.base.find_vertex(v) < 0) throw Error(Err::NotAVertex, "Chow weight needs a vertex");
  return cfg.g(v) - cfg.g.average();
}

TwistedWeights twisted_weights(const ToricTestConfig& cfg, const Polytope& Pa) {
  int n = cfg.base.dim;
  if (Pa.dim != n) throw Error(Err::DimensionMismatch, "alpha polytope dimension");
  TwistedWeights t;
  std::vector<std::vector<RVec>> b1{Pa.vertices};
  for (int i = 1; i < n; ++i) b1.push_back(cfg.base.vertices);
  t.gamma = mixed_volume(b1, n) / volume(cfg.base);
  std::vector<std::vector<RVec>> b2;
  for (int i = 0; i < n; ++i) b2.push_back(cfg.cayley.vertices);
  b2.push_back(embed_flat(Pa.vertices));
  t.j_weight = factorial(n + 1) * mixed_volume(b2, n + 1) -
               Rational(n, n + 1) * t.gamma * factorial(n + 1) * volume(cfg.cayley);
  t.twisted_df = donaldson_futaki(cfg) + t.j_weight;
  return t;
}

BlowupSeries blowup_expansion(const ToricTestConfig& cfg, const RVec& v, const RVec& epsilons) {
  int n = cfg.base.dim;
  BlowupSeries s;
  s.chow = chow_weight(cfg, v);
  s.predicted = -Rational(n * (n - 1)) * s.chow;
  Rational cn = calibration_constant(n);
  Rational vol0 = volume(cfg.base);
  RVec xs{0}, ys;
  ys.push_back(cn * boundary_functional(cfg.base, cfg.g.pieces));
  for (auto& e : epsilons) {
    Polytope Pe = corner_chop(cfg.base, v, e);
    auto ge = make_pl_pruned(Pe, cfg.g.pieces);
    Rational d = cn * boundary_functional(Pe, ge.pieces);
    s.epsilons.push_back(e);
    s.df.push_back(d);
    if (e == 0) continue;
    if (std::find(xs.begin(), xs.end(), e) != xs.end()) continue;
    xs.push_back(e);
    ys.push_back(d * volume(Pe) / vol0);
  }
  if ((int)xs.size() < 2 * n + 1)
    throw Error(Err::InsufficientSamples,
                "blowup expansion needs " + std::to_string(2 * n) + " distinct positive epsilons");
  s.poly = interpolate(xs, ys);
  s.coefficient = n == 1 ? Rational(0) : s.poly[n - 1];
  // nodes beyond the degree bound must be reproduced exactly
  for (size_t i = 2 * n + 1; i < s.poly.size(); ++i)
    if (s.poly[i] != 0) throw Error(Err::InconsistentInput, "chopped DF is not polynomial on these epsilons");
  s.match = s.coefficient == s.predicted;
  return s;
}

InvariantReport invariant_report(const ToricTestConfig& cfg) {
  InvariantReport r;
  r.normalization_note = cfg.norm;
  r.c_n = calibration_constant(cfg.base.dim);
  r.df = donaldson_futaki(cfg, r.df_provenance);
  r.minimum_norm = minimum_norm(cfg, r.minimum_norm_provenance);
  r.slope_mu = slope_mu(cfg.base);
  r.am_top = am_top(cfg, r.am_top_provenance);
  return r;
}

namespace {

json rat_with_decimal(const Rational& r) {
  json j;
  j["exact"] = to_string(r);
  j["decimal"] = to_double(r);
  return j;
}

}  // namespace

json report_json(const InvariantReport& r) {
  json j;
  j["convention"] = "convex g, f = shift - g";
  j["normalization_note"] = norm_name(r.normalization_note);
  j["c_n"] = rat_with_decimal(r.c_n);
  j["df"] = to_string(r.df);
  j["minimum_norm"] = to_string(r.minimum_norm);
  j["slope_mu"] = to_string(r.slope_mu);
  j["am_top"] = to_string(r.am_top);
  j["decimal"] = {{"df", to_double(r.df)},
                  {"minimum_norm", to_double(r.minimum_norm)},
                  {"slope_mu", to_double(r.slope_mu)},
                  {"am_top", to_double(r.am_top)}};
  j["provenance"] = {{"df", provenance_name(r.df_provenance)},
                     {"minimum_norm", provenance_name(r.minimum_norm_provenance)},
                     {"slope_mu", provenance_name(r.slope_mu_provenance)},
                     {"am_top", provenance_name(r.am_top_provenance)}};
  return j;
}

json blowup_json(const BlowupSeries& s) {
  json j;
  j["epsilons"] = rvec_json(s.epsilons);
  j["df"] = rvec_json(s.df);
  j["poly"] = rvec_json(s.poly);
  j["coefficient"] = rat_with_decimal(s.coefficient);
  j["predicted"] = rat_with_decimal(s.predicted);
  j["chow_weight"] = to_string(s.chow);
  j["match"] = s.match;
  return j;
}

json twisted_json(const TwistedWeights& t) {
  json j;
  j["gamma"] = to_string(t.gamma);
  j["j_weight"] = to_string(t.j_weight);
  j["twisted_df"] = to_string(t.twisted_df);
  return j;
}

}  // namespace kstab
