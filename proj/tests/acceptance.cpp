// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.
#include "fixtures.hpp"
#include "kstab/errors.hpp"
#include "kstab/invariants.hpp"
#include "kstab/slope_lab.hpp"
#include "kstab/toric.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace fx;

namespace {

ToricTestConfig cfg_of(const Polytope& P, std::vector<AffineFn> p, Normalization m = Normalization::min_zero) {
  return normalize(make_config(P, make_pl(P, p)), m);
}

bool constant_g(const ToricTestConfig& c) {
  for (auto& p : c.g.pieces)
    for (auto& x : p.gradient)
      if (x != 0) return false;
  return true;
}

// slope runs shared by criteria 4 to 7, computed on first use
struct Runs {
  std::map<std::string, std::vector<Verdict>> v;
  const std::vector<Verdict>& get(const std::string& key) {
    auto it = v.find(key);
    if (it != v.end()) return it->second;
    std::vector<Theorem> ths{{TheoremKind::AM}, {TheoremKind::DF}, {TheoremKind::MINNORM}};
    ToricTestConfig c;
    if (key == "interval_affine") c = cfg_of(interval(), {aff({1}, 0)});
    if (key == "interval_pl") c = cfg_of(interval(), {aff({1}, 0), aff({-1}, 1)});
    if (key == "square_affine") c = cfg_of(square(), {aff({1, 0}, 0)});
    return v[key] = verify_theorems(c, ths);
  }
  const Verdict& get(const std::string& key, TheoremKind k) {
    for (auto& x : get(key))
      if (x.kind == k) return x;
    throw std::logic_error("missing verdict");
  }
} runs;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void need(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Outcome c1() {
  Outcome o;
  Rational C1 = calibration_constant(1);
  Provenance pa, pb;
  Rational a = donaldson_futaki(cfg_of(interval(), {aff({1}, 0), aff({-1}, 1)}), pa);
  Rational b = donaldson_futaki(cfg_of(interval(), {aff({0}, 0), aff({2}, -1)}), pb);
  o.need(a == C1 / 2, "max(x,1-x) gives C1/2");
  o.need(b == C1 / 2, "max(0,2x-1) gives C1/2");
  o.need(pa == Provenance::both_agree && pb == Provenance::both_agree, "both_agree provenance");
  o.detail << "C1 = " << to_string(C1) << ", DF = " << to_string(a) << ", " << to_string(b);
  return o;
}

std::vector<ToricTestConfig> random_configs(unsigned seed, int count, std::vector<Polytope> bases) {
  std::mt19937 rng(seed);
  std::vector<ToricTestConfig> out;
  for (int t = 0; t < count; ++t) {
    auto& P = bases[t % bases.size()];
    out.push_back(normalize(make_config(P, random_pl(rng, P, 1 + t % 4)), Normalization::min_zero));
  }
  return out;
}

Outcome c2() {
  Outcome o;
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> num(-40, 40), den(1, 9);
  int bad = 0;
  for (auto& c : random_configs(17, 100, {interval(), square(), simplex(2)})) {
    Rational k(num(rng), den(rng));
    auto moved = add_constant(c, k);
    auto avg = normalize(c, Normalization::average_zero);
    Rational df = donaldson_futaki(c), mn = minimum_norm(c);
    if (donaldson_futaki(moved) != df || minimum_norm(moved) != mn) ++bad;
    if (donaldson_futaki(avg) != df || minimum_norm(avg) != mn) ++bad;
  }
  o.need(bad == 0, "exact invariance");
  o.detail << "100 configs, " << bad << " mismatches";
  return o;
}

Outcome c3() {
  Outcome o;
  int bad_scale = 0, bad_sign = 0;
  for (auto& c : random_configs(33, 100, {interval(), square(), simplex(2)})) {
    Rational df = donaldson_futaki(c), mn = minimum_norm(c);
    for (int d : {2, 3, 5}) {
      auto s = scale_config(c, Rational(d));
      if (donaldson_futaki(s) != d * df || minimum_norm(s) != d * mn) ++bad_scale;
    }
    if (mn < 0 || (mn == 0) != constant_g(c)) ++bad_sign;
  }
  // make sure the zero case is actually exercised
  auto flat = cfg_of(square(), {aff({0, 0}, 3)});
  if (minimum_norm(flat) != 0) ++bad_sign;
  o.need(bad_scale == 0, "homogeneity");
  o.need(bad_sign == 0, "nonnegativity");
  o.detail << "scaling mismatches " << bad_scale << ", sign violations " << bad_sign;
  return o;
}

// largest deviation of the trace from the line through its endpoints, relative to 1 + max |value|
double linearity_defect(const Verdict& v) {
  auto& a = v.trace.front();
  auto& b = v.trace.back();
  double s = (b.value - a.value) / (b.tau - a.tau), dev = 0, scale = 1;
  for (auto& t : v.trace) {
    dev = std::max(dev, std::abs(t.value - (a.value + s * (t.tau - a.tau))));
    scale = std::max(scale, 1 + std::abs(t.value));
  }
  return dev / scale;
}

Outcome c4() {
  Outcome o;
  for (const char* k : {"interval_affine", "square_affine"}) {
    auto& v = runs.get(k, TheoremKind::AM);
    double ex = to_double(v.exact), err = std::abs(v.slope.value - ex), lin = linearity_defect(v);
    o.need(err <= 1e-3 * (1 + std::abs(ex)), std::string(k) + " slope");
    o.need(lin <= 1e-8, std::string(k) + " linearity");
    o.detail << k << ": slope " << v.slope.value << " exact " << to_string(v.exact) << " linearity " << lin << "; ";
  }
  return o;
}

Outcome c5() {
  Outcome o;
  auto& a = runs.get("interval_affine", TheoremKind::DF);
  o.need(std::abs(a.slope.value) <= 1e-3 && a.exact == 0, "(a) both sides 0");
  auto& b = runs.get("interval_pl", TheoremKind::DF);
  double eb = to_double(b.exact);
  o.need(std::abs(b.slope.value - eb) <= 3e-2 * (1 + std::abs(eb)), "(b) PL tier");
  auto& c = runs.get("square_affine", TheoremKind::DF);
  double ec = to_double(c.exact);
  o.need(std::abs(c.slope.value - ec) <= 1e-2 * (1 + std::abs(ec)), "(c) square");
  o.detail << "(a) " << a.slope.value << " vs " << to_string(a.exact) << "; (b) " << b.slope.value << " vs "
           << to_string(b.exact) << "; (c) " << c.slope.value << " vs " << to_string(c.exact);
  return o;
}

Outcome c6() {
  Outcome o;
  for (const char* k : {"interval_affine", "interval_pl", "square_affine"}) {
    auto& v = runs.get(k, TheoremKind::MINNORM);
    double ex = to_double(v.exact), tol = v.certified ? 1e-2 : 3e-2;
    o.need(std::abs(v.slope.value - ex) <= tol * (1 + std::abs(ex)), k);
    o.detail << k << ": " << v.slope.value << " vs " << to_string(v.exact) << "; ";
  }
  return o;
}

Outcome c7() {
  Outcome o;
  int states = 0, bad = 0;
  double worst = 0;
  for (auto& [key, vs] : runs.v)
    for (auto& v : vs)
      for (auto& p : v.states) {
        ++states;
        double n = p.dim, d = p.i_val - p.j_val;
        double slack = std::min({p.j_val, p.i_val, d - p.j_val / n, n * p.j_val - d});
        worst = std::min(worst, slack);
        if (slack < -1e-9) ++bad;
      }
  o.need(states > 0, "states evaluated");
  o.need(bad == 0, "sandwich");
  o.detail << states << " states, most negative slack " << worst;
  return o;
}

Outcome c8() {
  Outcome o;
  auto c = cfg_of(interval(), {aff({1}, 0)});
  auto v0 = verify_theorem(c, {TheoremKind::POINT, {R(0)}, {}});
  auto v1 = verify_theorem(c, {TheoremKind::POINT, {R(1)}, {}});
  for (auto* v : {&v0, &v1}) {
    double ex = to_double(v->exact);
    o.need(std::abs(v->slope.value - ex) <= 1e-3, "vertex value");
    o.detail << v->slope.value << " vs " << to_string(v->exact) << "; ";
  }
  o.need(v0.slope.value * v1.slope.value < 0, "opposite signs");
  return o;
}

Outcome c9() {
  Outcome o;
  RVec eps{R(1, 100), R(1, 50), R(1, 25), R(1, 10)};
  int zero = 0, total = 0;
  for (auto& c : random_configs(9, 12, {interval()}))
    for (auto& v : c.base.vertices) {
      ++total;
      if (blowup_expansion(c, v, eps).coefficient == 0) ++zero;
    }
  o.need(zero == total, "n = 1 coefficient vanishes");
  auto s = cfg_of(simplex(2), {aff({1, 0}, 0)});
  RVec v{R(1), R(0)};
  auto b = blowup_expansion(s, v, eps);
  Rational ch = chow_weight(s, v);
  o.need(b.coefficient == -2 * ch, "n = 2 coefficient is -2 Ch_v");
  o.detail << "n=1: " << zero << "/" << total << " zero; n=2: coefficient " << to_string(b.coefficient)
           << ", Ch_v " << to_string(ch);
  return o;
}

Outcome c10() {
  Outcome o;
  int bad = 0, positive = 0;
  for (auto& c : random_configs(10, 50, {interval(), square(), simplex(2), simplex(3)})) {
    auto r = scan_vertices(c);
    bool mn = minimum_norm(c) > 0;
    positive += r.destabilizing;
    if (r.destabilizing != mn) ++bad;
  }
  o.need(bad == 0, "dichotomy");
  o.detail << "50 configs, " << positive << " destabilized, " << bad << " disagreements";
  return o;
}

Outcome c11() {
  Outcome o;
  auto c = cfg_of(interval(), {aff({1}, 0)});
  Polytope Pa = from_vertices(1, {{R(0)}, {R(2)}});
  auto v = verify_theorem(c, {TheoremKind::JALPHA, {}, Pa});
  double ex = to_double(v.exact);
  o.need(std::abs(v.slope.value - ex) <= 1e-2 * (1 + std::abs(ex)), "J_alpha slope");
  int bad = 0;
  auto tw = twisted_weights(c, Pa);
  if (tw.twisted_df != donaldson_futaki(c) + tw.j_weight) ++bad;
  for (auto& r : random_configs(11, 9, {interval()})) {
    auto t = twisted_weights(r, Pa);
    if (t.twisted_df != donaldson_futaki(r) + t.j_weight) ++bad;
  }
  o.need(bad == 0, "twisted DF = DF + J");
  o.detail << "slope " << v.slope.value << " vs " << to_string(v.exact) << "; twisted identity misses " << bad;
  return o;
}

Outcome c12() {
  Outcome o;
  auto u = guillemin_potential(interval());
  RayPotential r{&u, nullptr, 0};
  double dev = 0;
  for (double x : {1e-6, 0.01, 0.2, 0.5, 0.77, 0.999}) {
    auto p = moment_point(u, &x);
    dev = std::max(dev, std::abs(abreu_raw(r, p) - 4));
  }
  o.need(dev <= 4e-9, "interval Abreu expression 4");
  double k = curvature_kappa(), worst = 0;
  for (auto P : {interval(), square(), simplex(2)}) {
    double want = P.dim * to_double(slope_mu(P));
    worst = std::max(worst, std::abs(calibration_mean(P, 16, k) - want) / want);
  }
  o.need(worst <= 1e-6, "mean S = n mu");
  o.detail << "Abreu deviation " << dev << ", kappa " << k << ", worst relative mean error " << worst;
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit;  // seconds
    std::function<Outcome()> run;
  };
  std::vector<Criterion> cs{
      {1, "exact DF regression", 1, c1},
      {2, "normalization invariance", 10, c2},
      {3, "homogeneity and nonnegativity", 30, c3},
      {4, "AM slope", 60, c4},
      {5, "DF slope", 300, c5},
      {6, "minimum-norm slope", 300, c6},
      {7, "I/J sandwich", 1e300, c7},
      {8, "vertex point identity", 60, c8},
      {9, "blowup expansion", 10, c9},
      {10, "destabilizer dichotomy", 30, c10},
      {11, "J-flow slope", 120, c11},
      {12, "curvature calibration", 10, c12},
  };
  int failed = 0;
  for (auto& c : cs) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit) o.need(false, "runtime");
    failed += !o.pass;
    std::printf("%s %2d %-30s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", (int)cs.size() - failed, cs.size());
  return failed ? 1 : 0;
}
