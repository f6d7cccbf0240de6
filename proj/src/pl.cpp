#include "kstab/pl.hpp"
#include "kstab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace kstab {

const char* norm_name(Normalization n) {
  switch (n) {
    case Normalization::raw: return "raw";
    case Normalization::min_zero: return "min_zero";
    case Normalization::average_zero: return "average_zero";
  }
  return "raw";
}

Rational PLConvexFn::operator()(const RVec& x) const {
  Rational m = pieces[0](x);
  for (size_t i = 1; i < pieces.size(); ++i) m = std::max(m, pieces[i](x));
  return m;
}

double PLConvexFn::eval(const double* x) const {
  double m = pieces[0].eval(x);
  for (size_t i = 1; i < pieces.size(); ++i) m = std::max(m, pieces[i].eval(x));
  return m;
}

namespace {

std::vector<Halfspace> region_halfspaces(const Polytope& P, const std::vector<AffineFn>& pieces,
                                         size_t i, bool& empty) {
  std::vector<Halfspace> hs = P.halfspaces;
  empty = false;
  for (size_t j = 0; j < pieces.size(); ++j) {
    if (j == i) continue;
    RVec nrm = sub(pieces[j].gradient, pieces[i].gradient);
    Rational off = pieces[i].constant - pieces[j].constant;
    if (std::all_of(nrm.begin(), nrm.end(), [](const Rational& r) { return r == 0; })) {
      if (off <= 0) empty = true;  // parallel piece at least as high everywhere
      continue;
    }
    hs.push_back({nrm, off});
  }
  return hs;
}

std::optional<Polytope> region(const Polytope& P, const std::vector<AffineFn>& pieces, size_t i) {
  bool empty;
  auto hs = region_halfspaces(P, pieces, i, empty);
  if (empty) return std::nullopt;
  try {
    return from_halfspaces(P.dim, hs);
  } catch (const Error& e) {
    if (e.code() == Err::DegenerateInput) return std::nullopt;
    throw;
  }
}

}  // namespace

std::optional<Polytope> linearity_region(const Polytope& P, const std::vector<AffineFn>& pieces,
                                         size_t i) {
  return region(P, pieces, i);
}

namespace {

void check_dims(const Polytope& P, const std::vector<AffineFn>& pieces) {
  if (pieces.empty()) throw Error(Err::NotConvex, "no pieces");
  for (auto& p : pieces)
    if ((int)p.gradient.size() != P.dim) throw Error(Err::DomainMismatch, "piece dimension");
}

}  // namespace

Rational PLConvexFn::min_value() const {
  // the minimum of a max of affine functions sits at a vertex of some linearity region
  bool have = false;
  Rational m = 0;
  for (size_t i = 0; i < pieces.size(); ++i) {
    auto R = region(domain, pieces, i);
    if (!R) continue;
    for (auto& v : R->vertices) {
      Rational val = (*this)(v);
      if (!have || val < m) { m = val; have = true; }
    }
  }
  return m;
}

Rational PLConvexFn::max_value() const {
  Rational m = (*this)(domain.vertices[0]);
  for (auto& v : domain.vertices) m = std::max(m, (*this)(v));
  return m;
}

Rational PLConvexFn::average() const {
  return integrate(domain, pieces, Region::interior) / volume(domain);
}

PLConvexFn make_pl(const Polytope& P, std::vector<AffineFn> pieces) {
  check_dims(P, pieces);
  for (size_t i = 0; i < pieces.size(); ++i)
    for (size_t j = i + 1; j < pieces.size(); ++j)
      if (pieces[i] == pieces[j]) throw Error(Err::NotConvex, "duplicate piece");
  for (size_t i = 0; i < pieces.size(); ++i)
    if (!region(P, pieces, i))
      throw Error(Err::NotConvex, "piece " + std::to_string(i) + " never attains the max on an open set");
  return PLConvexFn{pieces, P};
}

PLConvexFn make_pl_pruned(const Polytope& P, std::vector<AffineFn> pieces) {
  check_dims(P, pieces);
  std::vector<AffineFn> u;
  for (auto& p : pieces)
    if (std::find(u.begin(), u.end(), p) == u.end()) u.push_back(p);
  std::vector<AffineFn> keep;
  for (size_t i = 0; i < u.size(); ++i)
    if (region(P, u, i)) keep.push_back(u[i]);
  return PLConvexFn{keep, P};
}

ToricTestConfig make_config(const Polytope& P, const PLConvexFn& g, std::optional<Rational> shift) {
  auto pl = make_pl(P, g.pieces);
  Rational mx = pl.max_value();
  Rational c = shift ? *shift : mx + 1;
  if (c <= mx) throw Error(Err::ShiftTooSmall, "shift must exceed max g = " + to_string(mx));
  int n = P.dim;
  std::vector<Halfspace> hs;
  for (auto& h : P.halfspaces) {
    RVec nn = h.normal;
    nn.push_back(0);
    hs.push_back({nn, h.offset});
  }
  RVec down(n + 1, 0);
  down[n] = -1;
  hs.push_back({down, 0});
  for (auto& p : pl.pieces) {
    RVec nn = p.gradient;
    nn.push_back(1);
    hs.push_back({nn, c - p.constant});
  }
  ToricTestConfig cfg;
  cfg.base = P;
  cfg.g = pl;
  cfg.shift = c;
  cfg.cayley = from_halfspaces(n + 1, hs);
  cfg.trivial = pl.pieces.size() == 1 &&
                std::all_of(pl.pieces[0].gradient.begin(), pl.pieces[0].gradient.end(),
                            [](const Rational& r) { return r == 0; });
  return cfg;
}

ToricTestConfig add_constant(const ToricTestConfig& cfg, const Rational& c) {
  ToricTestConfig out = cfg;
  for (auto& p : out.g.pieces) p.constant += c;
  out.shift += c;
  return out;
}

ToricTestConfig normalize(const ToricTestConfig& cfg, Normalization mode) {
  if (mode == Normalization::raw) {
    auto out = cfg;
    out.norm = mode;
    return out;
  }
  Rational m = mode == Normalization::min_zero ? cfg.g.min_value() : cfg.g.average();
  auto out = add_constant(cfg, -m);
  out.norm = mode;
  return out;
}

ToricTestConfig scale_config(const ToricTestConfig& cfg, const Rational& d) {
  PLConvexFn g = cfg.g;
  for (auto& p : g.pieces) {
    p.gradient = scale(p.gradient, d);
    p.constant *= d;
  }
  auto out = make_config(cfg.base, g);
  return normalize(out, cfg.norm);
}

double smooth_eval(const PLConvexFn& g, const double* x, double beta) {
  double m = -1e300;
  std::vector<double> v(g.pieces.size());
  for (size_t i = 0; i < v.size(); ++i) {
    v[i] = g.pieces[i].eval(x);
    m = std::max(m, v[i]);
  }
  if (v.size() == 1) return v[0];
  double s = 0;
  for (double t : v) s += std::exp(beta * (t - m));
  return m + std::log(s) / beta;
}

void smooth_eval_d2(const PLConvexFn& g, const double* x, double beta, double& val, double* grad,
                    double* hess) {
  int n = g.dim();
  size_t k = g.pieces.size();
  std::vector<double> v(k), w(k);
  double m = -1e300;
  for (size_t i = 0; i < k; ++i) {
    v[i] = g.pieces[i].eval(x);
    m = std::max(m, v[i]);
  }
  double s = 0;
  for (size_t i = 0; i < k; ++i) {
    w[i] = std::exp(beta * (v[i] - m));
    s += w[i];
  }
  for (auto& t : w) t /= s;
  val = k == 1 ? v[0] : m + std::log(s) / beta;
  std::vector<double> abar(n, 0);
  for (size_t i = 0; i < k; ++i)
    for (int a = 0; a < n; ++a) abar[a] += w[i] * to_double(g.pieces[i].gradient[a]);
  for (int a = 0; a < n; ++a) grad[a] = abar[a];
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double c = 0;
      if (k > 1)
        for (size_t i = 0; i < k; ++i)
          c += w[i] * (to_double(g.pieces[i].gradient[a]) - abar[a]) *
               (to_double(g.pieces[i].gradient[b]) - abar[b]);
      hess[a * n + b] = beta * c;
    }
}

}  // namespace kstab
