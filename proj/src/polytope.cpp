#include "kstab/polytope.hpp"
#include "kstab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace kstab {

double AffineFn::eval(const double* x) const {
  double s = to_double(constant);
  for (size_t i = 0; i < gradient.size(); ++i) s += to_double(gradient[i]) * x[i];
  return s;
}

int Polytope::find_vertex(const RVec& v) const {
  for (size_t i = 0; i < vertices.size(); ++i)
    if (vertices[i] == v) return (int)i;
  return -1;
}

bool Polytope::contains(const RVec& x) const {
  for (auto& h : halfspaces)
    if (dot(h.normal, x) > h.offset) return false;
  return true;
}

namespace {

bool lex_less(const RVec& a, const RVec& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

void dedupe_points(std::vector<RVec>& pts) {
  std::sort(pts.begin(), pts.end(), lex_less);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
}

int affine_rank(const std::vector<RVec>& pts, const std::vector<int>& idx) {
  if (idx.size() <= 1) return 0;
  RMat m;
  for (size_t i = 1; i < idx.size(); ++i) m.push_back(sub(pts[idx[i]], pts[idx[0]]));
  return rank(m);
}

int affine_rank(const std::vector<RVec>& pts) {
  std::vector<int> idx(pts.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = (int)i;
  return affine_rank(pts, idx);
}

// scale to a primitive normal, keeping the halfspace
bool normalize_halfspace(Halfspace& h) {
  RVec p = primitive(h.normal);
  for (size_t i = 0; i < p.size(); ++i) {
    if (h.normal[i] != 0) {
      Rational s = p[i] / h.normal[i];
      h.offset *= s;
      h.normal = p;
      return true;
    }
  }
  return false;
}

bool hs_less(const Halfspace& a, const Halfspace& b) {
  if (a.normal != b.normal) return lex_less(a.normal, b.normal);
  return a.offset < b.offset;
}

template <class F>
void for_each_subset(int m, int k, F&& f) {
  if (k > m) return;
  std::vector<int> c(k);
  for (int i = 0; i < k; ++i) c[i] = i;
  while (true) {
    f(c);
    int i = k - 1;
    while (i >= 0 && c[i] == m - k + i) --i;
    if (i < 0) return;
    ++c[i];
    for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
  }
}

// facet planes of conv(pts); empty when not full dimensional. Gift wrapping:
// each facet's ridges come from a hull one dimension down, and the neighbour
// across a ridge is found by the exact rotation ratio.
std::vector<Halfspace> hull_planes(const std::vector<RVec>& pts, int d) {
  std::vector<Halfspace> out;
  if (pts.empty()) return out;
  if (affine_rank(pts) < d) return out;
  if (d == 1) {
    Rational lo = pts[0][0], hi = pts[0][0];
    for (auto& p : pts) { lo = std::min(lo, p[0]); hi = std::max(hi, p[0]); }
    out.push_back({RVec{Rational(1)}, hi});
    out.push_back({RVec{Rational(-1)}, -lo});
    return out;
  }
  int m = (int)pts.size();
  // the lexicographic maximum is a vertex; search a first facet through it
  int p0 = 0;
  for (int i = 1; i < m; ++i)
    if (lex_less(pts[p0], pts[i])) p0 = i;
  std::vector<int> others;
  std::vector<double> dist(m, 0);
  for (int i = 0; i < m; ++i) {
    if (i == p0) continue;
    others.push_back(i);
    for (int j = 0; j < d; ++j) {
      double t = to_double(pts[i][j] - pts[p0][j]);
      dist[i] += t * t;
    }
  }
  std::sort(others.begin(), others.end(), [&](int a, int b) { return dist[a] < dist[b]; });
  Halfspace first;
  bool have = false;
  for_each_subset((int)others.size(), d - 1, [&](const std::vector<int>& c) {
    if (have) return;
    RMat rows;
    for (int i : c) rows.push_back(sub(pts[others[i]], pts[p0]));
    if (rank(rows) < d - 1) return;
    RVec n = nullvector(rows, d);
    Rational b = dot(n, pts[p0]);
    bool ep = false, en = false;
    for (int i = 0; i < m && !(ep && en); ++i) {
      Rational s = dot(n, pts[i]) - b;
      if (s > 0) ep = true;
      if (s < 0) en = true;
    }
    if (ep && en) return;
    if (ep) { n = scale(n, -1); b = -b; }
    first = {n, b};
    normalize_halfspace(first);
    have = true;
  });
  std::set<std::pair<RVec, Rational>> seen;
  std::vector<Halfspace> queue{first};
  seen.insert({first.normal, first.offset});
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    Halfspace F = queue[qi];
    out.push_back(F);
    std::vector<RVec> on, proj;
    std::vector<Rational> gap(m);
    int k = 0;
    while (F.normal[k] == 0) ++k;
    for (int i = 0; i < m; ++i) {
      gap[i] = F.offset - dot(F.normal, pts[i]);
      if (gap[i] == 0) {
        RVec q;
        for (int j = 0; j < d; ++j)
          if (j != k) q.push_back(pts[i][j]);
        proj.push_back(q);
      }
    }
    for (auto& r : hull_planes(proj, d - 1)) {
      RVec w;
      for (int j = 0, t = 0; j < d; ++j) w.push_back(j == k ? Rational(0) : r.normal[t++]);
      bool any = false;
      Rational lam = 0;
      for (int i = 0; i < m; ++i) {
        if (gap[i] == 0) continue;
        Rational ratio = (dot(w, pts[i]) - r.offset) / gap[i];
        if (!any || ratio > lam) { lam = ratio; any = true; }
      }
      Halfspace G{add(scale(F.normal, lam), w), lam * F.offset + r.offset};
      if (!normalize_halfspace(G)) continue;
      if (seen.insert({G.normal, G.offset}).second) queue.push_back(G);
    }
  }
  return out;
}

Polytope finish(int dim, std::vector<Halfspace> planes, std::vector<RVec> cand) {
  dedupe_points(cand);
  Polytope P;
  P.dim = dim;
  for (auto& x : cand) {
    RMat tight;
    for (auto& h : planes)
      if (dot(h.normal, x) == h.offset) tight.push_back(h.normal);
    if ((int)tight.size() >= dim && rank(tight) == dim) P.vertices.push_back(x);
  }
  if ((int)P.vertices.size() < dim + 1 || affine_rank(P.vertices) < dim)
    throw Error(Err::DegenerateInput, "polytope is empty or not full-dimensional");
  std::sort(planes.begin(), planes.end(), hs_less);
  for (auto& h : planes) {
    std::vector<int> vs;
    for (size_t i = 0; i < P.vertices.size(); ++i)
      if (dot(h.normal, P.vertices[i]) == h.offset) vs.push_back((int)i);
    if ((int)vs.size() < dim) continue;
    if (affine_rank(P.vertices, vs) != dim - 1) continue;
    Facet f;
    f.halfspace = (int)P.halfspaces.size();
    f.verts = vs;
    P.halfspaces.push_back(h);
    P.facets.push_back(f);
  }
  P.vertex_facets.assign(P.vertices.size(), {});
  for (size_t f = 0; f < P.facets.size(); ++f)
    for (int v : P.facets[f].verts) P.vertex_facets[v].push_back((int)f);
  P.delzant = true;
  for (auto& vf : P.vertex_facets) {
    if ((int)vf.size() != dim) { P.delzant = false; break; }
    RMat N;
    for (int f : vf) N.push_back(P.halfspaces[f].normal);
    Rational dt = det(N);
    if (dt != 1 && dt != -1) { P.delzant = false; break; }
  }
  return P;
}

std::vector<std::vector<int>> tri_face(const Polytope& P, const std::vector<int>& face, int fdim) {
  if (fdim == 0) return {{face[0]}};
  int v0 = face[0];
  std::set<std::vector<int>> subs;
  for (auto& F : P.facets) {
    std::vector<int> inter;
    std::set_intersection(face.begin(), face.end(), F.verts.begin(), F.verts.end(),
                          std::back_inserter(inter));
    if ((int)inter.size() < fdim || inter.size() == face.size()) continue;
    if (affine_rank(P.vertices, inter) != fdim - 1) continue;
    subs.insert(inter);
  }
  std::vector<std::vector<int>> out;
  for (auto& G : subs) {
    if (std::binary_search(G.begin(), G.end(), v0)) continue;
    for (auto& s : tri_face(P, G, fdim - 1)) {
      auto t = s;
      t.push_back(v0);
      out.push_back(t);
    }
  }
  return out;
}

Rational simplex_volume(const Polytope& P, const std::vector<int>& s) {
  RMat m;
  for (size_t i = 0; i + 1 < s.size(); ++i) m.push_back(sub(P.vertices[s[i]], P.vertices[s.back()]));
  Rational d = det(m);
  if (d < 0) d = -d;
  Integer f = 1;
  for (int i = 2; i <= P.dim; ++i) f *= i;
  return d / Rational(f);
}

// facet f seen as a polytope in R^(d-1) after dropping coordinate k
int drop_coord(const RVec& normal) {
  for (size_t i = 0; i < normal.size(); ++i)
    if (normal[i] != 0) return (int)i;
  return -1;
}

std::vector<RVec> project_facet(const Polytope& P, int f, int k) {
  std::vector<RVec> out;
  for (int v : P.facets[f].verts) {
    RVec p;
    for (int j = 0; j < P.dim; ++j)
      if (j != k) p.push_back(P.vertices[v][j]);
    out.push_back(p);
  }
  return out;
}

std::vector<AffineFn> dedupe_pieces(const std::vector<AffineFn>& pieces) {
  std::vector<AffineFn> out;
  for (auto& p : pieces) {
    bool dup = false;
    for (auto& q : out)
      if (q == p) { dup = true; break; }
    if (!dup) out.push_back(p);
  }
  return out;
}

}  // namespace

Polytope from_halfspaces(int dim, std::vector<Halfspace> hs) {
  if (dim < 1) throw Error(Err::DegenerateInput, "dimension must be positive");
  std::vector<Halfspace> clean;
  for (auto& h : hs) {
    if ((int)h.normal.size() != dim) throw Error(Err::DimensionMismatch, "halfspace dimension");
    if (!normalize_halfspace(h)) {
      if (h.offset < 0) throw Error(Err::DegenerateInput, "empty: 0 <= negative");
      continue;
    }
    clean.push_back(h);
  }
  // keep only the tightest offset for each normal
  std::sort(clean.begin(), clean.end(), hs_less);
  std::vector<Halfspace> uniq;
  for (auto& h : clean)
    if (uniq.empty() || uniq.back().normal != h.normal) uniq.push_back(h);
  std::vector<RVec> normals;
  for (auto& h : uniq) normals.push_back(h.normal);
  auto nh = hull_planes(normals, dim);
  if (nh.empty()) throw Error(Err::UnboundedInput, "facet normals do not span");
  for (auto& h : nh)
    if (h.offset <= 0) throw Error(Err::UnboundedInput, "facet normals do not positively span");
  std::vector<RVec> cand;
  int m = (int)uniq.size();
  for_each_subset(m, dim, [&](const std::vector<int>& c) {
    RMat a;
    RVec b;
    for (int i : c) { a.push_back(uniq[i].normal); b.push_back(uniq[i].offset); }
    RVec x;
    if (!solve(a, b, x)) return;
    for (auto& h : uniq)
      if (dot(h.normal, x) > h.offset) return;
    cand.push_back(x);
  });
  return finish(dim, uniq, cand);
}

Polytope from_vertices(int dim, const std::vector<RVec>& pts) {
  if (dim < 1) throw Error(Err::DegenerateInput, "dimension must be positive");
  for (auto& p : pts)
    if ((int)p.size() != dim) throw Error(Err::DimensionMismatch, "vertex dimension");
  std::vector<RVec> q = pts;
  dedupe_points(q);
  auto planes = hull_planes(q, dim);
  if (planes.empty()) throw Error(Err::DegenerateInput, "points not full-dimensional");
  return finish(dim, planes, q);
}

Polytope from_both(int dim, std::vector<Halfspace> hs, const std::vector<RVec>& pts) {
  Polytope a = from_halfspaces(dim, hs);
  Polytope b = from_vertices(dim, pts);
  if (a.vertices != b.vertices)
    throw Error(Err::InconsistentInput, "halfspaces and vertices describe different sets");
  return a;
}

std::vector<std::vector<int>> triangulate(const Polytope& P) {
  std::vector<int> all(P.vertices.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = (int)i;
  return tri_face(P, all, P.dim);
}

Rational volume(const Polytope& P) {
  Rational v = 0;
  for (auto& s : triangulate(P)) v += simplex_volume(P, s);
  return v;
}

Rational facet_measure(const Polytope& P, int f, const RVec& normal) {
  int k = drop_coord(normal);
  Rational nk = normal[k] < 0 ? Rational(-normal[k]) : normal[k];
  if (P.dim == 1) return 1 / nk;
  return hull_volume(project_facet(P, f, k), P.dim - 1) / nk;
}

VolumeData volume_data(const Polytope& P) {
  VolumeData d;
  d.volume = 0;
  d.barycenter.assign(P.dim, 0);
  for (auto& s : triangulate(P)) {
    Rational v = simplex_volume(P, s);
    d.volume += v;
    RVec c(P.dim, 0);
    for (int i : s) c = add(c, P.vertices[i]);
    d.barycenter = add(d.barycenter, scale(c, v / Rational((int)s.size())));
  }
  d.barycenter = scale(d.barycenter, 1 / d.volume);
  d.boundary_sigma_volume = 0;
  for (size_t f = 0; f < P.facets.size(); ++f) {
    Rational s = facet_measure(P, (int)f, P.halfspaces[f].normal);
    d.per_facet_sigma.push_back(s);
    d.boundary_sigma_volume += s;
  }
  return d;
}

Rational integrate(const Polytope& P, const AffineFn& fn, Region region) {
  return integrate(P, std::vector<AffineFn>{fn}, region);
}

Rational integrate(const Polytope& P, const std::vector<AffineFn>& pieces_in, Region region) {
  if (pieces_in.empty()) throw Error(Err::DomainMismatch, "no pieces");
  for (auto& p : pieces_in)
    if ((int)p.gradient.size() != P.dim) throw Error(Err::DomainMismatch, "piece dimension differs from polytope");
  auto pieces = dedupe_pieces(pieces_in);
  int d = P.dim;
  if (region == Region::boundary) {
    Rational total = 0;
    for (size_t f = 0; f < P.facets.size(); ++f) {
      const auto& h = P.halfspaces[f];
      int k = drop_coord(h.normal);
      Rational nk = h.normal[k] < 0 ? Rational(-h.normal[k]) : h.normal[k];
      if (d == 1) {
        const RVec& x = P.vertices[P.facets[f].verts[0]];
        Rational best = pieces[0](x);
        for (auto& p : pieces) best = std::max(best, p(x));
        total += best / nk;
        continue;
      }
      // x_k = (offset - sum_{j != k} n_j x_j) / n_k
      std::vector<AffineFn> rest;
      for (auto& p : pieces) {
        AffineFn q;
        Rational ak = p.gradient[k] / h.normal[k];
        for (int j = 0; j < d; ++j)
          if (j != k) q.gradient.push_back(p.gradient[j] - ak * h.normal[j]);
        q.constant = p.constant + ak * h.offset;
        rest.push_back(q);
      }
      Polytope F = from_vertices(d - 1, project_facet(P, (int)f, k));
      total += integrate(F, rest, Region::interior) / nk;
    }
    return total;
  }
  if (pieces.size() == 1) {
    auto vd = volume_data(P);
    return vd.volume * pieces[0](vd.barycenter);
  }
  Rational total = 0;
  for (size_t i = 0; i < pieces.size(); ++i) {
    std::vector<Halfspace> hs = P.halfspaces;
    bool empty = false;
    for (size_t j = 0; j < pieces.size(); ++j) {
      if (j == i) continue;
      RVec nrm = sub(pieces[j].gradient, pieces[i].gradient);
      Rational off = pieces[i].constant - pieces[j].constant;
      bool zero = std::all_of(nrm.begin(), nrm.end(), [](const Rational& r) { return r == 0; });
      if (zero) {
        if (off < 0) empty = true;
        continue;
      }
      hs.push_back({nrm, off});
    }
    if (empty) continue;
    Polytope R;
    try {
      R = from_halfspaces(d, hs);
    } catch (const Error& e) {
      if (e.code() == Err::DegenerateInput) continue;
      throw;
    }
    auto vd = volume_data(R);
    total += vd.volume * pieces[i](vd.barycenter);
  }
  return total;
}

Rational hull_volume(const std::vector<RVec>& pts_in, int d) {
  if (d == 0) return 1;
  std::vector<RVec> pts = pts_in;
  dedupe_points(pts);
  auto planes = hull_planes(pts, d);
  if (planes.empty()) return 0;
  return volume(finish(d, planes, pts));
}

Rational mixed_volume(const std::vector<std::vector<RVec>>& bodies_in, int d) {
  if ((int)bodies_in.size() != d) throw Error(Err::DimensionMismatch, "mixed volume needs d bodies");
  // group identical bodies
  std::vector<std::vector<RVec>> bodies;
  std::vector<int> mult;
  for (auto b : bodies_in) {
    for (auto& p : b)
      if ((int)p.size() != d) throw Error(Err::DimensionMismatch, "body dimension");
    dedupe_points(b);
    bool found = false;
    for (size_t i = 0; i < bodies.size(); ++i)
      if (bodies[i] == b) { ++mult[i]; found = true; break; }
    if (!found) { bodies.push_back(b); mult.push_back(1); }
  }
  int r = (int)bodies.size();
  // exponent vectors of total degree d in r variables
  std::vector<std::vector<int>> mons;
  std::vector<int> cur(r, 0);
  std::function<void(int, int)> gen = [&](int i, int left) {
    if (i == r - 1) { cur[i] = left; mons.push_back(cur); return; }
    for (int k = left; k >= 0; --k) { cur[i] = k; gen(i + 1, left - k); }
  };
  gen(0, d);
  int M = (int)mons.size();
  RMat A(M, RVec(M));
  RVec rhs(M);
  for (int p = 0; p < M; ++p) {
    std::vector<int> lam(r);
    for (int i = 0; i < r; ++i) lam[i] = mons[p][i] + 1;
    for (int q = 0; q < M; ++q) {
      Integer v = 1;
      for (int i = 0; i < r; ++i)
        for (int e = 0; e < mons[q][i]; ++e) v *= lam[i];
      A[p][q] = Rational(v);
    }
    std::vector<RVec> sum{RVec(d, 0)};
    for (int i = 0; i < r; ++i) {
      std::vector<RVec> next;
      for (auto& s : sum)
        for (auto& x : bodies[i]) next.push_back(add(s, scale(x, Rational(lam[i]))));
      dedupe_points(next);
      sum.swap(next);
    }
    rhs[p] = hull_volume(sum, d);
  }
  RVec c;
  if (!solve(A, rhs, c)) throw Error(Err::SingularPolarizationSystem, "polarization grid is singular");
  int target = -1;
  for (int q = 0; q < M; ++q)
    if (mons[q] == mult) target = q;
  Integer num = 1, den = 1;
  for (int i = 0; i < r; ++i)
    for (int k = 2; k <= mult[i]; ++k) num *= k;
  for (int k = 2; k <= d; ++k) den *= k;
  return c[target] * Rational(num, den);
}

Rational mixed_volume(const std::vector<const Polytope*>& bodies) {
  std::vector<std::vector<RVec>> pts;
  int d = bodies.empty() ? 0 : bodies[0]->dim;
  for (auto* b : bodies) {
    if (b->dim != d) throw Error(Err::DimensionMismatch, "ambient dimensions differ");
    pts.push_back(b->vertices);
  }
  return mixed_volume(pts, d);
}

Polytope corner_chop(const Polytope& P, const RVec& v, const Rational& eps) {
  int vi = P.find_vertex(v);
  if (vi < 0) throw Error(Err::NotAVertex, "chop point is not a vertex");
  if (eps < 0) throw Error(Err::ChopTooLarge, "negative chop size");
  const auto& inc = P.vertex_facets[vi];
  if ((int)inc.size() != P.dim) throw Error(Err::NonDelzantVertex, "vertex is not simple");
  RMat N;
  for (int f : inc) N.push_back(P.halfspaces[f].normal);
  Rational dt = det(N);
  if (dt != 1 && dt != -1) throw Error(Err::NonDelzantVertex, "vertex cone is not unimodular");
  if (eps == 0) return P;
  // inward normals at v form the dual basis of the primitive edge directions
  RVec w(P.dim, 0);
  for (auto& n : N) w = sub(w, n);
  Rational base = dot(w, v);
  for (size_t i = 0; i < P.vertices.size(); ++i) {
    if ((int)i == vi) continue;
    if (dot(w, P.vertices[i]) - base <= eps)
      throw Error(Err::ChopTooLarge, "chop reaches another vertex");
  }
  auto hs = P.halfspaces;
  hs.push_back({scale(w, -1), -base - eps});
  return from_halfspaces(P.dim, hs);
}

Polytope translate(const Polytope& P, const RVec& t) {
  Polytope Q = P;
  for (auto& x : Q.vertices) x = add(x, t);
  for (auto& h : Q.halfspaces) h.offset += dot(h.normal, t);
  return Q;
}

Polytope dilate(const Polytope& P, const Rational& s) {
  if (s <= 0) throw Error(Err::DegenerateInput, "dilation must be positive");
  Polytope Q = P;
  for (auto& x : Q.vertices) x = scale(x, s);
  for (auto& h : Q.halfspaces) h.offset *= s;
  return Q;
}

std::vector<RVec> embed_flat(const std::vector<RVec>& pts) {
  std::vector<RVec> out;
  for (auto p : pts) { p.push_back(0); out.push_back(p); }
  return out;
}

}  // namespace kstab
