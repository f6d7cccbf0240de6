#pragma once

#include "kstab/pl.hpp"

#include <random>

namespace fx {

using namespace kstab;

inline Rational R(long p, long q = 1) { return Rational(p, q); }

inline Polytope cube(int n) {
  std::vector<Halfspace> hs;
  for (int i = 0; i < n; ++i) {
    RVec a(n, 0), b(n, 0);
    a[i] = -1;
    b[i] = 1;
    hs.push_back({a, 0});
    hs.push_back({b, 1});
  }
  return from_halfspaces(n, hs);
}

inline Polytope interval() { return cube(1); }
inline Polytope square() { return cube(2); }

inline Polytope simplex(int n) {
  std::vector<RVec> v{RVec(n, 0)};
  for (int i = 0; i < n; ++i) {
    RVec e(n, 0);
    e[i] = 1;
    v.push_back(e);
  }
  return from_vertices(n, v);
}

inline AffineFn aff(std::vector<long> grad, Rational c) {
  AffineFn f;
  for (long g : grad) f.gradient.push_back(Rational(g));
  f.constant = c;
  return f;
}

// shoelace formula for a convex polygon given unordered vertices
inline Rational shoelace(std::vector<RVec> v) {
  double cx = 0, cy = 0;
  for (auto& p : v) { cx += to_double(p[0]); cy += to_double(p[1]); }
  cx /= v.size();
  cy /= v.size();
  std::sort(v.begin(), v.end(), [&](const RVec& a, const RVec& b) {
    return std::atan2(to_double(a[1]) - cy, to_double(a[0]) - cx) <
           std::atan2(to_double(b[1]) - cy, to_double(b[0]) - cx);
  });
  Rational s = 0;
  for (size_t i = 0; i < v.size(); ++i) {
    auto& a = v[i];
    auto& b = v[(i + 1) % v.size()];
    s += a[0] * b[1] - a[1] * b[0];
  }
  return s < 0 ? Rational(-s / 2) : Rational(s / 2);
}

inline std::vector<RVec> random_points(std::mt19937& rng, int n, int d, int range) {
  std::uniform_int_distribution<int> u(0, range);
  std::vector<RVec> pts;
  for (int i = 0; i < n; ++i) {
    RVec p;
    for (int j = 0; j < d; ++j) p.push_back(Rational(u(rng), 2));
    pts.push_back(p);
  }
  return pts;
}

// random rational PL convex function on P, redundant pieces pruned
inline PLConvexFn random_pl(std::mt19937& rng, const Polytope& P, int k) {
  std::uniform_int_distribution<int> g(-2, 2), c(-4, 4);
  std::vector<AffineFn> pieces;
  for (int i = 0; i < k; ++i) {
    AffineFn f;
    for (int j = 0; j < P.dim; ++j) f.gradient.push_back(Rational(g(rng)));
    f.constant = Rational(c(rng), 2);
    pieces.push_back(f);
  }
  return make_pl_pruned(P, pieces);
}

}  // namespace fx
