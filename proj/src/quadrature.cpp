#include "kstab/quadrature.hpp"
#include "kstab/errors.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace kstab {

const Rule1D& gauss_legendre(int q) {
  static std::mutex mu;
  static std::map<int, Rule1D> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(q);
  if (it != cache.end()) return it->second;
  if (q < 1) throw Error(Err::ValidationError, "quadrature order must be positive");
  Rule1D r;
  r.x.resize(q);
  r.w.resize(q);
  for (int i = 0; i < q; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= q; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2 * k - 1) * z * p1 - (k - 1) * p2) / k;
      }
      dp = q * (z * p0 - p1) / (z * z - 1);
      double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1, p1 = 0;
    for (int k = 1; k <= q; ++k) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2 * k - 1) * z * p1 - (k - 1) * p2) / k;
    }
    dp = q * (z * p0 - p1) / (z * z - 1);
    r.x[i] = 0.5 * (1 - z);
    r.w[i] = 1.0 / ((1 - z * z) * dp * dp);
  }
  return cache[q] = r;
}

namespace {

double simplex_measure(const DSimplex& s) {
  int n = (int)s.size() - 1;
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = s[i + 1][j] - s[0][j];
  double d = 1;
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[p][c])) p = r;
    if (m[p][c] == 0) return 0;
    if (p != c) { std::swap(m[p], m[c]); d = -d; }
    d *= m[c][c];
    for (int r = c + 1; r < n; ++r) {
      double f = m[r][c] / m[c][c];
      for (int k = c; k < n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return std::abs(d) / f;
}

DSimplex to_double_simplex(const Polytope& P, const std::vector<int>& idx) {
  DSimplex s;
  for (int i : idx) s.push_back(to_doubles(P.vertices[i]));
  return s;
}

}  // namespace

void add_simplex_nodes(Grid& g, const DSimplex& s, int q) {
  int n = (int)s.size() - 1;
  const Rule1D& r = gauss_legendre(q);
  double fact = 1;
  for (int i = 2; i <= n; ++i) fact *= i;
  double scale = fact * simplex_measure(s);
  std::vector<int> idx(n, 0);
  std::vector<double> x(n);
  while (true) {
    // b_k = s_{k-1} u_k, s_k = s_{k-1}(1 - u_k); point = sum b_k v_k + s_n v_0
    double rest = 1, jac = 1, w = scale;
    for (int k = 0; k < n; ++k) w *= r.w[idx[k]];
    std::fill(x.begin(), x.end(), 0.0);
    for (int k = 0; k < n; ++k) {
      double u = r.x[idx[k]];
      double bk = rest * u;
      jac *= rest;
      for (int c = 0; c < n; ++c) x[c] += bk * s[k + 1][c];
      rest *= 1 - u;
    }
    for (int c = 0; c < n; ++c) x[c] += rest * s[0][c];
    g.pts.insert(g.pts.end(), x.begin(), x.end());
    g.wts.push_back(w * jac);
    int k = 0;
    while (k < n && ++idx[k] == q) idx[k++] = 0;
    if (k == n) break;
  }
}

Grid polytope_grid(const Polytope& P, int q) {
  Grid g;
  g.dim = P.dim;
  for (auto& t : triangulate(P)) add_simplex_nodes(g, to_double_simplex(P, t), q);
  return g;
}

}  // namespace kstab
