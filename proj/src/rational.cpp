#include "kstab/rational.hpp"
#include "kstab/errors.hpp"

#include <utility>

namespace kstab {

std::string to_string(const Rational& r) {
  Integer p = boost::multiprecision::numerator(r);
  Integer q = boost::multiprecision::denominator(r);
  return p.str() + "/" + q.str();
}

Rational parse_rational(const std::string& s) {
  auto bad = [&]() { return Error(Err::ParseError, "bad rational '" + s + "'"); };
  if (s.empty()) throw bad();
  auto slash = s.find('/');
  auto check = [&](const std::string& t) {
    if (t.empty()) throw bad();
    size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    if (i == t.size()) throw bad();
    for (; i < t.size(); ++i)
      if (t[i] < '0' || t[i] > '9') throw bad();
  };
  std::string ps = s.substr(0, slash);
  if (!ps.empty() && ps[0] == '+') ps = ps.substr(1);
  check(ps);
  Integer p(ps);
  Integer q(1);
  if (slash != std::string::npos) {
    std::string qs = s.substr(slash + 1);
    check(qs);
    q = Integer(qs);
    if (q == 0) throw bad();
  }
  return Rational(p, q);
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

Rational dot(const RVec& a, const RVec& b) {
  Rational s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

RVec add(const RVec& a, const RVec& b) {
  RVec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

RVec sub(const RVec& a, const RVec& b) {
  RVec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

RVec scale(const RVec& a, const Rational& s) {
  RVec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
  return r;
}

RVec primitive(const RVec& v) {
  Integer l = 1;
  for (auto& x : v) l = boost::multiprecision::lcm(l, Integer(boost::multiprecision::denominator(x)));
  Integer g = 0;
  std::vector<Integer> ints;
  for (auto& x : v) {
    Integer k = boost::multiprecision::numerator(x) * (l / boost::multiprecision::denominator(x));
    ints.push_back(k);
    g = boost::multiprecision::gcd(g, k);
  }
  RVec r(v.size());
  if (g == 0) return r;
  if (g < 0) g = -g;
  for (size_t i = 0; i < v.size(); ++i) r[i] = Rational(ints[i] / g);
  return r;
}

std::vector<double> to_doubles(const RVec& v) {
  std::vector<double> r;
  r.reserve(v.size());
  for (auto& x : v) r.push_back(to_double(x));
  return r;
}

namespace {

// row echelon in place, returns rank; sign tracks swaps
int eliminate(RMat& m, int& sign) {
  sign = 1;
  int rows = (int)m.size();
  if (rows == 0) return 0;
  int cols = (int)m[0].size();
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int piv = -1;
    for (int i = r; i < rows; ++i)
      if (m[i][c] != 0) { piv = i; break; }
    if (piv < 0) continue;
    if (piv != r) { std::swap(m[piv], m[r]); sign = -sign; }
    for (int i = r + 1; i < rows; ++i) {
      if (m[i][c] == 0) continue;
      Rational f = m[i][c] / m[r][c];
      for (int j = c; j < cols; ++j) m[i][j] -= f * m[r][j];
    }
    ++r;
  }
  return r;
}

}  // namespace

int rank(RMat m) {
  int s;
  return eliminate(m, s);
}

Rational det(RMat m) {
  int n = (int)m.size();
  int s;
  int r = eliminate(m, s);
  if (r < n) return 0;
  Rational d = s;
  for (int i = 0; i < n; ++i) d *= m[i][i];
  return d;
}

bool solve(RMat a, RVec b, RVec& x) {
  int n = (int)a.size();
  for (int i = 0; i < n; ++i) a[i].push_back(b[i]);
  for (int c = 0; c < n; ++c) {
    int piv = -1;
    for (int i = c; i < n; ++i)
      if (a[i][c] != 0) { piv = i; break; }
    if (piv < 0) return false;
    std::swap(a[piv], a[c]);
    for (int i = 0; i < n; ++i) {
      if (i == c || a[i][c] == 0) continue;
      Rational f = a[i][c] / a[c][c];
      for (int j = c; j <= n; ++j) a[i][j] -= f * a[c][j];
    }
  }
  x.assign(n, 0);
  for (int i = 0; i < n; ++i) x[i] = a[i][n] / a[i][i];
  return true;
}

RVec nullvector(const RMat& rows, int n) {
  // reduced row echelon, then read off one free column
  RMat m = rows;
  int R = (int)m.size();
  std::vector<int> pivcol;
  int r = 0;
  for (int c = 0; c < n && r < R; ++c) {
    int piv = -1;
    for (int i = r; i < R; ++i)
      if (m[i][c] != 0) { piv = i; break; }
    if (piv < 0) continue;
    std::swap(m[piv], m[r]);
    Rational inv = 1 / m[r][c];
    for (int j = 0; j < n; ++j) m[r][j] *= inv;
    for (int i = 0; i < R; ++i) {
      if (i == r || m[i][c] == 0) continue;
      Rational f = m[i][c];
      for (int j = 0; j < n; ++j) m[i][j] -= f * m[r][j];
    }
    pivcol.push_back(c);
    ++r;
  }
  std::vector<bool> isp(n, false);
  for (int c : pivcol) isp[c] = true;
  int free = -1;
  for (int c = 0; c < n; ++c)
    if (!isp[c]) { free = c; break; }
  RVec v(n, 0);
  if (free < 0) return v;
  v[free] = 1;
  for (int i = 0; i < r; ++i) v[pivcol[i]] = -m[i][free];
  return v;
}

RVec interpolate(const RVec& xs, const RVec& ys) {
  size_t m = xs.size();
  if (ys.size() != m || m == 0) throw Error(Err::DimensionMismatch, "interpolation nodes");
  // Newton divided differences, then expand
  RVec dd = ys;
  for (size_t k = 1; k < m; ++k)
    for (size_t i = m - 1; i >= k; --i) {
      Rational h = xs[i] - xs[i - k];
      if (h == 0) throw Error(Err::DegenerateInput, "repeated interpolation node");
      dd[i] = (dd[i] - dd[i - 1]) / h;
    }
  RVec c(m, 0);
  for (size_t k = m; k-- > 0;) {
    // c <- c * (x - xs[k]) + dd[k]
    RVec next(m, 0);
    for (size_t i = 0; i + 1 < m; ++i) next[i + 1] += c[i];
    for (size_t i = 0; i < m; ++i) next[i] -= xs[k] * c[i];
    next[0] += dd[k];
    c = next;
  }
  return c;
}

}  // namespace kstab
