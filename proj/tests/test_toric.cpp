#include "doctest.h"
#include "fixtures.hpp"
#include "kstab/errors.hpp"
#include "kstab/invariants.hpp"
#include "kstab/toric.hpp"

#include <cmath>
#include <sstream>

using namespace fx;

namespace {

ToricTestConfig cfg_of(const Polytope& P, std::vector<AffineFn> p,
                       Normalization m = Normalization::min_zero) {
  return normalize(make_config(P, make_pl(P, p)), m);
}

double logistic(double t) { return 1 / (1 + std::exp(-t)); }

Vec vec(std::initializer_list<double> v) {
  Vec r(v.size());
  int i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

}  // namespace

TEST_CASE("Gauss-Legendre and simplex grids") {
  for (int q : {1, 4, 16}) {
    auto& r = gauss_legendre(q);
    for (int d = 0; d < 2 * q; ++d) {
      double s = 0;
      for (int i = 0; i < q; ++i) s += r.w[i] * std::pow(r.x[i], d);
      CHECK(s == doctest::Approx(1.0 / (d + 1)).epsilon(1e-13));
    }
  }
  for (auto P : {square(), simplex(2), simplex(3), interval()}) {
    Grid g = polytope_grid(P, 6);
    double v = 0, m = 0;
    for (size_t i = 0; i < g.size(); ++i) {
      v += g.wts[i];
      m += g.wts[i] * g.point(i)[0] * g.point(i)[0];
      for (auto& h : P.halfspaces) {
        double l = to_double(h.offset);
        for (int k = 0; k < P.dim; ++k) l -= to_double(h.normal[k]) * g.point(i)[k];
        CHECK(l > 0);
      }
    }
    CHECK(v == doctest::Approx(to_double(volume(P))).epsilon(1e-13));
    // int x0^2: square 1/3, simplex n: 2/(n+2)!
    double want = P.dim == 1 || P.vertices.size() == (1u << P.dim) ? 1.0 / 3 : 2.0 / std::tgamma(P.dim + 3);
    CHECK(m == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("Guillemin potential: values, Hessians, Delzant check") {
  auto u = guillemin_potential(interval());
  double h = 0.5;
  CHECK(u.value(&h) == doctest::Approx(-std::log(2.0) / 2).epsilon(1e-15));
  CHECK(u.hessian(&h)(0, 0) == doctest::Approx(2.0));
  double x = 0.2;
  CHECK(u.hessian(&x)(0, 0) == doctest::Approx(0.5 * (1 / 0.2 + 1 / 0.8)));
  auto s = guillemin_potential(square());
  double p[2] = {0.3, 0.6};
  Mat H = s.hessian(p);
  CHECK(H(0, 1) == 0);
  CHECK(H(0, 0) == doctest::Approx(u.hessian(&p[0])(0, 0)));
  CHECK(s.value(p) == doctest::Approx(u.value(&p[0]) + u.value(&p[1])));
  auto bad = from_vertices(2, {{R(0), R(0)}, {R(2), R(0)}, {R(0), R(1)}});
  CHECK_THROWS_AS(guillemin_potential(bad), Error);
  // chart coordinates reproduce the plain evaluation
  RayPotential r{&s, nullptr, 0};
  MomentPoint mp = moment_point(s, p);
  CHECK((hessian(r, mp) - H).norm() < 1e-12);
  CHECK((dual_point(r, mp) - s.gradient(p)).norm() < 1e-13);
  CHECK((inverse_hessian(r, mp) * H - Mat::Identity(2, 2)).norm() < 1e-12);
  CHECK(logdet_hessian(r, mp) == doctest::Approx(std::log(H.determinant())));
}

TEST_CASE("Abreu curvature: interval closed form, products, closed form vs differences") {
  auto u = guillemin_potential(interval());
  RayPotential r{&u, nullptr, 0};
  for (double x : {0.5, 0.1, 0.93, 1e-4}) {
    auto p = moment_point(u, &x);
    CHECK(abreu_raw(r, p) == doctest::Approx(4.0).epsilon(1e-9));
    if (x > 0.01) CHECK(abreu_raw_fd(r, &x, 1e-3) == doctest::Approx(4.0).epsilon(1e-8));
  }
  auto sq = guillemin_potential(square());
  RayPotential rs{&sq, nullptr, 0};
  double p[2] = {0.3, 0.8};
  CHECK(abreu_raw(rs, moment_point(sq, p)) == doctest::Approx(8.0).epsilon(1e-10));

  // nonproduct polytopes and smoothed rays: compare with finite differences of the inverse Hessian
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(0.15, 0.3);
  for (auto P : {simplex(2), simplex(3), corner_chop(square(), {R(1), R(1)}, R(1, 2))}) {
    auto up = guillemin_potential(P);
    auto c = normalize(make_config(P, random_pl(rng, P, 3)), Normalization::min_zero);
    Smoothing g(c.g, 3.0);
    for (double tau : {0.0, 0.7}) {
      RayPotential rr{&up, &g, tau};
      for (int t = 0; t < 3; ++t) {
        std::vector<double> x(P.dim);
        for (auto& v : x) v = U(rng);
        auto mp = moment_point(up, x.data());
        bool inside = true;
        for (double l : mp.ell) inside = inside && l > 0.02;
        if (!inside) continue;
        CHECK(abreu_raw(rr, mp) == doctest::Approx(abreu_raw_fd(rr, x.data(), 1e-3)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("curvature calibration") {
  double k = curvature_kappa();
  CHECK(k == doctest::Approx(0.5).epsilon(1e-10));
  for (auto P : {interval(), square(), simplex(2)}) {
    double want = P.dim * to_double(slope_mu(P));
    double got = calibration_mean(P, 16, k);
    CHECK(std::abs(got - want) <= 1e-6 * want);
  }
  double mid[2] = {0.25, 0.25};
  CHECK(abreu_scalar_curvature(guillemin_potential(simplex(2)), mid) ==
        doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("Legendre inversion: interval closed form, far points, round trips") {
  auto u = guillemin_potential(interval());
  auto c = cfg_of(interval(), {aff({1}, 0)});
  Smoothing g(c.g, 10);
  for (double tau : {0.0, 1.0, 7.5}) {
    RayPotential r{&u, &g, tau};
    for (double xi : {-30.0, -3.0, 0.0, 0.4, 5.0, 45.0}) {
      auto p = legendre_solve(r, vec({xi}), nullptr);
      // grad u0(y) + tau = xi  =>  y = logistic(2 (xi - tau)), 1 - y = logistic(-2 (xi - tau))
      double t = 2 * (xi - tau);
      double l0 = logistic(t), l1 = logistic(-t);
      double got0 = p.ell[0], got1 = p.ell[1];
      // facet 0 is -x <= 0 (ell = y), facet 1 is x <= 1
      if (u.normals[0][0] > 0) std::swap(got0, got1);
      CHECK(std::abs(got0 - l0) <= 1e-10 * l0);
      CHECK(std::abs(got1 - l1) <= 1e-10 * l1);
    }
  }
  std::mt19937 rng(9);
  std::normal_distribution<double> N(0, 6);
  for (auto P : {square(), simplex(2), simplex(3)}) {
    auto up = guillemin_potential(P);
    auto cp = normalize(make_config(P, random_pl(rng, P, 3)), Normalization::min_zero);
    Smoothing gp(cp.g, 20);
    for (double tau : {0.0, 3.0}) {
      RayPotential r{&up, &gp, tau};
      for (int t = 0; t < 20; ++t) {
        Vec xi(P.dim);
        for (int k = 0; k < P.dim; ++k) xi[k] = N(rng);
        auto p = legendre_solve(r, xi, nullptr);
        CHECK((dual_point(r, p) - xi).norm() <= 1e-10 * (1 + xi.norm()));
      }
    }
  }
}

TEST_CASE("Ricci data: trace identity and second differences in xi") {
  double k = curvature_kappa();
  for (auto P : {simplex(2), square()}) {
    auto u = guillemin_potential(P);
    RayPotential r{&u, nullptr, 0};
    auto F = [&](const Vec& xi) { return logdet_hessian(r, legendre_solve(r, xi, nullptr)); };
    for (Vec xi : {vec({0.3, -0.2}), vec({4.0, 1.0}), vec({-9.0, 6.0})}) {
      auto p = legendre_solve(r, xi, nullptr);
      Mat A = ricci_potential_hessian(u, p, k);
      CHECK((hessian(r, p) * A).trace() == doctest::Approx(k * abreu_raw(r, p)).epsilon(1e-6));
      auto D2 = [&](int a, int b, double h) {
        Vec e = Vec::Zero(2), f = Vec::Zero(2);
        e[a] = h;
        f[b] = h;
        return (F(xi + e + f) - F(xi + e - f) - F(xi - e + f) + F(xi - e - f)) / (4 * h * h);
      };
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double fd = (4 * D2(a, b, 5e-3) - D2(a, b, 1e-2)) / 3;
          CHECK(std::abs(A(a, b) - k * fd) <= 1e-7);
        }
    }
  }
}

TEST_CASE("ray state: tau = 0, closed form interval path, measure identities") {
  auto c = cfg_of(interval(), {aff({1}, 0)});
  RayContext ctx = make_ray_context(c, 12, 10);
  auto s0 = ray_state(ctx, 0);
  for (size_t i = 0; i < s0.size(); ++i) {
    CHECK(s0.phi[i] == 0);
    CHECK(s0.phi_dot[i] == doctest::Approx(-ctx.ref[i].x[0]).epsilon(1e-14));
  }
  bool flip = ctx.u0.normals[0][0] > 0;
  for (double tau : {0.5, 3.0, 12.0}) {
    auto s = ray_state(ctx, tau, &s0);
    double m0 = 0, mt = 0;
    for (size_t i = 0; i < s.size(); ++i) {
      double xi = ctx.xi[i][0];
      // grad u0(y) + tau = xi and grad u0(x) = xi
      double y0 = logistic(2 * (xi - tau)), y1 = logistic(-2 * (xi - tau));
      double x0 = logistic(2 * xi), x1 = logistic(-2 * xi);
      double e0 = s.y[i].ell[0], e1 = s.y[i].ell[1], f0 = ctx.ref[i].ell[0], f1 = ctx.ref[i].ell[1];
      if (flip) { std::swap(e0, e1); std::swap(f0, f1); }
      CHECK(std::abs(e0 - y0) <= 1e-10 * y0);
      CHECK(std::abs(e1 - y1) <= 1e-10 * y1);
      CHECK(std::abs(f0 - x0) <= 1e-10 * x0);
      CHECK(std::abs(f1 - x1) <= 1e-10 * x1);
      CHECK(s.phi_dot[i] == doctest::Approx(-s.y[i].x[0]).epsilon(1e-14));
      // psi_0 = (1/2) log(1 + e^{2 xi}) up to a constant, psi_tau(xi) = psi_0(xi - tau) - tau y-free part
      double phi = 0.5 * std::log1p(std::exp(2 * (xi - tau))) - 0.5 * std::log1p(std::exp(2 * xi));
      CHECK(std::abs(s.phi[i] - phi) <= 1e-10 * (1 + std::abs(phi)));
      CHECK(std::abs(s.S[i] - 2.0) * s.rho[i] <= 1e-9);
      m0 += s.weight[i] * ctx.rho0[i];
      mt += s.weight[i] * s.rho[i];
    }
    CHECK(std::abs(m0 - 1.0) <= 1e-10);
    CHECK(std::abs(mt - 1.0) <= 1e-10);
  }
}

TEST_CASE("ray state: PL configurations, bounds, serial equals parallel") {
  std::vector<std::pair<ToricTestConfig, double>> cases{
      {cfg_of(interval(), {aff({1}, 0), aff({-1}, 1)}), 12.0},
      {cfg_of(square(), {aff({1, 0}, 0), aff({0, 1}, 0)}), 2.0},
      {cfg_of(simplex(2), {aff({1, 0}, 0), aff({-1, 1}, R(1, 3))}), 2.0},
  };
  for (auto& [c, tau] : cases) {
    double beta = 10 * tau;
    INFO("dim ", c.base.dim, " pieces ", c.g.pieces.size());
    BoxOptions opt;
    if (c.base.dim == 2) opt.quad_order = 8, opt.max_nodes = 40000;
    RayContext ctx = make_ray_context(c, tau, beta, opt);
    auto s = ray_state(ctx, tau);
    auto ser = ray_state(ctx, tau, nullptr, Exec::serial);
    double gmax = to_double(c.g.max_value()) + std::log((double)c.g.pieces.size()) / beta;
    double vol = to_double(volume(c.base)), m0 = 0, mt = 0;
    bool same = true;
    for (size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(s.phi_dot[i]) <= gmax);
      m0 += s.weight[i] * ctx.rho0[i];
      mt += s.weight[i] * s.rho[i];
      same = same && s.phi[i] == ser.phi[i] && s.S[i] == ser.S[i] &&
             s.log_volume_ratio[i] == ser.log_volume_ratio[i];
      Eigen::SelfAdjointEigenSolver<Mat> es(s.hessian[i]);
      CHECK(es.eigenvalues().minCoeff() > 0);
      // componentwise backward error: entries span many decades near the box edges
      Mat E = s.hessian[i] * s.inv_hessian[i] - Mat::Identity(c.base.dim, c.base.dim);
      Mat B = s.hessian[i].cwiseAbs() * s.inv_hessian[i].cwiseAbs();
      CHECK((E.cwiseAbs() - 1e-10 * B).maxCoeff() <= 0);
    }
    CHECK(same);
    // the 2d node cap widens panels past the 1/beta transition width
    double tol = c.base.dim == 1 ? 1e-6 : 1e-3;
    CHECK(std::abs(m0 - vol) <= 1e-6 * vol);
    CHECK(std::abs(mt - vol) <= tol * vol);
  }
}

TEST_CASE("phi is convex in tau at fixed dual points") {
  auto c = cfg_of(square(), {aff({1, 0}, 0), aff({0, 1}, 0), aff({-1, -1}, 1)});
  BoxOptions opt;
  opt.quad_order = 2;
  RayContext ctx = make_ray_context(c, 1, 20, opt);
  for (Vec xi : {vec({0.0, 0.0}), vec({3.0, -1.0}), vec({-5.0, -5.0})})
    for (double t1 : {0.0, 1.0, 3.0}) {
      double t2 = t1 + 2;
      double a = phi_at(ctx, t1, xi), b = phi_at(ctx, t2, xi), m = phi_at(ctx, 0.5 * (t1 + t2), xi);
      CHECK(b >= 2 * m - a - 1e-12);
    }
}

TEST_CASE("ray state CSV") {
  auto c = cfg_of(interval(), {aff({1}, 0)});
  BoxOptions opt;
  opt.quad_order = 2;
  RayContext ctx = make_ray_context(c, 1, 10, opt);
  std::ostringstream os;
  write_ray_csv(os, ctx, ray_state(ctx, 1.0));
  std::string out = os.str();
  CHECK(out.rfind("x0,y0,weight,phi,phi_dot,logdet,S\n", 0) == 0);
  CHECK(std::count(out.begin(), out.end(), '\n') == (long)ctx.grid.size() + 1);
}
