#include "doctest.h"
#include "fixtures.hpp"
#include "kstab/errors.hpp"
#include "kstab/invariants.hpp"
#include "kstab/slope_lab.hpp"

#include <cmath>

using namespace fx;

namespace {

ToricTestConfig cfg_of(const Polytope& P, std::vector<AffineFn> p,
                       Normalization m = Normalization::min_zero) {
  return normalize(make_config(P, make_pl(P, p)), m);
}

template <class F>
std::vector<TracePoint> sample(F f, std::vector<double> taus) {
  std::vector<TracePoint> t;
  for (double x : taus) t.push_back({x, f(x), 0, 0});
  return t;
}

}  // namespace

TEST_CASE("limit slope estimator") {
  auto lin = estimate_limit_slope(sample([](double t) { return 3 * t + 7; }, {1, 2, 4, 6, 8, 10, 12}));
  CHECK(lin.value == doctest::Approx(3).epsilon(1e-13));
  CHECK(lin.residual <= 1e-12);
  CHECK(lin.samples_used == 5);
  auto dec = estimate_limit_slope(
      sample([](double t) { return 5 + 2 * std::exp(-t); }, {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));
  CHECK(std::abs(dec.value) <= 1e-6);
  CHECK(dec.model == SlopeModel::exp_fit);
  auto syn = estimate_limit_slope(
      sample([](double t) { return 0.5 * t + 10 * std::exp(-t); }, {1, 2, 4, 6, 8, 10, 12}));
  CHECK(std::abs(syn.value - 0.5) <= 1e-4);
  CHECK(syn.residual >= 0);
  CHECK_THROWS_WITH_AS(estimate_limit_slope(sample([](double t) { return t; }, {1, 2, 4, 8, 10})),
                       doctest::Contains("InsufficientSamples"), Error);
  CHECK_THROWS_WITH_AS(estimate_limit_slope(sample([](double t) { return t; }, {1, 2, 3, 4, 5, 6, 7})),
                       doctest::Contains("InsufficientSamples"), Error);
  CHECK_THROWS_WITH_AS(estimate_limit_slope(sample([](double t) { return t; }, {1, 2, 4, 4, 8, 10, 12})),
                       doctest::Contains("NonMonotoneTau"), Error);
}

TEST_CASE("AM, DF, MINNORM, JALPHA on the interval with affine g") {
  auto c = cfg_of(interval(), {aff({1}, 0)});
  Theorem ja{TheoremKind::JALPHA, {}, from_vertices(1, {{R(0)}, {R(2)}})};
  auto vs = verify_theorems(c, {{TheoremKind::AM}, {TheoremKind::DF}, {TheoremKind::MINNORM}, ja});
  REQUIRE(vs.size() == 4);
  for (auto& v : vs) {
    INFO(v.theorem, " slope ", v.slope.value, " exact ", to_double(v.exact));
    CHECK(v.pass);
    CHECK(v.certified);
    CHECK(v.trace.size() == 7);
  }
  CHECK(vs[0].exact == R(-1));
  CHECK(vs[1].exact == 0);
  CHECK(std::abs(vs[1].slope.value) <= 1e-3);
  CHECK(std::abs(vs[0].slope.value + 1) <= 1e-6);
  // the JALPHA run shares its paths with DF and MINNORM
  CHECK(vs[2].states.size() == vs[3].states.size());
  auto j = verdict_json(vs[0]);
  CHECK(j["exact"] == "-1/1");
  CHECK(j["tier"] == "certified");
  CHECK(verdict_json(vs[3])["pass"] == true);
}

TEST_CASE("POINT theorem at the two vertices of the interval") {
  auto c = cfg_of(interval(), {aff({1}, 0)});
  auto v0 = verify_theorem(c, {TheoremKind::POINT, {R(0)}, {}});
  auto v1 = verify_theorem(c, {TheoremKind::POINT, {R(1)}, {}});
  CHECK(v0.exact == R(1, 2));
  CHECK(v1.exact == R(-1, 2));
  CHECK(v0.pass);
  CHECK(v1.pass);
  CHECK(std::abs(v0.slope.value - 0.5) <= 1e-9);
  CHECK(v0.slope.value * v1.slope.value < 0);
  CHECK_THROWS_WITH_AS(verify_theorem(c, {TheoremKind::POINT, {R(1, 2)}, {}}),
                       doctest::Contains("NotAVertex"), Error);
  CHECK_THROWS_WITH_AS(verify_theorem(c, {TheoremKind::JALPHA}), doctest::Contains("MissingAlpha"), Error);
}

TEST_CASE("POINT theorem on a PL configuration") {
  auto c = cfg_of(interval(), {aff({1}, 0), aff({-1}, 1)});
  for (auto v : {R(0), R(1)}) {
    auto r = verify_theorem(c, {TheoremKind::POINT, {v}, {}});
    CHECK_FALSE(r.certified);
    CHECK(r.exact == R(-1, 4));
    CHECK(r.pass);
  }
}

TEST_CASE("destabilizer scans") {
  auto flat = cfg_of(interval(), {aff({0}, 0)});
  auto a = scan_vertices(flat);
  CHECK_FALSE(a.destabilizing);
  CHECK(a.value == 0);
  auto c = cfg_of(interval(), {aff({1}, 0)});
  auto b = scan_vertices(c);
  CHECK(b.destabilizing);
  CHECK(*b.exact == R(1, 2));
  CHECK(b.point == std::vector<double>{1.0});
  auto sq = cfg_of(square(), {aff({1, 0}, 0), aff({0, 1}, 0)});
  CHECK(minimum_norm(sq) > 0);
  CHECK(scan_vertices(sq).destabilizing);
  // interior points flow to the minimum of g: Ch_p = min g - avg g < 0
  auto p = scan_points(c, {{0.25}, {0.5}, {0.75}});
  CHECK_FALSE(p.destabilizing);
  for (double v : p.values) CHECK(v == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(destabilizer_json(b)["exact"] == "1/2");
}
