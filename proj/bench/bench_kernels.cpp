// Serial reference vs OpenMP per-node kernels on the same ray context.
#include "kstab/functionals.hpp"
#include "kstab/toric.hpp"

#include <benchmark/benchmark.h>

using namespace kstab;

namespace {

Polytope unit_square() {
  std::vector<Halfspace> hs{{{-1, 0}, 0}, {{1, 0}, 1}, {{0, -1}, 0}, {{0, 1}, 1}};
  return from_halfspaces(2, hs);
}

ToricTestConfig square_pl() {
  Polytope P = unit_square();
  AffineFn x{{1, 0}, 0}, y{{0, 1}, 0};
  return normalize(make_config(P, make_pl(P, {x, y})), Normalization::min_zero);
}

const RayContext& context(Exec e) {
  static BoxOptions bo = [] {
    BoxOptions b;
    b.quad_order = 8;
    b.max_nodes = 60000;
    return b;
  }();
  static RayContext ser = make_ray_context(square_pl(), 2, 20, bo, Exec::serial);
  static RayContext par = make_ray_context(square_pl(), 2, 20, bo, Exec::parallel);
  return e == Exec::serial ? ser : par;
}

void ray_state_kernel(benchmark::State& st, Exec e) {
  const RayContext& ctx = context(e);
  for (auto _ : st) {
    RayState s = ray_state(ctx, 2, nullptr, e);
    benchmark::DoNotOptimize(s.phi.data());
  }
  st.counters["nodes"] = (double)ctx.xi.size();
  st.counters["threads"] = e == Exec::serial ? 1 : configured_threads();
}

void path_kernel(benchmark::State& st, Exec e) {
  const RayContext& ctx = context(e);
  PathOptions po;
  po.exec = e;
  po.rel_tol = 1e-4;
  for (auto _ : st) {
    auto pts = evaluate_path(ctx, {0.5}, nullptr, po);
    benchmark::DoNotOptimize(pts.back().am);
  }
}

}  // namespace

BENCHMARK_CAPTURE(ray_state_kernel, serial, Exec::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(ray_state_kernel, parallel, Exec::parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(path_kernel, serial, Exec::serial)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK_CAPTURE(path_kernel, parallel, Exec::parallel)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
