// Times the serial reference kernels against the OpenMP ones on a random
// graph and checks that both produce the same values.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include <omp.h>

#include "tabgnn/graph.hpp"
#include "tabgnn/kernels.hpp"

using namespace tabgnn;
using kernels::AggKind;
using kernels::Exec;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(r, c);
  for (auto& v : m.values()) v = d(rng);
  return m;
}

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

double max_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::stoul(argv[1]) : 20000;
  const std::size_t avg_degree = 20, d = 64, heads = 4;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  EdgeSet es{"bench", {}, true};
  for (std::size_t i = 0; i < n * avg_degree; ++i) {
    NodeId a = pick(rng), b = pick(rng);
    if (a != b) es.edges.emplace_back(a, b);
  }
  std::sort(es.edges.begin(), es.edges.end());
  es.edges.erase(std::unique(es.edges.begin(), es.edges.end()), es.edges.end());
  const Neighborhood hood = build_neighborhood(n, es);

  const Matrix h = random_matrix(n, d, rng), m = random_matrix(d, d, rng);
  const Matrix attn = random_matrix(heads, 2 * d, rng), w = random_matrix(d, d, rng);
  std::printf("nodes %zu  edges %zu  width %zu  heads %zu  threads %d\n", n, es.edges.size(), d, heads,
              omp_get_max_threads());
  std::printf("%-22s %12s %12s %8s %10s\n", "kernel", "serial ms", "parallel ms", "speedup", "max diff");

  auto report = [](const char* name, double s, double p, double diff) {
    std::printf("%-22s %12.2f %12.2f %8.2f %10.2e\n", name, s, p, s / p, diff);
  };

  Matrix cs, cp;
  const double mm_s = best_of(3, [&] { kernels::kernels(Exec::kSerial).matmul_nt(h, m, cs); });
  const double mm_p = best_of(3, [&] { kernels::kernels(Exec::kParallel).matmul_nt(h, m, cp); });
  report("matmul_nt", mm_s, mm_p, max_diff(cs, cp));

  kernels::AggregateBuffers bs, bp;
  const double ag_s = best_of(3, [&] {
    kernels::kernels(Exec::kSerial).aggregate_forward(hood, cs, attn, AggKind::kAttention, heads, bs);
  });
  const double ag_p = best_of(3, [&] {
    kernels::kernels(Exec::kParallel).aggregate_forward(hood, cs, attn, AggKind::kAttention, heads, bp);
  });
  report("aggregate_forward", ag_s, ag_p, max_diff(bs.agg, bp.agg));

  const Matrix dagg = random_matrix(n, heads * d, rng);
  Matrix dxs(n, d), dxp(n, d), das(heads, 2 * d), dap(heads, 2 * d);
  const double bw_s = best_of(1, [&] {
    kernels::kernels(Exec::kSerial).aggregate_backward(hood, cs, attn, AggKind::kAttention, heads, bs, dagg, dxs, das);
  });
  const double bw_p = best_of(1, [&] {
    kernels::kernels(Exec::kParallel).aggregate_backward(hood, cs, attn, AggKind::kAttention, heads, bp, dagg, dxp,
                                                         dap);
  });
  report("aggregate_backward", bw_s, bw_p, std::max(max_diff(dxs, dxp), max_diff(das, dap)));

  Matrix wh(heads * 16, d), ps, pp;
  for (auto& v : wh.values()) v = std::normal_distribution<double>(0.0, 1.0)(rng);
  const double cl_s = best_of(3, [&] { kernels::kernels(Exec::kSerial).channel_linear(bs.agg, wh, heads, ps); });
  const double cl_p = best_of(3, [&] { kernels::kernels(Exec::kParallel).channel_linear(bp.agg, wh, heads, pp); });
  report("channel_linear", cl_s, cl_p, max_diff(ps, pp));
  return 0;
}
