#include <cmath>
#include <random>

#include <doctest.h>

#include "support.hpp"
#include "tabgnn/kernels.hpp"

using namespace tabgnn;
using namespace tabgnn::kernels;
using support::random_matrix;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Neighborhood random_hood(std::size_t n, double p, std::mt19937_64& rng) {
  return build_neighborhood(n, support::random_edges(n, 1, p, true, rng).front());
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("matmul_nt matches a triple loop") {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(7, 5, rng), b = random_matrix(4, 5, rng);
  for (Exec e : {Exec::kSerial, Exec::kParallel}) {
    Matrix c;
    kernels::kernels(e).matmul_nt(a, b, c);
    REQUIRE(c.rows() == 7);
    REQUIRE(c.cols() == 4);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 5; ++k) s += a(i, k) * b(j, k);
        CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-12));
      }
  }
}

TEST_CASE("matmul_nt_backward matches a triple loop and accumulates") {
  std::mt19937_64 rng(2);
  const Matrix a = random_matrix(6, 3, rng), b = random_matrix(4, 3, rng), dc = random_matrix(6, 4, rng);
  Matrix da(6, 3, 1.0), db(4, 3, 1.0);
  serial::kSet.matmul_nt_backward(a, b, dc, &da, db);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 1.0;
      for (std::size_t j = 0; j < 4; ++j) s += dc(i, j) * b(j, k);
      CHECK(da(i, k) == doctest::Approx(s).epsilon(1e-12));
    }
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 1.0;
      for (std::size_t i = 0; i < 6; ++i) s += dc(i, j) * a(i, k);
      CHECK(db(j, k) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("parallel kernels reproduce the serial reference") {
  std::mt19937_64 rng(3);
  const std::size_t n = 300, d = 8, heads = 2;
  const Neighborhood hood = random_hood(n, 0.03, rng);
  const Matrix x = random_matrix(n, d, rng);
  const Matrix attn = random_matrix(heads, 2 * d, rng, 0.5);

  Matrix cs, cp;
  const Matrix w = random_matrix(12, d, rng);
  serial::kSet.matmul_nt(x, w, cs);
  parallel::kSet.matmul_nt(x, w, cp);
  CHECK(max_abs_diff(cs, cp) == 0.0);

  const Matrix dc = random_matrix(n, 12, rng);
  Matrix das(n, d), dbs(12, d), dap(n, d), dbp(12, d);
  serial::kSet.matmul_nt_backward(x, w, dc, &das, dbs);
  parallel::kSet.matmul_nt_backward(x, w, dc, &dap, dbp);
  CHECK(max_abs_diff(das, dap) < 1e-12);
  CHECK(max_abs_diff(dbs, dbp) < 1e-10);

  for (AggKind kind : {AggKind::kAttention, AggKind::kMean, AggKind::kSum}) {
    CAPTURE(static_cast<int>(kind));
    const std::size_t ch = channels(kind, heads);
    AggregateBuffers fs, fp;
    serial::kSet.aggregate_forward(hood, x, attn, kind, heads, fs);
    parallel::kSet.aggregate_forward(hood, x, attn, kind, heads, fp);
    CHECK(max_abs_diff(fs.agg, fp.agg) < 1e-12);
    if (kind == AggKind::kAttention) CHECK(max_abs_diff(fs.alpha, fp.alpha) < 1e-12);

    const Matrix dagg = random_matrix(n, ch * d, rng);
    Matrix dxs(n, d), dxp(n, d), dattn_s(heads, 2 * d), dattn_p(heads, 2 * d);
    serial::kSet.aggregate_backward(hood, x, attn, kind, heads, fs, dagg, dxs, dattn_s);
    parallel::kSet.aggregate_backward(hood, x, attn, kind, heads, fp, dagg, dxp, dattn_p);
    CHECK(max_abs_diff(dxs, dxp) < 1e-10);
    CHECK(max_abs_diff(dattn_s, dattn_p) < 1e-9);

    const Matrix wl = random_matrix(4 * ch, d, rng);
    Matrix ps, pp;
    serial::kSet.channel_linear(fs.agg, wl, ch, ps);
    parallel::kSet.channel_linear(fp.agg, wl, ch, pp);
    CHECK(max_abs_diff(ps, pp) < 1e-12);
    const Matrix dpre = random_matrix(n, 4 * ch, rng);
    Matrix dgs, dgp, dws(4 * ch, d), dwp(4 * ch, d);
    serial::kSet.channel_linear_backward(fs.agg, wl, ch, dpre, dgs, dws);
    parallel::kSet.channel_linear_backward(fp.agg, wl, ch, dpre, dgp, dwp);
    CHECK(max_abs_diff(dgs, dgp) < 1e-12);
    CHECK(max_abs_diff(dws, dwp) < 1e-10);
  }
}

TEST_CASE("attention weights are a distribution over each neighborhood") {
  std::mt19937_64 rng(4);
  const std::size_t n = 50, d = 4, heads = 4;
  const Neighborhood hood = random_hood(n, 0.1, rng);
  const Matrix x = random_matrix(n, d, rng, 3.0);
  const Matrix attn = random_matrix(heads, 2 * d, rng, 3.0);
  AggregateBuffers b;
  parallel::kSet.aggregate_forward(hood, x, attn, AggKind::kAttention, heads, b);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t k = 0; k < heads; ++k) {
      double total = 0.0;
      for (std::size_t s = hood.offsets[v]; s < hood.offsets[v + 1]; ++s) {
        CHECK(b.alpha(s, k) >= 0.0);
        total += b.alpha(s, k);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("isolated nodes aggregate to themselves") {
  std::mt19937_64 rng(5);
  const Neighborhood hood = build_neighborhood(3, EdgeSet{"r", {}, true});
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix attn = random_matrix(2, 8, rng);
  for (AggKind kind : {AggKind::kAttention, AggKind::kMean, AggKind::kSum}) {
    AggregateBuffers b;
    serial::kSet.aggregate_forward(hood, x, attn, kind, 2, b);
    for (std::size_t c = 0; c < channels(kind, 2); ++c)
      for (std::size_t v = 0; v < 3; ++v)
        for (std::size_t j = 0; j < 4; ++j) CHECK(b.agg(v, c * 4 + j) == doctest::Approx(x(v, j)));
  }
}

}
