#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tabgnn/kernels.hpp"

namespace tabgnn::kernels {

const KernelSet& kernels(Exec exec) { return exec == Exec::kSerial ? serial::kSet : parallel::kSet; }

namespace parallel {

namespace {

constexpr std::size_t kChunks = 64;

using Index = std::ptrdiff_t;

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
  c = Matrix(n, m);
#pragma omp parallel for schedule(static)
  for (Index ii = 0; ii < static_cast<Index>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.data() + j * k;
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += ai[t] * bj[t];
      c(i, j) = s;
    }
  }
}

void matmul_nt_backward(const Matrix& a, const Matrix& b, const Matrix& dc, Matrix* da, Matrix& db) {
  const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
  if (da) {
#pragma omp parallel for schedule(static)
    for (Index ii = 0; ii < static_cast<Index>(n); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      double* out = da->data() + i * k;
      for (std::size_t j = 0; j < m; ++j) {
        const double g = dc(i, j);
        const double* bj = b.data() + j * k;
        for (std::size_t t = 0; t < k; ++t) out[t] += g * bj[t];
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (Index jj = 0; jj < static_cast<Index>(m); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double* out = db.data() + j * k;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = dc(i, j);
      const double* ai = a.data() + i * k;
      for (std::size_t t = 0; t < k; ++t) out[t] += g * ai[t];
    }
  }
}

// Node-centric: each thread owns whole neighborhoods.
void aggregate_forward(const Neighborhood& hood, const Matrix& x, const Matrix& attn, AggKind kind,
                       std::size_t heads, AggregateBuffers& out) {
  const std::size_t n = hood.n_nodes(), d = x.cols(), slots = hood.n_slots();
  const std::size_t ch = channels(kind, heads);
  out.alpha = Matrix(slots, ch);
  out.score = Matrix(slots, ch);
  out.agg = Matrix(n, ch * d);
#pragma omp parallel for schedule(dynamic, 64)
  for (Index vv = 0; vv < static_cast<Index>(n); ++vv) {
    const auto v = static_cast<std::size_t>(vv);
    const std::size_t lo = hood.offsets[v], hi = hood.offsets[v + 1];
    double* agg = out.agg.data() + v * ch * d;
    if (kind != AggKind::kAttention) {
      const double deg = static_cast<double>(hi - lo);
      for (std::size_t s = lo; s < hi; ++s) {
        const double* xu = x.data() + static_cast<std::size_t>(hood.nodes[s]) * d;
        for (std::size_t j = 0; j < d; ++j) agg[j] += xu[j];
        out.alpha(s, 0) = kind == AggKind::kMean ? 1.0 / deg : 1.0;
      }
      if (kind == AggKind::kMean)
        for (std::size_t j = 0; j < d; ++j) agg[j] /= deg;
      continue;
    }
    const double* xv = x.data() + v * d;
    for (std::size_t h = 0; h < ch; ++h) {
      const double* al = attn.data() + h * 2 * d;
      const double* ar = al + d;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t s = lo; s < hi; ++s) {
        const double* xu = x.data() + static_cast<std::size_t>(hood.nodes[s]) * d;
        double e = 0.0;
        for (std::size_t j = 0; j < d; ++j) e += al[j] * xv[j] + ar[j] * xu[j];
        out.score(s, h) = e;
        const double l = e > 0.0 ? e : kLeakySlope * e;
        out.alpha(s, h) = l;
        mx = std::max(mx, l);
      }
      double z = 0.0;
      for (std::size_t s = lo; s < hi; ++s) {
        out.alpha(s, h) = std::exp(out.alpha(s, h) - mx);
        z += out.alpha(s, h);
      }
      for (std::size_t s = lo; s < hi; ++s) out.alpha(s, h) /= z;
      for (std::size_t s = lo; s < hi; ++s) {
        const double* xu = x.data() + static_cast<std::size_t>(hood.nodes[s]) * d;
        const double a = out.alpha(s, h);
        for (std::size_t j = 0; j < d; ++j) agg[h * d + j] += a * xu[j];
      }
    }
  }
}

// Gather form: per-slot logit gradients first, then every node collects its
// own contributions through the reverse index.
void aggregate_backward(const Neighborhood& hood, const Matrix& x, const Matrix& attn, AggKind kind,
                        std::size_t heads, const AggregateBuffers& fwd, const Matrix& dagg, Matrix& dx,
                        Matrix& dattn) {
  const std::size_t n = hood.n_nodes(), d = x.cols(), slots = hood.n_slots();
  const std::size_t ch = channels(kind, heads);
  const bool attention = kind == AggKind::kAttention;
  std::vector<double> de(attention ? slots * ch : 0);
  if (attention) {
#pragma omp parallel for schedule(dynamic, 64)
    for (Index vv = 0; vv < static_cast<Index>(n); ++vv) {
      const auto v = static_cast<std::size_t>(vv);
      const std::size_t lo = hood.offsets[v], hi = hood.offsets[v + 1];
      for (std::size_t h = 0; h < ch; ++h) {
        const double* g = dagg.data() + v * ch * d + h * d;
        double c = 0.0;
        for (std::size_t s = lo; s < hi; ++s) {
          const double* xu = x.data() + static_cast<std::size_t>(hood.nodes[s]) * d;
          double da = 0.0;
          for (std::size_t j = 0; j < d; ++j) da += g[j] * xu[j];
          de[s * ch + h] = da;
          c += fwd.alpha(s, h) * da;
        }
        for (std::size_t s = lo; s < hi; ++s) {
          const double e = fwd.score(s, h);
          de[s * ch + h] = fwd.alpha(s, h) * (de[s * ch + h] - c) * (e > 0.0 ? 1.0 : kLeakySlope);
        }
      }
    }
  }
#pragma omp parallel for schedule(dynamic, 64)
  for (Index uu = 0; uu < static_cast<Index>(n); ++uu) {
    const auto u = static_cast<std::size_t>(uu);
    double* out = dx.data() + u * d;
    for (std::size_t r = hood.rev_offsets[u]; r < hood.rev_offsets[u + 1]; ++r) {
      const std::size_t s = hood.rev_slots[r];
      const std::size_t v = hood.owner[s];
      for (std::size_t h = 0; h < ch; ++h) {
        const double a = fwd.alpha(s, h);
        const double* g = dagg.data() + v * ch * d + h * d;
        for (std::size_t j = 0; j < d; ++j) out[j] += a * g[j];
        if (attention) {
          const double* ar = attn.data() + h * 2 * d + d;
          const double e = de[s * ch + h];
          for (std::size_t j = 0; j < d; ++j) out[j] += e * ar[j];
        }
      }
    }
    if (attention) {
      for (std::size_t s = hood.offsets[u]; s < hood.offsets[u + 1]; ++s)
        for (std::size_t h = 0; h < ch; ++h) {
          const double* al = attn.data() + h * 2 * d;
          const double e = de[s * ch + h];
          for (std::size_t j = 0; j < d; ++j) out[j] += e * al[j];
        }
    }
  }
  if (!attention) return;
  const std::size_t width = ch * 2 * d;
  std::vector<double> partial(kChunks * width, 0.0);
#pragma omp parallel for schedule(static)
  for (Index cc = 0; cc < static_cast<Index>(kChunks); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const std::size_t lo = slots * c / kChunks, hi = slots * (c + 1) / kChunks;
    double* acc = partial.data() + c * width;
    for (std::size_t s = lo; s < hi; ++s) {
      const double* xv = x.data() + static_cast<std::size_t>(hood.owner[s]) * d;
      const double* xu = x.data() + static_cast<std::size_t>(hood.nodes[s]) * d;
      for (std::size_t h = 0; h < ch; ++h) {
        const double e = de[s * ch + h];
        double* row = acc + h * 2 * d;
        for (std::size_t j = 0; j < d; ++j) {
          row[j] += e * xv[j];
          row[d + j] += e * xu[j];
        }
      }
    }
  }
  for (std::size_t c = 0; c < kChunks; ++c)
    for (std::size_t i = 0; i < width; ++i) dattn[i] += partial[c * width + i];
}

void channel_linear(const Matrix& agg, const Matrix& w, std::size_t ch, Matrix& pre) {
  const std::size_t n = agg.rows(), d_out = w.rows(), d = w.cols(), block = d_out / ch;
  pre = Matrix(n, d_out);
#pragma omp parallel for schedule(static)
  for (Index vv = 0; vv < static_cast<Index>(n); ++vv) {
    const auto v = static_cast<std::size_t>(vv);
    for (std::size_t i = 0; i < d_out; ++i) {
      const std::size_t c = ch == 1 ? 0 : i / block;
      const double* a = agg.data() + v * ch * d + c * d;
      const double* wi = w.data() + i * d;
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += wi[j] * a[j];
      pre(v, i) = s;
    }
  }
}

void channel_linear_backward(const Matrix& agg, const Matrix& w, std::size_t ch, const Matrix& dpre, Matrix& dagg,
                             Matrix& dw) {
  const std::size_t n = agg.rows(), d_out = w.rows(), d = w.cols(), block = d_out / ch;
  dagg = Matrix(n, ch * d);
#pragma omp parallel for schedule(static)
  for (Index vv = 0; vv < static_cast<Index>(n); ++vv) {
    const auto v = static_cast<std::size_t>(vv);
    for (std::size_t i = 0; i < d_out; ++i) {
      const std::size_t c = ch == 1 ? 0 : i / block;
      const double g = dpre(v, i);
      double* out = dagg.data() + v * ch * d + c * d;
      const double* wi = w.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) out[j] += g * wi[j];
    }
  }
#pragma omp parallel for schedule(static)
  for (Index ii = 0; ii < static_cast<Index>(d_out); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t c = ch == 1 ? 0 : i / block;
    double* out = dw.data() + i * d;
    for (std::size_t v = 0; v < n; ++v) {
      const double g = dpre(v, i);
      const double* a = agg.data() + v * ch * d + c * d;
      for (std::size_t j = 0; j < d; ++j) out[j] += g * a[j];
    }
  }
}

}  // namespace

const KernelSet kSet{matmul_nt, matmul_nt_backward, aggregate_forward, aggregate_backward, channel_linear,
                     channel_linear_backward};

}  // namespace parallel
}  // namespace tabgnn::kernels
