#include <algorithm>
#include <cmath>
#include <limits>

#include "tabgnn/kernels.hpp"

namespace tabgnn::kernels::serial {

namespace {

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
  c = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a(i, t) * b(j, t);
      c(i, j) = s;
    }
}

void matmul_nt_backward(const Matrix& a, const Matrix& b, const Matrix& dc, Matrix* da, Matrix& db) {
  const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double g = dc(i, j);
      for (std::size_t t = 0; t < k; ++t) {
        if (da) (*da)(i, t) += g * b(j, t);
        db(j, t) += g * a(i, t);
      }
    }
}

// Edge-centric: all logits first, per-node softmax, then scatter-add.
void aggregate_forward(const Neighborhood& hood, const Matrix& x, const Matrix& attn, AggKind kind,
                       std::size_t heads, AggregateBuffers& out) {
  const std::size_t n = hood.n_nodes(), d = x.cols(), slots = hood.n_slots();
  const std::size_t ch = channels(kind, heads);
  out.alpha = Matrix(slots, ch);
  out.score = Matrix(slots, ch);
  out.agg = Matrix(n, ch * d);
  if (kind != AggKind::kAttention) {
    for (std::size_t s = 0; s < slots; ++s) {
      const NodeId v = hood.owner[s], u = hood.nodes[s];
      for (std::size_t j = 0; j < d; ++j) out.agg(v, j) += x(u, j);
    }
    for (std::size_t v = 0; v < n; ++v) {
      const double deg = static_cast<double>(hood.degree(static_cast<NodeId>(v)));
      for (std::size_t s = hood.offsets[v]; s < hood.offsets[v + 1]; ++s)
        out.alpha(s, 0) = kind == AggKind::kMean ? 1.0 / deg : 1.0;
      if (kind == AggKind::kMean)
        for (std::size_t j = 0; j < d; ++j) out.agg(v, j) /= deg;
    }
    return;
  }
  for (std::size_t s = 0; s < slots; ++s) {
    const NodeId v = hood.owner[s], u = hood.nodes[s];
    for (std::size_t h = 0; h < ch; ++h) {
      double e = 0.0;
      for (std::size_t j = 0; j < d; ++j) e += attn(h, j) * x(v, j) + attn(h, d + j) * x(u, j);
      out.score(s, h) = e;
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t lo = hood.offsets[v], hi = hood.offsets[v + 1];
    for (std::size_t h = 0; h < ch; ++h) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t s = lo; s < hi; ++s) {
        const double e = out.score(s, h);
        out.alpha(s, h) = e > 0.0 ? e : kLeakySlope * e;
        mx = std::max(mx, out.alpha(s, h));
      }
      double z = 0.0;
      for (std::size_t s = lo; s < hi; ++s) {
        out.alpha(s, h) = std::exp(out.alpha(s, h) - mx);
        z += out.alpha(s, h);
      }
      for (std::size_t s = lo; s < hi; ++s) out.alpha(s, h) /= z;
    }
  }
  for (std::size_t s = 0; s < slots; ++s) {
    const NodeId v = hood.owner[s], u = hood.nodes[s];
    for (std::size_t h = 0; h < ch; ++h)
      for (std::size_t j = 0; j < d; ++j) out.agg(v, h * d + j) += out.alpha(s, h) * x(u, j);
  }
}

// Scatter form: walks slots and pushes contributions to both endpoints.
void aggregate_backward(const Neighborhood& hood, const Matrix& x, const Matrix& attn, AggKind kind,
                        std::size_t heads, const AggregateBuffers& fwd, const Matrix& dagg, Matrix& dx,
                        Matrix& dattn) {
  const std::size_t n = hood.n_nodes(), d = x.cols(), slots = hood.n_slots();
  const std::size_t ch = channels(kind, heads);
  for (std::size_t s = 0; s < slots; ++s) {
    const NodeId v = hood.owner[s], u = hood.nodes[s];
    for (std::size_t h = 0; h < ch; ++h)
      for (std::size_t j = 0; j < d; ++j) dx(u, j) += fwd.alpha(s, h) * dagg(v, h * d + j);
  }
  if (kind != AggKind::kAttention) return;
  std::vector<double> dalpha(slots * ch);
  for (std::size_t s = 0; s < slots; ++s) {
    const NodeId v = hood.owner[s], u = hood.nodes[s];
    for (std::size_t h = 0; h < ch; ++h) {
      double g = 0.0;
      for (std::size_t j = 0; j < d; ++j) g += dagg(v, h * d + j) * x(u, j);
      dalpha[s * ch + h] = g;
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t lo = hood.offsets[v], hi = hood.offsets[v + 1];
    for (std::size_t h = 0; h < ch; ++h) {
      double c = 0.0;
      for (std::size_t s = lo; s < hi; ++s) c += fwd.alpha(s, h) * dalpha[s * ch + h];
      for (std::size_t s = lo; s < hi; ++s) {
        const double e = fwd.score(s, h);
        const double de = fwd.alpha(s, h) * (dalpha[s * ch + h] - c) * (e > 0.0 ? 1.0 : kLeakySlope);
        const NodeId u = hood.nodes[s];
        for (std::size_t j = 0; j < d; ++j) {
          dattn(h, j) += de * x(v, j);
          dattn(h, d + j) += de * x(u, j);
          dx(v, j) += de * attn(h, j);
          dx(u, j) += de * attn(h, d + j);
        }
      }
    }
  }
}

void channel_linear(const Matrix& agg, const Matrix& w, std::size_t ch, Matrix& pre) {
  const std::size_t n = agg.rows(), d_out = w.rows(), d = w.cols(), block = d_out / ch;
  pre = Matrix(n, d_out);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t i = 0; i < d_out; ++i) {
      const std::size_t c = ch == 1 ? 0 : i / block;
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += w(i, j) * agg(v, c * d + j);
      pre(v, i) = s;
    }
}

void channel_linear_backward(const Matrix& agg, const Matrix& w, std::size_t ch, const Matrix& dpre, Matrix& dagg,
                             Matrix& dw) {
  const std::size_t n = agg.rows(), d_out = w.rows(), d = w.cols(), block = d_out / ch;
  dagg = Matrix(n, ch * d);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t i = 0; i < d_out; ++i) {
      const std::size_t c = ch == 1 ? 0 : i / block;
      const double g = dpre(v, i);
      for (std::size_t j = 0; j < d; ++j) {
        dagg(v, c * d + j) += g * w(i, j);
        dw(i, j) += g * agg(v, c * d + j);
      }
    }
}

}  // namespace

const KernelSet kSet{matmul_nt, matmul_nt_backward, aggregate_forward, aggregate_backward, channel_linear,
                     channel_linear_backward};

}  // namespace tabgnn::kernels::serial
