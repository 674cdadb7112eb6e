#pragma once

#include <cstddef>

#include "tabgnn/graph.hpp"
#include "tabgnn/matrix.hpp"

// Hot loops of the model. Every kernel exists twice: an OpenMP version that
// parallelizes over output rows (gathering through the reverse neighborhood
// index instead of scattering, so no two threads write the same value) and a
// plain serial version kept as the reference for tests and benchmarks.
// Parallel reductions use a fixed chunking, so results do not depend on the
// thread count.
namespace tabgnn::kernels {

enum class Exec { kSerial, kParallel };
enum class AggKind { kAttention, kMean, kSum };

inline constexpr double kLeakySlope = 0.2;

struct AggregateBuffers {
  Matrix alpha;  // n_slots x A: normalized neighbor weights
  Matrix score;  // n_slots x A: attention logits before the leaky rectifier
  Matrix agg;    // n x (A * d): per-head weighted sums
};

// Number of aggregation channels: one per head for attention, else one.
inline std::size_t channels(AggKind kind, std::size_t heads) { return kind == AggKind::kAttention ? heads : 1; }

struct KernelSet {
  // c = a * b^T, a: n x k, b: m x k.
  void (*matmul_nt)(const Matrix& a, const Matrix& b, Matrix& c);
  // da += dc * b (skipped when da is null), db += dc^T * a.
  void (*matmul_nt_backward)(const Matrix& a, const Matrix& b, const Matrix& dc, Matrix* da, Matrix& db);

  // Weighted sum of x over each node's extended neighborhood. Attention
  // weights are softmax_u(leaky(attn_l . x_v + attn_r . x_u)) per head, with
  // attn = [attn_l | attn_r] of shape heads x 2d.
  void (*aggregate_forward)(const Neighborhood& hood, const Matrix& x, const Matrix& attn, AggKind kind,
                            std::size_t heads, AggregateBuffers& out);
  // dx += d(agg)/dx^T dagg, dattn += d(agg)/dattn^T dagg.
  void (*aggregate_backward)(const Neighborhood& hood, const Matrix& x, const Matrix& attn, AggKind kind,
                             std::size_t heads, const AggregateBuffers& fwd, const Matrix& dagg, Matrix& dx,
                             Matrix& dattn);

  // pre[v, block c] = w[block c] * agg[v, channel c]; w: d_out x d with
  // d_out split into `ch` equal row blocks.
  void (*channel_linear)(const Matrix& agg, const Matrix& w, std::size_t ch, Matrix& pre);
  // dagg = per-channel w^T dpre (overwritten), dw += dpre^T agg.
  void (*channel_linear_backward)(const Matrix& agg, const Matrix& w, std::size_t ch, const Matrix& dpre,
                                  Matrix& dagg, Matrix& dw);
};

const KernelSet& kernels(Exec exec);

namespace serial {
extern const KernelSet kSet;
}
namespace parallel {
extern const KernelSet kSet;
}

}  // namespace tabgnn::kernels
