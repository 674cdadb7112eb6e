#include "tabgnn/homogeneous.hpp"

#include <algorithm>
#include <cmath>

#include "tabgnn/error.hpp"

namespace tabgnn {

std::vector<std::vector<NodeId>> merged_neighbors(const MultiplexGraph& graph) {
  const std::size_t n = graph.n_nodes();
  std::vector<std::vector<NodeId>> sources(n);
  for (const auto& set : graph.edge_sets())
    for (const auto& [a, b] : set.edges) {
      sources[b].push_back(a);
      if (!set.directed) sources[a].push_back(b);
    }
  std::vector<std::vector<NodeId>> out(n);
  for (std::size_t v = 0; v < n; ++v) {
    auto& s = sources[v];
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    out[v].push_back(static_cast<NodeId>(v));
    out[v].insert(out[v].end(), s.begin(), s.end());
  }
  return out;
}

HomogeneousOutput homogeneous_forward(const Model& model, const MultiplexGraph& graph, const Features& features) {
  const ModelDims& d = model.dims;
  if (d.n_relations != 1 || d.hops != 1 || d.agg != AggKind::kMean)
    throw ValidationError("homogeneous path needs one relation, one hop and mean aggregation");
  const Matrix h = encode_forward(d.encoder, model.params.encoder, features, Exec::kSerial);
  const Matrix& m = model.params.relations[0].projection;
  const Matrix& w = model.params.relations[0].hops[0].weight;
  const std::size_t n = features.n_rows;

  Matrix proj(n, d.proj_dim);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t i = 0; i < d.proj_dim; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < h.cols(); ++k) s += h(v, k) * m(i, k);
      proj(v, i) = s;
    }

  const auto nbrs = merged_neighbors(graph);
  HomogeneousOutput out{Matrix(n, d.out_dim), std::vector<double>(n)};
  std::vector<double> mean(d.proj_dim);
  for (std::size_t v = 0; v < n; ++v) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (NodeId u : nbrs[v])
      for (std::size_t k = 0; k < d.proj_dim; ++k) mean[k] += proj(u, k);
    for (auto& x : mean) x /= static_cast<double>(nbrs[v].size());
    for (std::size_t i = 0; i < d.out_dim; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d.proj_dim; ++k) s += w(i, k) * mean[k];
      out.z(v, i) = s > 0.0 ? s : 0.0;
    }
    double logit = model.params.head.bias[0];
    for (std::size_t i = 0; i < d.out_dim; ++i) logit += model.params.head.w[i] * out.z(v, i);
    if (d.task == Task::kRegression) {
      out.outputs[v] = logit;
    } else if (logit >= 0.0) {
      out.outputs[v] = 1.0 / (1.0 + std::exp(-logit));
    } else {
      const double e = std::exp(logit);
      out.outputs[v] = e / (1.0 + e);
    }
  }
  return out;
}

}  // namespace tabgnn
