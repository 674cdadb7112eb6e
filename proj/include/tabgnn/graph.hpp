#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tabgnn {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Edges of one relation. Undirected sets hold each pair once as (min, max);
// directed sets hold (src, dst). Both are sorted and free of duplicates and
// self-loops once produced by the builder.
struct EdgeSet {
  std::string relation;
  std::vector<Edge> edges;
  bool directed = false;

  friend bool operator==(const EdgeSet&, const EdgeSet&) = default;
};

// Node x's extended neighborhood {x} ∪ N(x) in one layer, stored CSR-style:
// slots offsets[x]..offsets[x+1] list x itself first, then its incoming
// sources in ascending order. The reverse index lists, for each node u, the
// slots in which u appears, so gradients w.r.t. sources can be gathered
// without write conflicts.
struct Neighborhood {
  std::vector<std::size_t> offsets;
  std::vector<NodeId> nodes;
  std::vector<NodeId> owner;  // owner[slot] = x
  std::vector<std::size_t> rev_offsets;
  std::vector<std::size_t> rev_slots;

  std::size_t n_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t n_slots() const { return nodes.size(); }
  std::size_t degree(NodeId x) const { return offsets[x + 1] - offsets[x]; }
};

struct GraphLayer {
  EdgeSet edges;
  Neighborhood hood;
};

// Node set shared by R edge layers; layer order fixes relation index r.
class MultiplexGraph {
 public:
  std::size_t n_nodes() const { return n_nodes_; }
  std::size_t n_layers() const { return layers_.size(); }
  bool directed() const { return directed_; }
  const GraphLayer& layer(std::size_t r) const { return layers_[r]; }
  const std::vector<GraphLayer>& layers() const { return layers_; }
  std::vector<std::string> layer_names() const;
  // Layer edge sets exactly as passed to assemble().
  std::vector<EdgeSet> edge_sets() const;

  // Keeps the named layers in the given order.
  MultiplexGraph select(std::span<const std::string> names) const;

  friend MultiplexGraph assemble(std::size_t n_nodes, std::vector<EdgeSet> edge_sets);

 private:
  std::size_t n_nodes_ = 0;
  bool directed_ = false;
  std::vector<GraphLayer> layers_;
};

// Throws ValidationError on an empty list, endpoints out of range, duplicate
// pairs, self-loops or mixed directedness. Undirected layers aggregate over
// both directions of every pair.
MultiplexGraph assemble(std::size_t n_nodes, std::vector<EdgeSet> edge_sets);

Neighborhood build_neighborhood(std::size_t n_nodes, const EdgeSet& edges);

// {u, v} -> u->v when t_u < t_v, v->u when t_v < t_u, both when equal.
EdgeSet orient_temporal(const EdgeSet& edges, std::span<const double> timestamps);
// Both directions of every pair; the no-timestamp path.
EdgeSet symmetrize(const EdgeSet& edges);

// Keeps at most `cap` incoming edges per node: the most recent sources when
// timestamps are given (ties toward the smaller row id), otherwise a uniform
// sample seeded by (seed, node). Undirected input is symmetrized first.
EdgeSet cap_in_degree(const EdgeSet& edges, std::size_t cap, std::span<const double> timestamps, std::uint64_t seed);

// Merges all layers into one directed layer, collapsing parallel edges.
EdgeSet flatten(const MultiplexGraph& graph, std::string name = "flattened");

}  // namespace tabgnn
