#include "tabgnn/graph.hpp"

#include <algorithm>
#include <random>
#include <unordered_map>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

void sort_unique(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

// Incoming (src, dst) pairs of a layer regardless of how it is stored.
std::vector<Edge> incoming_pairs(const EdgeSet& e) {
  std::vector<Edge> out;
  out.reserve(e.directed ? e.edges.size() : 2 * e.edges.size());
  for (auto [u, v] : e.edges) {
    out.emplace_back(u, v);
    if (!e.directed) out.emplace_back(v, u);
  }
  return out;
}

}  // namespace

Neighborhood build_neighborhood(std::size_t n_nodes, const EdgeSet& edges) {
  Neighborhood h;
  std::vector<Edge> pairs = incoming_pairs(edges);
  std::vector<std::size_t> in_degree(n_nodes, 0);
  for (auto [src, dst] : pairs) ++in_degree[dst];
  h.offsets.assign(n_nodes + 1, 0);
  for (std::size_t x = 0; x < n_nodes; ++x) h.offsets[x + 1] = h.offsets[x] + in_degree[x] + 1;
  h.nodes.resize(h.offsets[n_nodes]);
  h.owner.resize(h.offsets[n_nodes]);
  std::vector<std::size_t> fill(n_nodes);
  for (std::size_t x = 0; x < n_nodes; ++x) {
    h.nodes[h.offsets[x]] = static_cast<NodeId>(x);
    fill[x] = h.offsets[x] + 1;
  }
  std::sort(pairs.begin(), pairs.end(), [](const Edge& a, const Edge& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  for (auto [src, dst] : pairs) h.nodes[fill[dst]++] = src;
  for (std::size_t x = 0; x < n_nodes; ++x)
    for (std::size_t s = h.offsets[x]; s < h.offsets[x + 1]; ++s) h.owner[s] = static_cast<NodeId>(x);

  std::vector<std::size_t> appear(n_nodes, 0);
  for (NodeId u : h.nodes) ++appear[u];
  h.rev_offsets.assign(n_nodes + 1, 0);
  for (std::size_t u = 0; u < n_nodes; ++u) h.rev_offsets[u + 1] = h.rev_offsets[u] + appear[u];
  h.rev_slots.resize(h.nodes.size());
  std::vector<std::size_t> pos(h.rev_offsets.begin(), h.rev_offsets.end() - 1);
  for (std::size_t s = 0; s < h.nodes.size(); ++s) h.rev_slots[pos[h.nodes[s]]++] = s;
  return h;
}

MultiplexGraph assemble(std::size_t n_nodes, std::vector<EdgeSet> edge_sets) {
  if (edge_sets.empty()) throw ValidationError("multiplex graph needs at least one edge set");
  MultiplexGraph g;
  g.n_nodes_ = n_nodes;
  g.directed_ = edge_sets.front().directed;
  for (auto& set : edge_sets) {
    if (set.directed != g.directed_) throw ValidationError("edge sets mix directed and undirected layers");
    std::vector<Edge> check = set.edges;
    for (auto& [u, v] : check) {
      if (u >= n_nodes || v >= n_nodes)
        throw ValidationError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") in relation '" +
                              set.relation + "' is out of range for " + std::to_string(n_nodes) + " nodes");
      if (u == v) throw ValidationError("self-loop on node " + std::to_string(u) + " in relation '" + set.relation + "'");
      if (!set.directed && u > v) std::swap(u, v);
    }
    std::sort(check.begin(), check.end());
    if (std::adjacent_find(check.begin(), check.end()) != check.end())
      throw ValidationError("duplicate edge in relation '" + set.relation + "'");
    GraphLayer layer;
    layer.hood = build_neighborhood(n_nodes, set);
    layer.edges = std::move(set);
    g.layers_.push_back(std::move(layer));
  }
  return g;
}

std::vector<std::string> MultiplexGraph::layer_names() const {
  std::vector<std::string> names;
  for (const auto& l : layers_) names.push_back(l.edges.relation);
  return names;
}

std::vector<EdgeSet> MultiplexGraph::edge_sets() const {
  std::vector<EdgeSet> out;
  for (const auto& l : layers_) out.push_back(l.edges);
  return out;
}

MultiplexGraph MultiplexGraph::select(std::span<const std::string> names) const {
  std::vector<EdgeSet> sets;
  for (const auto& name : names) {
    auto it = std::find_if(layers_.begin(), layers_.end(), [&](const GraphLayer& l) { return l.edges.relation == name; });
    if (it == layers_.end()) throw ValidationError("graph has no relation named '" + name + "'");
    sets.push_back(it->edges);
  }
  return assemble(n_nodes_, std::move(sets));
}

EdgeSet orient_temporal(const EdgeSet& edges, std::span<const double> timestamps) {
  if (edges.directed) throw ValidationError("orient_temporal expects an undirected edge set");
  if (timestamps.empty()) throw ValidationError("orient_temporal requires timestamps");
  EdgeSet out{edges.relation, {}, true};
  out.edges.reserve(edges.edges.size());
  for (auto [u, v] : edges.edges) {
    if (u >= timestamps.size() || v >= timestamps.size()) throw ValidationError("edge endpoint without a timestamp");
    const double tu = timestamps[u], tv = timestamps[v];
    if (tu <= tv) out.edges.emplace_back(u, v);
    if (tv <= tu) out.edges.emplace_back(v, u);
  }
  sort_unique(out.edges);
  return out;
}

EdgeSet symmetrize(const EdgeSet& edges) {
  EdgeSet out{edges.relation, incoming_pairs(edges), true};
  sort_unique(out.edges);
  return out;
}

EdgeSet cap_in_degree(const EdgeSet& edges, std::size_t cap, std::span<const double> timestamps, std::uint64_t seed) {
  if (cap < 1) throw ValidationError("in-degree cap must be at least 1");
  EdgeSet directed = edges.directed ? edges : symmetrize(edges);
  std::vector<Edge> pairs = directed.edges;
  std::sort(pairs.begin(), pairs.end(), [](const Edge& a, const Edge& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  EdgeSet out{edges.relation, {}, true};
  for (std::size_t i = 0; i < pairs.size();) {
    std::size_t j = i;
    const NodeId dst = pairs[i].second;
    while (j < pairs.size() && pairs[j].second == dst) ++j;
    std::vector<NodeId> sources;
    for (std::size_t k = i; k < j; ++k) sources.push_back(pairs[k].first);
    if (sources.size() > cap) {
      if (!timestamps.empty()) {
        std::stable_sort(sources.begin(), sources.end(),
                         [&](NodeId a, NodeId b) { return timestamps[a] > timestamps[b]; });
      } else {
        std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(dst) + 1)));
        std::shuffle(sources.begin(), sources.end(), rng);
      }
      sources.resize(cap);
    }
    for (NodeId s : sources) out.edges.emplace_back(s, dst);
    i = j;
  }
  sort_unique(out.edges);
  return out;
}

EdgeSet flatten(const MultiplexGraph& graph, std::string name) {
  EdgeSet out{std::move(name), {}, true};
  for (const auto& layer : graph.layers()) {
    auto pairs = incoming_pairs(layer.edges);
    out.edges.insert(out.edges.end(), pairs.begin(), pairs.end());
  }
  sort_unique(out.edges);
  return out;
}

}  // namespace tabgnn
