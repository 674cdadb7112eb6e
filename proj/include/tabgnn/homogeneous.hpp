#pragma once

#include <vector>

#include "tabgnn/encoder.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/model.hpp"

namespace tabgnn {

// Neighbor lists of the graph with every relation merged into one edge type:
// for each node, itself first, then every distinct incoming source in
// ascending order.
std::vector<std::vector<NodeId>> merged_neighbors(const MultiplexGraph& graph);

struct HomogeneousOutput {
  Matrix z;
  std::vector<double> outputs;
};

// One-hop mean-neighborhood network on the merged graph, written with plain
// loops over explicit neighbor lists. Uses the single-relation parameters of
// `model` (which must have one relation, one hop and mean aggregation).
HomogeneousOutput homogeneous_forward(const Model& model, const MultiplexGraph& graph, const Features& features);

}  // namespace tabgnn
