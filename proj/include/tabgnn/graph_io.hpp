#pragma once

#include <filesystem>

#include "tabgnn/graph.hpp"

namespace tabgnn {

// Writes one `src<TAB>dst` edge-list file per layer plus manifest.json with
// n_nodes, directedness and the ordered layer names/files.
void write_graph(const std::filesystem::path& dir, const MultiplexGraph& graph);
MultiplexGraph read_graph(const std::filesystem::path& dir);

}  // namespace tabgnn
