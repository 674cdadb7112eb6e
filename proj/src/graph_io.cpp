#include "tabgnn/graph_io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>

#include <json.hpp>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

std::string layer_file(std::size_t r, const std::string& name) {
  std::string safe;
  for (char c : name) safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ? c : '_');
  return "layer_" + std::to_string(r) + "_" + safe + ".tsv";
}

NodeId parse_node(std::string_view s, const std::filesystem::path& file, std::size_t line) {
  NodeId v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("bad node id '" + std::string(s) + "' in " + file.string() + " line " + std::to_string(line));
  return v;
}

}  // namespace

void write_graph(const std::filesystem::path& dir, const MultiplexGraph& graph) {
  std::filesystem::create_directories(dir);
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t r = 0; r < graph.n_layers(); ++r) {
    const EdgeSet& e = graph.layer(r).edges;
    const std::string file = layer_file(r, e.relation);
    std::ofstream out(dir / file);
    if (!out) throw RuntimeError("cannot write " + (dir / file).string());
    for (auto [u, v] : e.edges) out << u << '\t' << v << '\n';
    if (!out) throw RuntimeError("write failed for " + (dir / file).string());
    layers.push_back({{"name", e.relation}, {"file", file}, {"n_edges", e.edges.size()}});
  }
  nlohmann::json manifest = {{"n_nodes", graph.n_nodes()}, {"directed", graph.directed()}, {"layers", layers}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw RuntimeError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

MultiplexGraph read_graph(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ValidationError("missing graph manifest " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("graph manifest is not valid JSON: ") + e.what());
  }
  const auto n_nodes = manifest.at("n_nodes").get<std::size_t>();
  const bool directed = manifest.at("directed").get<bool>();
  std::vector<EdgeSet> sets;
  for (const auto& layer : manifest.at("layers")) {
    EdgeSet e{layer.at("name").get<std::string>(), {}, directed};
    const auto path = dir / layer.at("file").get<std::string>();
    std::ifstream f(path);
    if (!f) throw ValidationError("missing edge list " + path.string());
    std::string line;
    std::size_t no = 0;
    while (std::getline(f, line)) {
      ++no;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ValidationError("edge line without tab in " + path.string());
      e.edges.emplace_back(parse_node(std::string_view(line).substr(0, tab), path, no),
                           parse_node(std::string_view(line).substr(tab + 1), path, no));
    }
    sets.push_back(std::move(e));
  }
  return assemble(n_nodes, std::move(sets));
}

}  // namespace tabgnn
