#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabgnn/graph.hpp"
#include "tabgnn/table.hpp"

namespace tabgnn {

enum class RelationRule { kSameValue, kProductSameValue, kNumericDifference, kTopKSimilarity };
enum class SimilarityMetric { kCosine, kEuclidean };

struct RelationSpec {
  std::string name;
  RelationRule rule = RelationRule::kSameValue;
  std::vector<std::string> columns;
  double threshold = 0.0;  // NumericDifference
  std::size_t k = 1;       // TopKSimilarity
  SimilarityMetric metric = SimilarityMetric::kCosine;
};

struct ExtractOptions {
  // Equality groups above this size are not enumerated pairwise; each member
  // is linked to `cap` others instead.
  std::size_t group_limit = 10000;
  std::size_t cap = 50;
  std::uint64_t seed = 0;
};

struct ExtractReport {
  std::size_t groups = 0;
  std::size_t oversized_groups = 0;
  std::size_t largest_group = 0;
};

// Throws ValidationError when `spec` is malformed for `table`: unknown
// column, incompatible kind, target/timestamp column, negative threshold,
// K < 1.
void validate_relation(const RelationSpec& spec, const Table& table);

// Undirected edges induced by one rule. Equality groups keyed by MISSING or
// UNSEEN ids, and rows with a missing numeric value, induce no edges.
EdgeSet extract_edges(const Table& table, const RelationSpec& spec, const ExtractOptions& options = {},
                      ExtractReport* report = nullptr);

struct RelationConfig {
  std::vector<RelationSpec> relations;
  ExtractOptions options;
};

// {"group_limit": 10000, "cap": 50,
//  "relations": [{"name": "edu", "rule": "same_value", "column": "education"},
//                {"name": "age", "rule": "numeric_difference", "column": "age", "threshold": 2},
//                {"name": "p", "rule": "product_same_value", "columns": ["sex", "city"]},
//                {"name": "sim", "rule": "top_k_similarity", "columns": ["a", "b"], "k": 5,
//                 "metric": "cosine"}]}
RelationConfig relations_from_json(const nlohmann::json& doc);
nlohmann::json relations_to_json(const RelationConfig& config);
RelationConfig load_relations(const std::filesystem::path& path);

// Runs extraction, temporal orientation (or symmetrization) and the in-degree
// cap for every relation, then assembles the multiplex graph.
struct BuildReport {
  std::vector<ExtractReport> relations;
  std::vector<std::size_t> edges;
};
MultiplexGraph build_graph(const Table& table, const RelationConfig& config, BuildReport* report = nullptr);

}  // namespace tabgnn
