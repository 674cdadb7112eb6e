#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tabgnn {

enum class ColumnKind { kCategorical, kNumerical, kTimestamp, kText, kId, kTarget };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view name);

inline bool is_categorical(ColumnKind k) { return k == ColumnKind::kCategorical || k == ColumnKind::kText; }
inline bool is_numeric(ColumnKind k) {
  return k == ColumnKind::kNumerical || k == ColumnKind::kTimestamp || k == ColumnKind::kTarget;
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::kNumerical;
  // Column may be referenced by a relation rule.
  bool usable_for_relations = true;
  // Column is fed to the feature encoder (and the downstream linear model).
  bool feature = true;
};

// Column layout of one delimited file. Column order in the schema does not
// have to match the file header; columns are matched by name.
struct Schema {
  std::vector<ColumnSchema> columns;
  char delimiter = ',';

  const ColumnSchema* find(std::string_view name) const;
  const ColumnSchema& target() const;
  const ColumnSchema* timestamp() const;

  // Throws ValidationError unless names are unique, there is exactly one
  // target and at most one timestamp and one id column.
  void validate() const;
};

// Schema documents are JSON:
//   {"delimiter": ",",
//    "columns": [{"name": "age", "kind": "numerical"},
//                {"name": "city", "kind": "categorical", "feature": false}]}
// Optional per-column keys: "relations" (bool), "feature" (bool).
Schema schema_from_json(const nlohmann::json& doc);
nlohmann::json schema_to_json(const Schema& schema);
Schema load_schema(const std::filesystem::path& path);

}  // namespace tabgnn
