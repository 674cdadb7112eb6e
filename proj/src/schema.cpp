#include "tabgnn/schema.hpp"

#include <fstream>
#include <set>

#include "tabgnn/error.hpp"

namespace tabgnn {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kNumerical: return "numerical";
    case ColumnKind::kTimestamp: return "timestamp";
    case ColumnKind::kText: return "text";
    case ColumnKind::kId: return "id";
    case ColumnKind::kTarget: return "target";
  }
  return "unknown";
}

ColumnKind parse_column_kind(std::string_view name) {
  if (name == "categorical") return ColumnKind::kCategorical;
  if (name == "numerical" || name == "numeric") return ColumnKind::kNumerical;
  if (name == "timestamp") return ColumnKind::kTimestamp;
  if (name == "text" || name == "text_as_categorical") return ColumnKind::kText;
  if (name == "id") return ColumnKind::kId;
  if (name == "target") return ColumnKind::kTarget;
  throw ValidationError("unknown column kind '" + std::string(name) + "'");
}

const ColumnSchema* Schema::find(std::string_view name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

const ColumnSchema& Schema::target() const {
  for (const auto& c : columns)
    if (c.kind == ColumnKind::kTarget) return c;
  throw ValidationError("schema has no target column");
}

const ColumnSchema* Schema::timestamp() const {
  for (const auto& c : columns)
    if (c.kind == ColumnKind::kTimestamp) return &c;
  return nullptr;
}

void Schema::validate() const {
  if (columns.empty()) throw ValidationError("schema has no columns");
  std::set<std::string> names;
  int targets = 0, stamps = 0, ids = 0;
  for (const auto& c : columns) {
    if (c.name.empty()) throw ValidationError("schema column with empty name");
    if (!names.insert(c.name).second) throw ValidationError("duplicate column name '" + c.name + "' in schema");
    targets += c.kind == ColumnKind::kTarget;
    stamps += c.kind == ColumnKind::kTimestamp;
    ids += c.kind == ColumnKind::kId;
  }
  if (targets != 1)
    throw ValidationError("schema must have exactly one target column, found " + std::to_string(targets));
  if (stamps > 1) throw ValidationError("schema has more than one timestamp column");
  if (ids > 1) throw ValidationError("schema has more than one id column");
}

Schema schema_from_json(const nlohmann::json& doc) {
  Schema schema;
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array())
    throw ValidationError("schema document needs a \"columns\" array");
  if (doc.contains("delimiter")) {
    auto d = doc["delimiter"].get<std::string>();
    if (d == "\\t" || d == "tab") d = "\t";
    if (d.size() != 1) throw ValidationError("delimiter must be a single character");
    schema.delimiter = d[0];
  }
  for (const auto& item : doc["columns"]) {
    ColumnSchema col;
    try {
      col.name = item.at("name").get<std::string>();
      col.kind = parse_column_kind(item.at("kind").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("bad schema column entry: ") + e.what());
    }
    const bool data_column = is_categorical(col.kind) || col.kind == ColumnKind::kNumerical ||
                             col.kind == ColumnKind::kTimestamp;
    col.feature = item.value("feature", data_column);
    col.usable_for_relations = item.value("relations", is_categorical(col.kind) || col.kind == ColumnKind::kNumerical);
    if (col.feature && !data_column)
      throw ValidationError("column '" + col.name + "' of kind " + std::string(to_string(col.kind)) +
                            " cannot be a feature");
    schema.columns.push_back(std::move(col));
  }
  schema.validate();
  return schema;
}

nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns)
    cols.push_back({{"name", c.name},
                    {"kind", std::string(to_string(c.kind))},
                    {"feature", c.feature},
                    {"relations", c.usable_for_relations}});
  return {{"delimiter", std::string(1, schema.delimiter)}, {"columns", cols}};
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("schema file " + path.string() + " is not valid JSON: " + e.what());
  }
  return schema_from_json(doc);
}

}  // namespace tabgnn
