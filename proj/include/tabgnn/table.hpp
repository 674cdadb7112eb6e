#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tabgnn/schema.hpp"

namespace tabgnn {

using RowId = std::uint32_t;

struct Column {
  ColumnSchema schema;
  // Numerical, timestamp and target cells as parsed. NaN marks a missing
  // cell until impute() fills numerical columns with 0. Target NaN means the
  // row is unlabeled and is kept that way.
  std::vector<double> values;
  // z-scored copy of `values` for feature columns, filled by normalize_numeric.
  std::vector<double> normalized;
  // Categorical/text/id cells as strings; empty string marks missing.
  std::vector<std::string> text;
  // Category ids, filled by encode_categorical_ids. Missing cells hold -1
  // until impute() replaces them with `missing_id`.
  std::vector<std::int32_t> ids;
  std::int32_t missing_id = -1;
  std::size_t vocab_size = 0;
  // 1 where the source cell was missing.
  std::vector<std::uint8_t> missing;

  std::size_t size() const;
};

class Table {
 public:
  Table() = default;
  explicit Table(std::vector<Column> columns);

  std::size_t n_rows() const { return n_rows_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::vector<Column>& columns() { return columns_; }

  const Column* find(std::string_view name) const;
  Column* find(std::string_view name);
  const Column& at(std::string_view name) const;

  const Column& target() const;
  const Column* timestamp_column() const;
  bool has_timestamps() const { return timestamp_column() != nullptr; }
  std::span<const double> timestamps() const;

  // Rows whose target value is present.
  std::vector<RowId> labeled_rows() const;

 private:
  std::size_t n_rows_ = 0;
  std::vector<Column> columns_;
};

// Per categorical column: first-appearance ids 0..k-1, then MISSING = k and
// UNSEEN = k+1.
struct CategoryVocab {
  std::vector<std::string> values;
  std::unordered_map<std::string, std::int32_t> index;

  std::int32_t missing_id() const { return static_cast<std::int32_t>(values.size()); }
  std::int32_t unseen_id() const { return static_cast<std::int32_t>(values.size()) + 1; }
  std::size_t size() const { return values.size() + 2; }
  std::int32_t lookup(std::string_view value) const;
};

struct Vocabulary {
  std::map<std::string, CategoryVocab> columns;
};

struct ColumnStats {
  double mean = 0.0;
  double std = 0.0;
};

struct NormStats {
  std::map<std::string, ColumnStats> columns;
};

bool is_missing_marker(std::string_view cell);

// Parses the file under `schema`. Throws ValidationError on header mismatch,
// duplicate header names or unparseable numeric cells (row numbers are
// 1-based data rows, the header is not counted).
Table load_table(const std::filesystem::path& path, const Schema& schema);
Table load_table(std::istream& in, const Schema& schema);

// Numerical missing -> 0; unresolved categorical ids (-1) -> the column's
// MISSING id. Target and timestamp columns are untouched.
Table impute(Table table);

// Population mean/std over `rows` (all rows when empty) of every numerical
// feature column and of a timestamp column used as a feature.
NormStats compute_norm_stats(const Table& table, std::span<const RowId> rows = {});
// Without stats: computes them over all rows, then applies. std == 0 maps to 0.
std::pair<Table, NormStats> normalize_numeric(Table table, const std::optional<NormStats>& stats);

// Builds the vocabulary from `rows` (all rows when empty) unless one is given.
Vocabulary build_vocabulary(const Table& table, std::span<const RowId> rows = {});
std::pair<Table, Vocabulary> encode_categorical_ids(Table table, const std::optional<Vocabulary>& vocab);

nlohmann::json vocabulary_to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const nlohmann::json& doc);
nlohmann::json norm_stats_to_json(const NormStats& stats);
NormStats norm_stats_from_json(const nlohmann::json& doc);

// Fitted preprocessing state carried from training to test time.
struct Preprocessor {
  Vocabulary vocab;
  NormStats stats;
};

// encode -> impute -> normalize, fitting the preprocessor on `fit_rows`.
std::pair<Table, Preprocessor> fit_transform(Table raw, std::span<const RowId> fit_rows);
Table transform(Table raw, const Preprocessor& prep);

}  // namespace tabgnn
