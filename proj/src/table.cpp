#include "tabgnn/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_record(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Days since 1970-01-01 of a proleptic Gregorian date.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

// Plain numbers, or ISO dates "YYYY-MM-DD[( |T)HH:MM[:SS]]" as epoch seconds.
std::optional<double> parse_timestamp(std::string_view s) {
  s = trim(s);
  if (auto v = parse_number(s)) return v;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  auto num = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc() && p == s.data() + pos + len;
  };
  if (s.size() < 10 || s[4] != '-' || s[7] != '-' || !num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d))
    return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
  if (s.size() > 10) {
    if ((s[10] != ' ' && s[10] != 'T') || s.size() < 16 || s[13] != ':' || !num(11, 2, h) || !num(14, 2, mi))
      return std::nullopt;
    if (s.size() > 16 && (s.size() != 19 || s[16] != ':' || !num(17, 2, sec))) return std::nullopt;
  }
  const long long days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return static_cast<double>(days * 86400LL + h * 3600LL + mi * 60LL + sec);
}

std::vector<RowId> all_rows(std::size_t n) {
  std::vector<RowId> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<RowId>(i);
  return rows;
}

bool normalizes(const ColumnSchema& s) {
  return s.feature && (s.kind == ColumnKind::kNumerical || s.kind == ColumnKind::kTimestamp);
}

}  // namespace

std::size_t Column::size() const {
  if (is_categorical(schema.kind) || schema.kind == ColumnKind::kId) return text.size();
  return values.size();
}

Table::Table(std::vector<Column> columns) : columns_(std::move(columns)) {
  if (!columns_.empty()) n_rows_ = columns_.front().size();
  for (const auto& c : columns_)
    if (c.size() != n_rows_)
      throw ValidationError("column '" + c.schema.name + "' has " + std::to_string(c.size()) + " rows, expected " +
                            std::to_string(n_rows_));
}

const Column* Table::find(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.schema.name == name) return &c;
  return nullptr;
}

Column* Table::find(std::string_view name) {
  for (auto& c : columns_)
    if (c.schema.name == name) return &c;
  return nullptr;
}

const Column& Table::at(std::string_view name) const {
  if (const Column* c = find(name)) return *c;
  throw ValidationError("no column named '" + std::string(name) + "'");
}

const Column& Table::target() const {
  for (const auto& c : columns_)
    if (c.schema.kind == ColumnKind::kTarget) return c;
  throw ValidationError("table has no target column");
}

const Column* Table::timestamp_column() const {
  for (const auto& c : columns_)
    if (c.schema.kind == ColumnKind::kTimestamp) return &c;
  return nullptr;
}

std::span<const double> Table::timestamps() const {
  const Column* c = timestamp_column();
  if (!c) return {};
  return c->values;
}

std::vector<RowId> Table::labeled_rows() const {
  const auto& y = target().values;
  std::vector<RowId> rows;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!std::isnan(y[i])) rows.push_back(static_cast<RowId>(i));
  return rows;
}

std::int32_t CategoryVocab::lookup(std::string_view value) const {
  if (value.empty()) return missing_id();
  auto it = index.find(std::string(value));
  return it == index.end() ? unseen_id() : it->second;
}

bool is_missing_marker(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return true;
  std::string lower(cell);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower == "na" || lower == "nan" || lower == "null" || lower == "none";
}

Table load_table(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file " + path.string());
  return load_table(in, schema);
}

Table load_table(std::istream& in, const Schema& schema) {
  schema.validate();
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("data file is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_record(line, schema.delimiter);
  for (auto& h : header) h = std::string(trim(h));

  std::set<std::string> seen;
  for (const auto& h : header)
    if (!seen.insert(h).second) throw ValidationError("duplicate column name '" + h + "' in header");
  for (const auto& h : header)
    if (!schema.find(h)) throw ValidationError("header column '" + h + "' is not in the schema");
  // position of each schema column in the file
  std::vector<std::size_t> position;
  for (const auto& c : schema.columns) {
    auto it = std::find(header.begin(), header.end(), c.name);
    if (it == header.end()) throw ValidationError("schema column '" + c.name + "' missing from header");
    position.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  std::vector<Column> columns(schema.columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) columns[j].schema = schema.columns[j];

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    auto fields = split_record(line, schema.delimiter);
    if (fields.size() != header.size())
      throw ValidationError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(header.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
      Column& col = columns[j];
      const std::string& cell = fields[position[j]];
      const bool missing = is_missing_marker(cell);
      const ColumnKind kind = col.schema.kind;
      if (is_categorical(kind) || kind == ColumnKind::kId) {
        col.text.push_back(missing ? std::string() : std::string(trim(cell)));
        col.missing.push_back(missing);
        continue;
      }
      if (missing) {
        if (kind == ColumnKind::kTimestamp)
          throw ValidationError("missing timestamp at row " + std::to_string(row) + ", column \"" + col.schema.name +
                                "\"");
        col.values.push_back(kNaN);
        col.missing.push_back(1);
        continue;
      }
      auto v = kind == ColumnKind::kTimestamp ? parse_timestamp(cell) : parse_number(cell);
      if (!v)
        throw ValidationError("unparseable " + std::string(to_string(kind)) + " value '" + cell + "' at row " +
                              std::to_string(row) + ", column \"" + col.schema.name + "\"");
      col.values.push_back(*v);
      col.missing.push_back(0);
    }
  }
  return Table(std::move(columns));
}

Table impute(Table table) {
  for (auto& col : table.columns()) {
    if (col.schema.kind == ColumnKind::kNumerical) {
      for (auto& v : col.values)
        if (std::isnan(v)) v = 0.0;
    } else if (is_categorical(col.schema.kind) && !col.ids.empty()) {
      for (auto& id : col.ids)
        if (id < 0) id = col.missing_id;
    }
  }
  return table;
}

NormStats compute_norm_stats(const Table& table, std::span<const RowId> rows) {
  std::vector<RowId> every;
  if (rows.empty()) {
    every = all_rows(table.n_rows());
    rows = every;
  }
  NormStats stats;
  for (const auto& col : table.columns()) {
    if (!normalizes(col.schema)) continue;
    ColumnStats s;
    if (!rows.empty()) {
      double sum = 0.0;
      for (RowId r : rows) sum += std::isnan(col.values[r]) ? 0.0 : col.values[r];
      s.mean = sum / static_cast<double>(rows.size());
      double sq = 0.0;
      for (RowId r : rows) {
        const double d = (std::isnan(col.values[r]) ? 0.0 : col.values[r]) - s.mean;
        sq += d * d;
      }
      s.std = std::sqrt(sq / static_cast<double>(rows.size()));
    }
    stats.columns[col.schema.name] = s;
  }
  return stats;
}

std::pair<Table, NormStats> normalize_numeric(Table table, const std::optional<NormStats>& stats) {
  NormStats use = stats ? *stats : compute_norm_stats(table);
  for (auto& col : table.columns()) {
    if (!normalizes(col.schema)) continue;
    auto it = use.columns.find(col.schema.name);
    if (it == use.columns.end())
      throw ValidationError("normalization stats lack column '" + col.schema.name + "'");
    const ColumnStats s = it->second;
    col.normalized.resize(col.values.size());
    for (std::size_t i = 0; i < col.values.size(); ++i) {
      const double v = std::isnan(col.values[i]) ? 0.0 : col.values[i];
      col.normalized[i] = s.std > 0.0 ? (v - s.mean) / s.std : 0.0;
    }
  }
  return {std::move(table), std::move(use)};
}

Vocabulary build_vocabulary(const Table& table, std::span<const RowId> rows) {
  std::vector<RowId> every;
  if (rows.empty()) {
    every = all_rows(table.n_rows());
    rows = every;
  }
  Vocabulary vocab;
  for (const auto& col : table.columns()) {
    if (!is_categorical(col.schema.kind)) continue;
    CategoryVocab cv;
    for (RowId r : rows) {
      const std::string& v = col.text[r];
      if (v.empty()) continue;
      if (cv.index.emplace(v, static_cast<std::int32_t>(cv.values.size())).second) cv.values.push_back(v);
    }
    vocab.columns[col.schema.name] = std::move(cv);
  }
  return vocab;
}

std::pair<Table, Vocabulary> encode_categorical_ids(Table table, const std::optional<Vocabulary>& vocab) {
  Vocabulary use = vocab ? *vocab : build_vocabulary(table);
  for (auto& col : table.columns()) {
    if (!is_categorical(col.schema.kind)) continue;
    auto it = use.columns.find(col.schema.name);
    if (it == use.columns.end()) throw ValidationError("vocabulary lacks column '" + col.schema.name + "'");
    const CategoryVocab& cv = it->second;
    col.ids.resize(col.text.size());
    for (std::size_t i = 0; i < col.text.size(); ++i)
      col.ids[i] = col.text[i].empty() ? -1 : cv.lookup(col.text[i]);
    col.missing_id = cv.missing_id();
    col.vocab_size = cv.size();
  }
  return {std::move(table), std::move(use)};
}

nlohmann::json vocabulary_to_json(const Vocabulary& vocab) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, cv] : vocab.columns) doc[name] = cv.values;
  return doc;
}

Vocabulary vocabulary_from_json(const nlohmann::json& doc) {
  Vocabulary vocab;
  for (const auto& [name, values] : doc.items()) {
    CategoryVocab cv;
    for (const auto& v : values) {
      auto s = v.get<std::string>();
      cv.index.emplace(s, static_cast<std::int32_t>(cv.values.size()));
      cv.values.push_back(std::move(s));
    }
    vocab.columns[name] = std::move(cv);
  }
  return vocab;
}

nlohmann::json norm_stats_to_json(const NormStats& stats) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, s] : stats.columns) doc[name] = {{"mean", s.mean}, {"std", s.std}};
  return doc;
}

NormStats norm_stats_from_json(const nlohmann::json& doc) {
  NormStats stats;
  for (const auto& [name, s] : doc.items())
    stats.columns[name] = {s.at("mean").get<double>(), s.at("std").get<double>()};
  return stats;
}

std::pair<Table, Preprocessor> fit_transform(Table raw, std::span<const RowId> fit_rows) {
  Preprocessor prep;
  prep.vocab = build_vocabulary(raw, fit_rows);
  prep.stats = compute_norm_stats(raw, fit_rows);
  Table out = transform(std::move(raw), prep);
  return {std::move(out), std::move(prep)};
}

Table transform(Table raw, const Preprocessor& prep) {
  auto [encoded, vocab] = encode_categorical_ids(std::move(raw), prep.vocab);
  Table imputed = impute(std::move(encoded));
  auto [normalized, stats] = normalize_numeric(std::move(imputed), prep.stats);
  return std::move(normalized);
}

}  // namespace tabgnn
