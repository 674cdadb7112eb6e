#include "tabgnn/relation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

std::string_view rule_name(RelationRule r) {
  switch (r) {
    case RelationRule::kSameValue: return "same_value";
    case RelationRule::kProductSameValue: return "product_same_value";
    case RelationRule::kNumericDifference: return "numeric_difference";
    case RelationRule::kTopKSimilarity: return "top_k_similarity";
  }
  return "unknown";
}

RelationRule parse_rule(const std::string& s) {
  if (s == "same_value") return RelationRule::kSameValue;
  if (s == "product_same_value") return RelationRule::kProductSameValue;
  if (s == "numeric_difference") return RelationRule::kNumericDifference;
  if (s == "top_k_similarity") return RelationRule::kTopKSimilarity;
  throw ValidationError("unknown relation rule '" + s + "'");
}

Edge ordered(RowId a, RowId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

void finish(std::vector<Edge>& e) {
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
}

// Pairs within one equality group; oversized groups link each member to at
// most `cap` others.
std::vector<Edge> group_pairs(const std::vector<RowId>& group, const Table& table, const ExtractOptions& opt) {
  std::vector<Edge> out;
  const std::size_t g = group.size();
  if (g <= opt.group_limit) {
    out.reserve(g * (g - 1) / 2);
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = i + 1; j < g; ++j) out.push_back(ordered(group[i], group[j]));
    return out;
  }
  if (table.has_timestamps()) {
    auto t = table.timestamps();
    std::vector<RowId> order = group;
    std::stable_sort(order.begin(), order.end(), [&](RowId a, RowId b) { return t[a] < t[b]; });
    for (std::size_t i = 0; i < order.size(); ++i)
      for (std::size_t j = i > opt.cap ? i - opt.cap : 0; j < i; ++j) out.push_back(ordered(order[j], order[i]));
  } else {
    std::mt19937_64 rng(opt.seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(group.front()) + 1)));
    std::vector<RowId> pool = group;
    for (std::size_t i = 0; i < g; ++i) {
      // partial Fisher-Yates, skipping the member itself
      std::size_t taken = 0;
      for (std::size_t k = 0; k < g && taken < opt.cap; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, g - 1);
        std::swap(pool[k], pool[pick(rng)]);
        if (pool[k] == group[i]) continue;
        out.push_back(ordered(group[i], pool[k]));
        ++taken;
      }
    }
  }
  return out;
}

std::vector<Edge> equality_edges(const Table& table, const RelationSpec& spec, const ExtractOptions& opt,
                                 ExtractReport& report) {
  std::vector<const Column*> cols;
  for (const auto& name : spec.columns) cols.push_back(&table.at(name));
  const std::size_t n = table.n_rows();
  std::vector<RowId> rows;
  for (std::size_t r = 0; r < n; ++r) {
    bool keyed = true;
    for (const Column* c : cols) {
      const std::int32_t id = c->ids[r];
      if (id < 0 || id == c->missing_id || id == c->missing_id + 1) keyed = false;
    }
    if (keyed) rows.push_back(static_cast<RowId>(r));
  }
  auto less = [&](RowId a, RowId b) {
    for (const Column* c : cols)
      if (c->ids[a] != c->ids[b]) return c->ids[a] < c->ids[b];
    return a < b;
  };
  auto same = [&](RowId a, RowId b) {
    for (const Column* c : cols)
      if (c->ids[a] != c->ids[b]) return false;
    return true;
  };
  std::sort(rows.begin(), rows.end(), less);
  std::vector<std::vector<RowId>> groups;
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i + 1;
    while (j < rows.size() && same(rows[i], rows[j])) ++j;
    if (j - i > 1) groups.emplace_back(rows.begin() + static_cast<std::ptrdiff_t>(i),
                                       rows.begin() + static_cast<std::ptrdiff_t>(j));
    i = j;
  }
  report.groups = groups.size();
  for (const auto& g : groups) {
    report.largest_group = std::max(report.largest_group, g.size());
    report.oversized_groups += g.size() > opt.group_limit;
  }
  std::vector<std::vector<Edge>> parts(groups.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t gi = 0; gi < static_cast<std::ptrdiff_t>(groups.size()); ++gi)
    parts[gi] = group_pairs(groups[gi], table, opt);
  std::vector<Edge> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<Edge> difference_edges(const Table& table, const RelationSpec& spec) {
  const Column& c = table.at(spec.columns.front());
  std::vector<RowId> rows;
  for (std::size_t r = 0; r < table.n_rows(); ++r)
    if (!c.missing[r] && !std::isnan(c.values[r])) rows.push_back(static_cast<RowId>(r));
  std::stable_sort(rows.begin(), rows.end(), [&](RowId a, RowId b) { return c.values[a] < c.values[b]; });
  std::vector<Edge> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size() && c.values[rows[j]] - c.values[rows[i]] <= spec.threshold; ++j)
      out.push_back(ordered(rows[i], rows[j]));
  return out;
}

std::vector<Edge> topk_edges(const Table& table, const RelationSpec& spec) {
  const std::size_t n = table.n_rows();
  const std::size_t d = spec.columns.size();
  std::vector<double> vec(n * d);
  for (std::size_t j = 0; j < d; ++j) {
    const Column& c = table.at(spec.columns[j]);
    for (std::size_t r = 0; r < n; ++r) vec[r * d + j] = std::isnan(c.values[r]) ? 0.0 : c.values[r];
  }
  std::vector<double> norm(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += vec[r * d + j] * vec[r * d + j];
    norm[r] = std::sqrt(s);
  }
  const std::size_t k = std::min(spec.k, n > 0 ? n - 1 : 0);
  std::vector<std::vector<Edge>> per_row(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    std::vector<std::pair<double, RowId>> cand;
    cand.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double score = 0.0;
      if (spec.metric == SimilarityMetric::kCosine) {
        double dot = 0.0;
        for (std::size_t t = 0; t < d; ++t) dot += vec[i * d + t] * vec[j * d + t];
        score = norm[i] > 0.0 && norm[j] > 0.0 ? dot / (norm[i] * norm[j]) : 0.0;
      } else {
        double sq = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
          const double diff = vec[i * d + t] - vec[j * d + t];
          sq += diff * diff;
        }
        score = -std::sqrt(sq);
      }
      cand.emplace_back(score, static_cast<RowId>(j));
    }
    auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), better);
    for (std::size_t t = 0; t < k; ++t) per_row[i].push_back(ordered(static_cast<RowId>(i), cand[t].second));
  }
  std::vector<Edge> out;
  for (auto& p : per_row) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

void validate_relation(const RelationSpec& spec, const Table& table) {
  if (spec.name.empty()) throw ValidationError("relation without a name");
  if (spec.columns.empty()) throw ValidationError("relation '" + spec.name + "' names no columns");
  if (spec.rule == RelationRule::kSameValue || spec.rule == RelationRule::kNumericDifference) {
    if (spec.columns.size() != 1)
      throw ValidationError("relation '" + spec.name + "' (" + std::string(rule_name(spec.rule)) +
                            ") takes exactly one column");
  }
  for (const auto& name : spec.columns) {
    const Column* c = table.find(name);
    if (!c) throw ValidationError("relation '" + spec.name + "' references unknown column '" + name + "'");
    const ColumnKind kind = c->schema.kind;
    if (kind == ColumnKind::kTarget || kind == ColumnKind::kTimestamp || kind == ColumnKind::kId)
      throw ValidationError("relation '" + spec.name + "' may not use " + std::string(to_string(kind)) +
                            " column '" + name + "'");
    if (!c->schema.usable_for_relations)
      throw ValidationError("column '" + name + "' is not marked usable for relations");
    const bool want_categorical =
        spec.rule == RelationRule::kSameValue || spec.rule == RelationRule::kProductSameValue;
    if (want_categorical && !is_categorical(kind))
      throw ValidationError("relation '" + spec.name + "' needs categorical column, '" + name + "' is " +
                            std::string(to_string(kind)));
    if (!want_categorical && kind != ColumnKind::kNumerical)
      throw ValidationError("relation '" + spec.name + "' needs numerical column, '" + name + "' is " +
                            std::string(to_string(kind)));
    if (want_categorical && c->ids.size() != table.n_rows())
      throw ValidationError("column '" + name + "' has no category ids; encode the table first");
  }
  if (spec.rule == RelationRule::kNumericDifference && !(spec.threshold >= 0.0))
    throw ValidationError("relation '" + spec.name + "' has a negative threshold");
  if (spec.rule == RelationRule::kTopKSimilarity && spec.k < 1)
    throw ValidationError("relation '" + spec.name + "' needs K >= 1");
}

EdgeSet extract_edges(const Table& table, const RelationSpec& spec, const ExtractOptions& options,
                      ExtractReport* report) {
  validate_relation(spec, table);
  ExtractReport local;
  EdgeSet out{spec.name, {}, false};
  switch (spec.rule) {
    case RelationRule::kSameValue:
    case RelationRule::kProductSameValue: out.edges = equality_edges(table, spec, options, local); break;
    case RelationRule::kNumericDifference: out.edges = difference_edges(table, spec); break;
    case RelationRule::kTopKSimilarity: out.edges = topk_edges(table, spec); break;
  }
  finish(out.edges);
  if (report) *report = local;
  return out;
}

RelationConfig relations_from_json(const nlohmann::json& doc) {
  RelationConfig cfg;
  if (!doc.is_object() || !doc.contains("relations") || !doc["relations"].is_array())
    throw ValidationError("relation document needs a \"relations\" array");
  try {
    cfg.options.group_limit = doc.value("group_limit", cfg.options.group_limit);
    cfg.options.cap = doc.value("cap", cfg.options.cap);
    cfg.options.seed = doc.value("seed", cfg.options.seed);
    for (const auto& item : doc["relations"]) {
      RelationSpec spec;
      spec.name = item.at("name").get<std::string>();
      spec.rule = parse_rule(item.at("rule").get<std::string>());
      if (item.contains("column")) spec.columns.push_back(item["column"].get<std::string>());
      if (item.contains("columns"))
        for (const auto& c : item["columns"]) spec.columns.push_back(c.get<std::string>());
      spec.threshold = item.value("threshold", 0.0);
      const long long k = item.value("k", 1LL);
      if (k < 1) throw ValidationError("relation '" + spec.name + "' needs K >= 1");
      spec.k = static_cast<std::size_t>(k);
      const std::string metric = item.value("metric", std::string("cosine"));
      if (metric == "cosine") spec.metric = SimilarityMetric::kCosine;
      else if (metric == "euclidean") spec.metric = SimilarityMetric::kEuclidean;
      else throw ValidationError("unknown similarity metric '" + metric + "'");
      cfg.relations.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad relation document: ") + e.what());
  }
  if (cfg.relations.empty()) throw ValidationError("relation document lists no relations");
  for (std::size_t i = 0; i < cfg.relations.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.relations[i].name == cfg.relations[j].name)
        throw ValidationError("duplicate relation name '" + cfg.relations[i].name + "'");
  return cfg;
}

nlohmann::json relations_to_json(const RelationConfig& cfg) {
  nlohmann::json rels = nlohmann::json::array();
  for (const auto& s : cfg.relations) {
    nlohmann::json item = {{"name", s.name}, {"rule", std::string(rule_name(s.rule))}, {"columns", s.columns}};
    if (s.rule == RelationRule::kNumericDifference) item["threshold"] = s.threshold;
    if (s.rule == RelationRule::kTopKSimilarity) {
      item["k"] = s.k;
      item["metric"] = s.metric == SimilarityMetric::kCosine ? "cosine" : "euclidean";
    }
    rels.push_back(std::move(item));
  }
  return {{"group_limit", cfg.options.group_limit},
          {"cap", cfg.options.cap},
          {"seed", cfg.options.seed},
          {"relations", rels}};
}

RelationConfig load_relations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open relation file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("relation file " + path.string() + " is not valid JSON: " + e.what());
  }
  return relations_from_json(doc);
}

MultiplexGraph build_graph(const Table& table, const RelationConfig& config, BuildReport* report) {
  std::vector<EdgeSet> sets;
  BuildReport local;
  const auto stamps = table.timestamps();
  for (const auto& spec : config.relations) {
    ExtractReport er;
    EdgeSet e = extract_edges(table, spec, config.options, &er);
    e = stamps.empty() ? symmetrize(e) : orient_temporal(e, stamps);
    if (config.options.cap > 0) e = cap_in_degree(e, config.options.cap, stamps, config.options.seed);
    local.relations.push_back(er);
    local.edges.push_back(e.edges.size());
    sets.push_back(std::move(e));
  }
  if (report) *report = std::move(local);
  return assemble(table.n_rows(), std::move(sets));
}

}  // namespace tabgnn
