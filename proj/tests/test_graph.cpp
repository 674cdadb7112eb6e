#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "tabgnn/error.hpp"
#include "tabgnn/graph.hpp"
#include "tabgnn/graph_io.hpp"
#include "tabgnn/relation.hpp"
#include "tabgnn/schema.hpp"
#include "tabgnn/table.hpp"

using namespace tabgnn;

namespace {

Table encoded(const std::string& text, std::vector<ColumnSchema> cols) {
  Schema s;
  s.columns = std::move(cols);
  std::istringstream in(text);
  Table t = load_table(in, s);
  return impute(encode_categorical_ids(std::move(t), std::nullopt).first);
}

Table encoded_file(const std::filesystem::path& path) {
  const Schema s = load_schema(std::filesystem::path(path).replace_extension(".schema.json"));
  return impute(encode_categorical_ids(load_table(path, s), std::nullopt).first);
}

Table loans7() { return encoded_file(TABGNN_DATA_DIR "/loans7.csv"); }

RelationSpec same(const std::string& name, const std::string& col) {
  return {name, RelationRule::kSameValue, {col}};
}

std::set<Edge> as_set(const EdgeSet& e) { return {e.edges.begin(), e.edges.end()}; }

// Random table with a categorical column of `card` levels (some missing), a
// second categorical column, two numerical columns and a target.
Table random_table(std::size_t n, int card, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cat(0, card);
  std::uniform_int_distribution<int> small(0, 2);
  std::normal_distribution<double> num(0.0, 3.0);
  std::ostringstream csv;
  csv << "a,b,x,u,v,y\n";
  for (std::size_t i = 0; i < n; ++i) {
    const int a = cat(rng);
    if (a == card) csv << ",";
    else csv << "c" << a << ",";
    csv << "k" << small(rng) << ",";
    if (i % 17 == 5) csv << ",";
    else csv << std::round(num(rng) * 4.0) / 4.0 << ",";
    // occasional zero vectors exercise the cosine zero-norm branch
    if (i % 23 == 3) csv << "0,0,";
    else csv << std::round(num(rng) * 2.0) / 2.0 << "," << std::round(num(rng) * 2.0) / 2.0 << ",";
    csv << (i % 2) << "\n";
  }
  return encoded(csv.str(), {{"a", ColumnKind::kCategorical},
                             {"b", ColumnKind::kCategorical},
                             {"x", ColumnKind::kNumerical},
                             {"u", ColumnKind::kNumerical},
                             {"v", ColumnKind::kNumerical},
                             {"y", ColumnKind::kTarget}});
}

bool keyed(const Column& c, std::size_t r) {
  return c.ids[r] >= 0 && c.ids[r] != c.missing_id && c.ids[r] != c.missing_id + 1;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("same value on education links the four bachelors pairwise") {
  const Table t = loans7();
  const EdgeSet e = extract_edges(t, same("edu", "Education"));
  CHECK_FALSE(e.directed);
  std::set<Edge> bachelors;
  for (NodeId i = 0; i < 4; ++i)
    for (NodeId j = i + 1; j < 4; ++j) bachelors.insert({i, j});
  std::set<Edge> got = as_set(e);
  std::size_t among = 0;
  for (const auto& p : got) among += bachelors.count(p);
  CHECK(among == 6);
  // the two masters form the only other group
  CHECK(got.size() == 7);
  CHECK(got.count({4, 6}) == 1);
}

TEST_CASE("numeric difference on ages 25, 26, 30") {
  const Table t = encoded("age,y\n25,0\n26,1\n30,0\n", {{"age", ColumnKind::kNumerical}, {"y", ColumnKind::kTarget}});
  const EdgeSet e = extract_edges(t, {"age", RelationRule::kNumericDifference, {"age"}, 2.0});
  CHECK(e.edges == std::vector<Edge>{{0, 1}});
}

TEST_CASE("product same value matches the whole tuple") {
  const Table t = encoded("sex,city,y\nM,1,0\nM,2,1\nM,1,0\n",
                          {{"sex", ColumnKind::kCategorical}, {"city", ColumnKind::kCategorical}, {"y", ColumnKind::kTarget}});
  const EdgeSet e = extract_edges(t, {"p", RelationRule::kProductSameValue, {"sex", "city"}});
  CHECK(e.edges == std::vector<Edge>{{0, 2}});
}

TEST_CASE("missing and unseen categories induce no edges") {
  Table t = encoded("c,y\n,0\n,1\nA,0\nA,1\n", {{"c", ColumnKind::kCategorical}, {"y", ColumnKind::kTarget}});
  CHECK(extract_edges(t, same("c", "c")).edges == std::vector<Edge>{{2, 3}});
  // rows 0 and 1 carry a value the vocabulary never saw
  Schema s;
  s.columns = {{"c", ColumnKind::kCategorical}, {"y", ColumnKind::kTarget}};
  std::istringstream fit_in("c,y\nA,0\n");
  const Vocabulary vocab = build_vocabulary(load_table(fit_in, s));
  std::istringstream in("c,y\nB,0\nB,1\nA,0\n");
  Table u = impute(encode_categorical_ids(load_table(in, s), vocab).first);
  CHECK(u.at("c").ids[0] == vocab.columns.at("c").unseen_id());
  CHECK(extract_edges(u, same("c", "c")).edges.empty());
}

TEST_CASE("malformed relation specs are rejected") {
  const Table t = loans7();
  CHECK_THROWS_AS(extract_edges(t, same("t", "Overdue")), ValidationError);
  CHECK_THROWS_AS(extract_edges(t, same("t", "Apply time")), ValidationError);
  CHECK_THROWS_AS(extract_edges(t, same("t", "User ID")), ValidationError);
  CHECK_THROWS_AS(extract_edges(t, same("t", "Nope")), ValidationError);
  CHECK_THROWS_AS(extract_edges(t, same("t", "Age")), ValidationError);
  CHECK_THROWS_AS(extract_edges(t, {"d", RelationRule::kNumericDifference, {"Age"}, -1.0}), ValidationError);
  CHECK_THROWS_AS(extract_edges(t, {"d", RelationRule::kNumericDifference, {"Education"}, 1.0}), ValidationError);
  CHECK_THROWS_AS(extract_edges(t, {"k", RelationRule::kTopKSimilarity, {"Age"}, 0.0, 0}), ValidationError);
  CHECK_THROWS_AS(extract_edges(t, {"s", RelationRule::kSameValue, {"Education", "City"}}), ValidationError);
}

TEST_CASE("relation documents parse and reject bad input") {
  const RelationConfig cfg = load_relations(TABGNN_DATA_DIR "/loans7.relations.json");
  REQUIRE(cfg.relations.size() == 2);
  CHECK(cfg.relations[0].rule == RelationRule::kNumericDifference);
  CHECK(cfg.relations[0].threshold == 2.0);
  CHECK(cfg.options.cap == 50);
  const RelationConfig back = relations_from_json(relations_to_json(cfg));
  CHECK(back.relations[1].columns == cfg.relations[1].columns);
  CHECK_THROWS_AS(relations_from_json(nlohmann::json::parse(R"({"relations": []})")), ValidationError);
  CHECK_THROWS_AS(relations_from_json(nlohmann::json::parse(R"({"relations": [{"name": "a", "rule": "nope", "column": "x"}]})")),
                  ValidationError);
  CHECK_THROWS_AS(relations_from_json(nlohmann::json::parse(
                      R"({"relations": [{"name": "a", "rule": "same_value", "column": "x"},
                                        {"name": "a", "rule": "same_value", "column": "y"}]})")),
                  ValidationError);
}

TEST_CASE("brute-force oracle agrees for every rule") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const std::size_t n = 60 + 70 * seed;  // up to 200 rows
    const Table t = random_table(n, 6, seed);
    const Column& a = t.at("a");
    const Column& b = t.at("b");
    const Column& x = t.at("x");

    std::set<Edge> sv, pv, nd;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const Edge p{static_cast<NodeId>(i), static_cast<NodeId>(j)};
        if (keyed(a, i) && keyed(a, j) && a.ids[i] == a.ids[j]) sv.insert(p);
        if (keyed(a, i) && keyed(a, j) && keyed(b, i) && keyed(b, j) && a.ids[i] == a.ids[j] && b.ids[i] == b.ids[j])
          pv.insert(p);
        if (!x.missing[i] && !x.missing[j] && std::fabs(x.values[i] - x.values[j]) <= 1.0) nd.insert(p);
      }
    CHECK(as_set(extract_edges(t, same("a", "a"))) == sv);
    CHECK(as_set(extract_edges(t, {"p", RelationRule::kProductSameValue, {"a", "b"}})) == pv);
    CHECK(as_set(extract_edges(t, {"d", RelationRule::kNumericDifference, {"x"}, 1.0})) == nd);

    for (auto metric : {SimilarityMetric::kCosine, SimilarityMetric::kEuclidean}) {
      const std::size_t k = 3;
      const Column& u = t.at("u");
      const Column& v = t.at("v");
      std::set<Edge> topk;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, NodeId>> cand;
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          double s;
          if (metric == SimilarityMetric::kCosine) {
            const double ni = std::sqrt(u.values[i] * u.values[i] + v.values[i] * v.values[i]);
            const double nj = std::sqrt(u.values[j] * u.values[j] + v.values[j] * v.values[j]);
            s = ni > 0 && nj > 0 ? (u.values[i] * u.values[j] + v.values[i] * v.values[j]) / (ni * nj) : 0.0;
          } else {
            const double du = u.values[i] - u.values[j], dv = v.values[i] - v.values[j];
            s = -std::sqrt(du * du + dv * dv);
          }
          cand.emplace_back(s, static_cast<NodeId>(j));
        }
        std::sort(cand.begin(), cand.end(),
                  [](const auto& p, const auto& q) { return p.first != q.first ? p.first > q.first : p.second < q.second; });
        for (std::size_t r = 0; r < k; ++r)
          topk.insert({std::min<NodeId>(i, cand[r].second), std::max<NodeId>(i, cand[r].second)});
      }
      const EdgeSet got = extract_edges(t, {"k", RelationRule::kTopKSimilarity, {"u", "v"}, 0.0, k, metric});
      CHECK(as_set(got) == topk);
      std::vector<std::size_t> incident(n, 0);
      for (auto [p, q] : got.edges) {
        ++incident[p];
        ++incident[q];
      }
      CHECK(*std::min_element(incident.begin(), incident.end()) >= k);
    }
  }
}

TEST_CASE("extracted edge sets are canonical undirected pairs") {
  const Table t = random_table(150, 4, 9);
  for (const RelationSpec& spec : {same("a", "a"), RelationSpec{"d", RelationRule::kNumericDifference, {"x"}, 0.5},
                                   RelationSpec{"k", RelationRule::kTopKSimilarity, {"u", "v"}, 0.0, 2}}) {
    const EdgeSet e = extract_edges(t, spec);
    CHECK(std::is_sorted(e.edges.begin(), e.edges.end()));
    CHECK(std::adjacent_find(e.edges.begin(), e.edges.end()) == e.edges.end());
    for (auto [p, q] : e.edges) CHECK(p < q);
  }
}

TEST_CASE("top-k with K at least n links everything") {
  const Table t = random_table(5, 3, 4);
  const EdgeSet e = extract_edges(t, {"k", RelationRule::kTopKSimilarity, {"u", "v"}, 0.0, 10});
  CHECK(e.edges.size() == 10);
}

TEST_CASE("oversized equality groups are capped and reported") {
  std::ostringstream csv;
  csv << "c,t,y\n";
  for (int i = 0; i < 40; ++i) csv << "A,2020-01-" << (i % 28 + 1 < 10 ? "0" : "") << i % 28 + 1 << "," << i % 2 << "\n";
  const Table t = encoded(csv.str(), {{"c", ColumnKind::kCategorical}, {"t", ColumnKind::kTimestamp}, {"y", ColumnKind::kTarget}});
  ExtractOptions opt;
  opt.group_limit = 10;
  opt.cap = 3;
  ExtractReport rep;
  const EdgeSet e = extract_edges(t, same("c", "c"), opt, &rep);
  CHECK(rep.groups == 1);
  CHECK(rep.oversized_groups == 1);
  CHECK(rep.largest_group == 40);
  CHECK(e.edges.size() < 40 * 39 / 2);
  CHECK(e.edges.size() <= 40 * 3);

  const Table no_time = encoded(std::string("c,y\n") + [] {
    std::string s;
    for (int i = 0; i < 40; ++i) s += "A,0\n";
    return s;
  }(), {{"c", ColumnKind::kCategorical}, {"y", ColumnKind::kTarget}});
  const EdgeSet r1 = extract_edges(no_time, same("c", "c"), opt);
  const EdgeSet r2 = extract_edges(no_time, same("c", "c"), opt);
  CHECK(r1 == r2);
  std::vector<std::size_t> deg(40, 0);
  for (auto [p, q] : r1.edges) {
    ++deg[p];
    ++deg[q];
  }
  CHECK(*std::min_element(deg.begin(), deg.end()) >= 3);
}

TEST_CASE("temporal orientation follows time and keeps ties both ways") {
  const EdgeSet und{"r", {{0, 1}, {1, 2}}, false};
  const std::vector<double> t{1.0, 2.0, 2.0};
  const EdgeSet d = orient_temporal(und, t);
  CHECK(d.directed);
  CHECK(d.edges == std::vector<Edge>{{0, 1}, {1, 2}, {2, 1}});
  const std::vector<double> rev{5.0, 2.0, 3.0};
  CHECK(orient_temporal(und, rev).edges == std::vector<Edge>{{1, 0}, {1, 2}});
  CHECK_THROWS_AS(orient_temporal(und, std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(orient_temporal(d, t), ValidationError);
  CHECK(symmetrize(und).edges == std::vector<Edge>{{0, 1}, {1, 0}, {1, 2}, {2, 1}});
}

TEST_CASE("oriented edges never point back in time") {
  const Table t = random_table(120, 3, 5);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> day(0, 9);
  std::vector<double> stamps(t.n_rows());
  for (auto& s : stamps) s = day(rng);
  const EdgeSet d = orient_temporal(extract_edges(t, same("a", "a")), stamps);
  for (auto [u, v] : d.edges) CHECK(stamps[u] <= stamps[v]);
  // no path from a later node to an earlier one: reachability only grows in time
  const MultiplexGraph g = assemble(t.n_rows(), {d});
  for (NodeId start = 0; start < 20; ++start) {
    std::vector<NodeId> stack{start};
    std::vector<bool> seen(t.n_rows(), false);
    seen[start] = true;
    while (!stack.empty()) {
      const NodeId x = stack.back();
      stack.pop_back();
      CHECK(stamps[x] >= stamps[start]);
      for (auto [u, v] : d.edges)
        if (u == x && !seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
    }
  }
}

TEST_CASE("in-degree cap") {
  SUBCASE("under the cap nothing changes") {
    const EdgeSet e{"r", {{1, 0}, {2, 0}, {3, 0}}, true};
    CHECK(cap_in_degree(e, 5, {}, 0) == e);
  }
  SUBCASE("recency keeps the latest predecessors") {
    const EdgeSet e{"r", {{1, 0}, {2, 0}, {3, 0}, {4, 0}}, true};
    const std::vector<double> t{9, 1, 2, 3, 4};
    CHECK(cap_in_degree(e, 2, t, 0).edges == std::vector<Edge>{{3, 0}, {4, 0}});
  }
  SUBCASE("a star collapses to one edge") {
    EdgeSet e{"r", {}, true};
    for (NodeId s = 1; s <= 100; ++s) e.edges.push_back({s, 0});
    const EdgeSet c = cap_in_degree(e, 1, {}, 3);
    CHECK(c.edges.size() == 1);
    CHECK(c.edges[0].second == 0);
    CHECK(cap_in_degree(e, 1, {}, 3) == c);
  }
  SUBCASE("undirected input is capped per endpoint") {
    const EdgeSet e{"r", {{0, 1}, {0, 2}, {0, 3}}, false};
    const EdgeSet c = cap_in_degree(e, 2, {}, 1);
    CHECK(c.directed);
    std::vector<std::size_t> indeg(4, 0);
    for (auto [s, d] : c.edges) ++indeg[d];
    CHECK(indeg[0] == 2);
    CHECK(indeg[1] == 1);
  }
  CHECK_THROWS_AS(cap_in_degree(EdgeSet{"r", {}, true}, 0, {}, 0), ValidationError);
}

TEST_CASE("assemble builds neighborhoods and enforces invariants") {
  const Table t = loans7();
  const RelationConfig cfg = load_relations(TABGNN_DATA_DIR "/loans7.relations.json");
  const MultiplexGraph g = build_graph(t, cfg);
  CHECK(g.n_layers() == 2);
  CHECK(g.n_nodes() == 7);
  CHECK(g.directed());
  CHECK(g.layer_names() == std::vector<std::string>{"age", "education"});

  const MultiplexGraph empty = assemble(4, {EdgeSet{"none", {}, false}});
  for (NodeId x = 0; x < 4; ++x) {
    CHECK(empty.layer(0).hood.degree(x) == 1);
    CHECK(empty.layer(0).hood.nodes[empty.layer(0).hood.offsets[x]] == x);
  }
  CHECK_THROWS_AS(assemble(3, {}), ValidationError);
  CHECK_THROWS_AS(assemble(3, {EdgeSet{"r", {{0, 3}}, true}}), ValidationError);
  CHECK_THROWS_AS(assemble(3, {EdgeSet{"r", {{0, 1}, {0, 1}}, true}}), ValidationError);
  CHECK_THROWS_AS(assemble(3, {EdgeSet{"r", {{0, 1}, {1, 0}}, false}}), ValidationError);
  CHECK_THROWS_AS(assemble(3, {EdgeSet{"r", {{1, 1}}, true}}), ValidationError);
  CHECK_THROWS_AS(assemble(3, {EdgeSet{"a", {}, true}, EdgeSet{"b", {}, false}}), ValidationError);
}

TEST_CASE("neighborhood index lists self then sorted sources") {
  const EdgeSet e{"r", {{3, 0}, {1, 0}, {0, 2}, {2, 1}}, true};
  const MultiplexGraph g = assemble(4, {e});
  const Neighborhood& h = g.layer(0).hood;
  auto hood = [&](NodeId x) {
    return std::vector<NodeId>(h.nodes.begin() + static_cast<std::ptrdiff_t>(h.offsets[x]),
                               h.nodes.begin() + static_cast<std::ptrdiff_t>(h.offsets[x + 1]));
  };
  CHECK(hood(0) == std::vector<NodeId>{0, 1, 3});
  CHECK(hood(1) == std::vector<NodeId>{1, 2});
  CHECK(hood(2) == std::vector<NodeId>{2, 0});
  CHECK(hood(3) == std::vector<NodeId>{3});
  for (std::size_t s = 0; s < h.n_slots(); ++s) CHECK(h.offsets[h.owner[s]] <= s);
  for (NodeId u = 0; u < 4; ++u)
    for (std::size_t i = h.rev_offsets[u]; i < h.rev_offsets[u + 1]; ++i) CHECK(h.nodes[h.rev_slots[i]] == u);
  CHECK(h.rev_offsets[4] == h.n_slots());
}

TEST_CASE("edge sets, selection and flattening round-trip") {
  const Table t = random_table(80, 4, 21);
  RelationConfig cfg;
  cfg.relations = {same("a", "a"), {"d", RelationRule::kNumericDifference, {"x"}, 0.5}};
  cfg.options.cap = 0;
  const MultiplexGraph g = build_graph(t, cfg);
  const auto sets = g.edge_sets();
  const MultiplexGraph again = assemble(g.n_nodes(), sets);
  CHECK(again.edge_sets() == sets);

  const std::vector<std::string> pick{"d"};
  const MultiplexGraph only = g.select(pick);
  CHECK(only.n_layers() == 1);
  CHECK(only.layer(0).edges == g.layer(1).edges);
  CHECK_THROWS_AS(g.select(std::vector<std::string>{"zz"}), ValidationError);

  // flattening a single layer reproduces it
  CHECK(flatten(only, "d").edges == only.layer(0).edges.edges);
  std::set<Edge> both(sets[0].edges.begin(), sets[0].edges.end());
  both.insert(sets[1].edges.begin(), sets[1].edges.end());
  CHECK(as_set(flatten(g)) == both);
}

TEST_CASE("graph files round-trip") {
  const MultiplexGraph g = build_graph(loans7(), load_relations(TABGNN_DATA_DIR "/loans7.relations.json"));
  const auto dir = std::filesystem::temp_directory_path() / "tabgnn_graph_io_test";
  std::filesystem::remove_all(dir);
  write_graph(dir, g);
  const MultiplexGraph back = read_graph(dir);
  CHECK(back.n_nodes() == g.n_nodes());
  CHECK(back.directed() == g.directed());
  CHECK(back.edge_sets() == g.edge_sets());
  CHECK(back.layer(1).hood.nodes == g.layer(1).hood.nodes);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_graph(dir), ValidationError);
}

TEST_CASE("build is deterministic and respects the cap") {
  const Table t = random_table(200, 2, 33);
  RelationConfig cfg;
  cfg.relations = {same("a", "a")};
  cfg.options.cap = 5;
  cfg.options.seed = 4;
  const MultiplexGraph g1 = build_graph(t, cfg);
  const MultiplexGraph g2 = build_graph(t, cfg);
  CHECK(g1.edge_sets() == g2.edge_sets());
  for (NodeId x = 0; x < g1.n_nodes(); ++x) CHECK(g1.layer(0).hood.degree(x) <= 6);
}

}
