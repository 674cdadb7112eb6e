#include "tabgnn/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <vector>

#include "tabgnn/error.hpp"

namespace tabgnn {

PlantedData make_planted(const PlantedOptions& o) {
  if (o.n < 2 || o.groups_a < 1 || o.groups_b < 1) throw ValidationError("planted data needs rows and groups");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_a(0, o.groups_a - 1), pick_b(0, o.groups_b - 1);

  std::vector<double> latent(o.groups_a);
  for (auto& g : latent) g = normal(rng);
  std::vector<std::size_t> ga(o.n), gb(o.n);
  std::vector<double> f(o.n), n1(o.n), n2(o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    ga[i] = pick_a(rng);
    gb[i] = pick_b(rng);
    f[i] = latent[ga[i]] + o.feature_noise * normal(rng);
    n1[i] = normal(rng);
    n2[i] = normal(rng);
  }
  std::vector<double> sum(o.groups_a, 0.0);
  std::vector<std::size_t> count(o.groups_a, 0);
  for (std::size_t i = 0; i < o.n; ++i) {
    sum[ga[i]] += f[i];
    ++count[ga[i]];
  }

  PlantedData out;
  out.csv = "row_id,group_a,group_b,f,n1,n2,y\n";
  char buf[256];
  for (std::size_t i = 0; i < o.n; ++i) {
    const std::size_t others = count[ga[i]] - 1;
    const double signal = others > 0 ? (sum[ga[i]] - f[i]) / static_cast<double>(others) : 0.0;
    const int y = signal + o.label_noise * normal(rng) > 0.0 ? 1 : 0;
    std::snprintf(buf, sizeof buf, "r%zu,a%zu,b%zu,%.10g,%.10g,%.10g,%d\n", i, ga[i], gb[i], f[i], n1[i], n2[i], y);
    out.csv += buf;
  }

  out.schema.columns = {{"row_id", ColumnKind::kId, false, false},
                        {"group_a", ColumnKind::kCategorical, true, false},
                        {"group_b", ColumnKind::kCategorical, true, false},
                        {"f", ColumnKind::kNumerical, true, true},
                        {"n1", ColumnKind::kNumerical, true, true},
                        {"n2", ColumnKind::kNumerical, true, true},
                        {"y", ColumnKind::kTarget, false, false}};
  RelationSpec a{"A", RelationRule::kSameValue, {"group_a"}};
  RelationSpec b{"B", RelationRule::kSameValue, {"group_b"}};
  out.relations.relations = {a, b};
  return out;
}

void write_planted(const std::filesystem::path& dir, const std::string& stem, const PlantedData& data) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name);
    out << text;
    if (!out) throw RuntimeError("cannot write " + (dir / name).string());
  };
  write(stem + ".csv", data.csv);
  write(stem + ".schema.json", schema_to_json(data.schema).dump(2) + "\n");
  write(stem + ".relations.json", relations_to_json(data.relations).dump(2) + "\n");
}

}  // namespace tabgnn
