#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tabgnn/relation.hpp"
#include "tabgnn/schema.hpp"

namespace tabgnn {

// Planted-signal table. Rows fall into groups along column `group_a`, each
// group with a latent value g ~ N(0, 1). Every row carries a noisy copy
// f = g + feature_noise * N(0, 1) plus two pure-noise columns, and its label
// is 1 when the mean f over the other members of its group, plus
// label_noise * N(0, 1), is positive. Column `group_b` assigns unrelated
// random groups. Both group columns feed relations only, never features, so
// the label is mostly recoverable through relation A and not from a row's own
// features.
struct PlantedOptions {
  std::size_t n = 2000;
  std::size_t groups_a = 100;
  std::size_t groups_b = 100;
  double feature_noise = 1.5;
  double label_noise = 0.3;
  std::uint64_t seed = 0;
};

struct PlantedData {
  Schema schema;
  RelationConfig relations;  // "A" on group_a, "B" on group_b
  std::string csv;
};

PlantedData make_planted(const PlantedOptions& options);

// Writes <stem>.csv, <stem>.schema.json and <stem>.relations.json into dir.
void write_planted(const std::filesystem::path& dir, const std::string& stem, const PlantedData& data);

}  // namespace tabgnn
