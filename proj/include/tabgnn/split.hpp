#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tabgnn/table.hpp"

namespace tabgnn {

struct SplitResult {
  std::vector<RowId> train;
  std::vector<RowId> valid;
};

// Splits `rows` (all labeled rows when empty). Temporal mode puts the
// ceil(ratio * n) latest rows in the validation set; rows tied with the
// earliest validation timestamp also go there. Random mode draws the
// validation rows uniformly under `seed`. Both outputs are sorted.
SplitResult temporal_split(const Table& table, double valid_ratio, bool temporal, std::uint64_t seed,
                           std::span<const RowId> rows = {});

struct Splits {
  std::vector<RowId> train;
  std::vector<RowId> valid;
  std::vector<RowId> test;
  // Rows without a label; graph nodes, never scored.
  std::vector<RowId> unlabeled;
};

// Test rows are split off first with the same rule, then validation rows
// from the remainder.
Splits make_splits(const Table& table, double valid_ratio, double test_ratio, bool temporal,
                   std::uint64_t seed);

nlohmann::json splits_to_json(const Splits& splits);
Splits splits_from_json(const nlohmann::json& doc);

}  // namespace tabgnn
