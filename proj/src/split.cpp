#include "tabgnn/split.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

std::size_t split_count(double ratio, std::size_t n) {
  // ceil with slack so that exact products such as 0.2 * 10 stay at 2
  auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  return std::min(k, n);
}

}  // namespace

SplitResult temporal_split(const Table& table, double valid_ratio, bool temporal, std::uint64_t seed,
                           std::span<const RowId> rows) {
  if (!(valid_ratio > 0.0 && valid_ratio < 1.0)) throw ValidationError("valid ratio must lie in (0, 1)");
  std::vector<RowId> pool = rows.empty() ? table.labeled_rows() : std::vector<RowId>(rows.begin(), rows.end());
  const std::size_t k = split_count(valid_ratio, pool.size());
  SplitResult out;
  if (temporal) {
    if (!table.has_timestamps()) throw ValidationError("temporal split requires a timestamp column");
    auto t = table.timestamps();
    std::stable_sort(pool.begin(), pool.end(), [&](RowId a, RowId b) { return t[a] < t[b]; });
    std::size_t cut = pool.size() - k;
    if (k > 0)
      while (cut > 0 && t[pool[cut - 1]] == t[pool[cut]]) --cut;
    out.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cut));
    out.valid.assign(pool.begin() + static_cast<std::ptrdiff_t>(cut), pool.end());
  } else {
    std::sort(pool.begin(), pool.end());
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    out.valid.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    out.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.valid.begin(), out.valid.end());
  return out;
}

Splits make_splits(const Table& table, double valid_ratio, double test_ratio, bool temporal, std::uint64_t seed) {
  if (test_ratio < 0.0 || test_ratio >= 1.0) throw ValidationError("test ratio must lie in [0, 1)");
  Splits s;
  const auto& y = table.target().values;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (std::isnan(y[i])) s.unlabeled.push_back(static_cast<RowId>(i));
  std::vector<RowId> pool = table.labeled_rows();
  if (pool.empty()) throw ValidationError("table has no labeled rows");
  if (test_ratio > 0.0) {
    auto first = temporal_split(table, test_ratio, temporal, seed ^ 0x5bd1e995ULL, pool);
    s.test = std::move(first.valid);
    pool = std::move(first.train);
  }
  auto second = temporal_split(table, valid_ratio, temporal, seed, pool);
  s.train = std::move(second.train);
  s.valid = std::move(second.valid);
  if (s.train.empty()) throw ValidationError("split leaves no training rows");
  return s;
}

nlohmann::json splits_to_json(const Splits& s) {
  return {{"train", s.train}, {"valid", s.valid}, {"test", s.test}, {"unlabeled", s.unlabeled}};
}

Splits splits_from_json(const nlohmann::json& doc) {
  Splits s;
  s.train = doc.at("train").get<std::vector<RowId>>();
  s.valid = doc.at("valid").get<std::vector<RowId>>();
  s.test = doc.value("test", std::vector<RowId>{});
  s.unlabeled = doc.value("unlabeled", std::vector<RowId>{});
  return s;
}

}  // namespace tabgnn
