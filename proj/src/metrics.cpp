#include "tabgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tabgnn/error.hpp"

namespace tabgnn {

double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw ValidationError("auc: NaN score");
    if (labels[i] != 0.0 && labels[i] != 1.0) throw ValidationError("auc: labels must be 0 or 1");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the number of correctly ordered pairs, so ties stay integral.
  std::uint64_t twice = 0, neg_below = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, n = 0;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) (labels[order[j]] == 1.0 ? p : n) += 1;
    twice += p * (2 * neg_below + n);
    neg_below += n;
    pos += p;
    neg += n;
    i = j;
  }
  if (pos == 0 || neg == 0) throw ValidationError("auc needs both classes present");
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ValidationError("mse: inputs differ in length");
  if (pred.empty()) throw ValidationError("mse of empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

}  // namespace tabgnn
