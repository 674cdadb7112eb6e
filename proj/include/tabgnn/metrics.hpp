#pragma once

#include <span>

namespace tabgnn {

// Probability that a random positive scores above a random negative, ties
// counting one half. Labels must be 0 or 1 with both classes present.
double auc(std::span<const double> scores, std::span<const double> labels);

double mse(std::span<const double> pred, std::span<const double> target);

}  // namespace tabgnn
