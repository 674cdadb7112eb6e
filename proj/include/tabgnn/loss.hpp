#pragma once

#include <span>
#include <vector>

#include "tabgnn/model.hpp"
#include "tabgnn/table.hpp"

namespace tabgnn {

// Mean binary cross-entropy (classification) or mean squared error
// (regression) of predictions against labels.
double loss(std::span<const double> y, std::span<const double> y_hat, Task task);

struct LossGrad {
  double value = 0.0;
  std::vector<double> dlogits;  // one entry per node, zero outside `rows`
};

// Same loss evaluated from head logits over the given rows, with its gradient.
// Classification uses softplus(z) - y z, which equals the cross-entropy of
// logistic(z) without the cancellation near 0 and 1.
LossGrad loss_from_logits(std::span<const double> logits, std::span<const double> y, std::span<const RowId> rows,
                          Task task);

}  // namespace tabgnn
