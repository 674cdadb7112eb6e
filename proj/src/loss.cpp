#include "tabgnn/loss.hpp"

#include <cmath>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError(std::string("non-finite value in ") + what);
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double loss(std::span<const double> y, std::span<const double> y_hat, Task task) {
  if (y.size() != y_hat.size()) throw ValidationError("labels and predictions differ in length");
  if (y.empty()) throw ValidationError("loss of an empty set");
  check_finite(y, "labels");
  check_finite(y_hat, "predictions");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (task == Task::kClassification) {
      const double p = y_hat[i];
      if (!(p > 0.0 && p < 1.0)) throw ValidationError("classification predictions must lie in (0, 1)");
      sum -= y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p);
    } else {
      const double d = y_hat[i] - y[i];
      sum += d * d;
    }
  }
  return sum / static_cast<double>(y.size());
}

LossGrad loss_from_logits(std::span<const double> logits, std::span<const double> y, std::span<const RowId> rows,
                          Task task) {
  if (logits.size() != y.size()) throw ValidationError("logits and labels differ in length");
  if (rows.empty()) throw ValidationError("loss over an empty row set");
  LossGrad out;
  out.dlogits.assign(logits.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (RowId r : rows) {
    const double z = logits[r], t = y[r];
    if (!std::isfinite(z)) throw RuntimeError("non-finite logit at row " + std::to_string(r));
    if (!std::isfinite(t)) throw ValidationError("missing label at training row " + std::to_string(r));
    if (task == Task::kClassification) {
      out.value += softplus(z) - t * z;
      out.dlogits[r] = (logistic(z) - t) * inv;
    } else {
      out.value += (z - t) * (z - t);
      out.dlogits[r] = 2.0 * (z - t) * inv;
    }
  }
  out.value *= inv;
  return out;
}

}  // namespace tabgnn
