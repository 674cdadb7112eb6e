#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tabgnn/matrix.hpp"
#include "tabgnn/model.hpp"

namespace tabgnn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(std::span<const Matrix* const> params);
OptimizerState make_optimizer_state(const ModelParams& params);

// One bias-corrected Adam update. Weight decay is decoupled:
// p <- p (1 - lr wd) before the moment update.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, OptimizerState& state,
               double lr, double weight_decay, const AdamConfig& cfg = {});
void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr, double weight_decay,
               const AdamConfig& cfg = {});

}  // namespace tabgnn
