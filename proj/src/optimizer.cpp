#include "tabgnn/optimizer.hpp"

#include <cmath>

#include "tabgnn/error.hpp"

namespace tabgnn {

namespace {

std::vector<Matrix*> tensors(ModelParams& p) {
  std::vector<Matrix*> out;
  for (auto& [name, t] : named_tensors(p)) out.push_back(t);
  return out;
}

std::vector<const Matrix*> tensors(const ModelParams& p) {
  std::vector<const Matrix*> out;
  for (auto& [name, t] : named_tensors(p)) out.push_back(t);
  return out;
}

}  // namespace

OptimizerState make_optimizer_state(std::span<const Matrix* const> params) {
  OptimizerState s;
  for (const Matrix* p : params) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

OptimizerState make_optimizer_state(const ModelParams& params) { return make_optimizer_state(tensors(params)); }

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, OptimizerState& state,
               double lr, double weight_decay, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ValidationError("optimizer: parameter, gradient and state counts differ");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    if (!p.same_shape(g) || !p.same_shape(m)) throw ValidationError("optimizer: shape mismatch in tensor " + std::to_string(k));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (weight_decay != 0.0) p[i] *= decay;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1, v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr, double weight_decay,
               const AdamConfig& cfg) {
  const auto p = tensors(params);
  const auto g = tensors(grads);
  adam_step(p, g, state, lr, weight_decay, cfg);
}

}  // namespace tabgnn
