#include "listgen/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace listgen {

AdamState AdamState::zeros_like(const ScorerModel& model) {
  AdamState s;
  s.m.assign(model.params.size(), 0.0);
  s.v.assign(model.params.size(), 0.0);
  return s;
}

double warmup_lr(const AdamConfig& config, int step_index) {
  if (config.total_steps <= 0 || config.warmup_fraction <= 0.0) {
    return config.base_lr;
  }
  int warmup_steps =
      std::max(1, static_cast<int>(config.total_steps * config.warmup_fraction));
  if (step_index >= warmup_steps) return config.base_lr;
  return config.base_lr * static_cast<double>(step_index + 1) / warmup_steps;
}

void optimizer_step(ScorerModel& model, const GradientSet& grads, AdamState& state,
                    int step_index, const AdamConfig& config) {
  if (grads.values.size() != model.params.size() ||
      state.m.size() != model.params.size()) {
    throw std::invalid_argument("gradient/state shape mismatch");
  }
  const double lr = warmup_lr(config, step_index);
  const double b1 = config.beta1, b2 = config.beta2;
  const double bc1 = 1.0 - std::pow(b1, step_index + 1);
  const double bc2 = 1.0 - std::pow(b2, step_index + 1);

  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const double g = grads.values[i];
    if (!std::isfinite(g)) throw std::invalid_argument("non-finite gradient");
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    model.params[i] -= lr * (mhat / (std::sqrt(vhat) + config.eps) +
                             config.weight_decay * model.params[i]);
  }
}

}  // namespace listgen
