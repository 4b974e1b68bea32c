#pragma once

#include "listgen/model.hpp"

namespace listgen {

struct AdamConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled, applied outside the moments
  int total_steps = 0;         // 0 disables warm-up
  double warmup_fraction = 0.1;
};

struct AdamState {
  std::vector<double> m, v;

  static AdamState zeros_like(const ScorerModel& model);
};

// Linear warm-up over the first warmup_fraction of total_steps:
// lr(step) = base_lr * (step + 1) / warmup_steps while warming, then base_lr.
double warmup_lr(const AdamConfig& config, int step_index);

// One Adam update with decoupled weight decay. With zero gradients the
// parameters move only by the decay term.
void optimizer_step(ScorerModel& model, const GradientSet& grads, AdamState& state,
                    int step_index, const AdamConfig& config);

}  // namespace listgen
