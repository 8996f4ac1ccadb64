#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "docmae/tensor.hpp"

namespace docmae {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<Scalar>> m;
  std::vector<std::vector<Scalar>> v;
};

// Bias-corrected Adam over each parameter's .grad. Parameters that do not
// require grad are skipped. Any non-finite gradient refuses the whole update
// with PoisonedStateError and leaves params and state untouched.
void adam_step(std::span<Tensor> params, AdamState& state, double lr);

// Linear warmup from max_lr/25 to max_lr, then cosine decay to max_lr/1e4.
struct OneCycleSchedule {
  double max_lr = 1e-4;
  std::int64_t total_steps = 1;
  double warmup_fraction = 0.3;

  std::int64_t peak_step() const;
};

double one_cycle_lr(const OneCycleSchedule& sched, std::int64_t step);

}  // namespace docmae
