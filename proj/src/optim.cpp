#include "docmae/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "docmae/errors.hpp"

namespace docmae {

void adam_step(std::span<Tensor> params, AdamState& state, double lr) {
  if (!(lr >= 0.0)) throw ContractError("adam_step: learning rate must be >= 0, got " + std::to_string(lr));
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.numel(), Scalar(0));
      state.v.emplace_back(p.numel(), Scalar(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel()) {
      throw DimensionError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    }
    if (params[i].requires_grad() && !all_finite(params[i].grad())) {
      throw PoisonedStateError("adam_step: non-finite gradient in parameter " + std::to_string(i) +
                               " at step " + std::to_string(state.step));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (!p.requires_grad()) continue;
    auto data = p.data();
    auto grad = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grad[j];
      const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      m[j] = static_cast<Scalar>(mj);
      v[j] = static_cast<Scalar>(vj);
      const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + state.eps);
      data[j] = static_cast<Scalar>(data[j] - update);
    }
  }
}

std::int64_t OneCycleSchedule::peak_step() const {
  if (total_steps <= 1) return 0;
  const auto peak = static_cast<std::int64_t>(std::floor(warmup_fraction * double(total_steps - 1)));
  return peak < 1 ? 1 : peak;
}

double one_cycle_lr(const OneCycleSchedule& sched, std::int64_t step) {
  if (sched.total_steps < 1 || step < 0 || step >= sched.total_steps) {
    throw ContractError("one_cycle_lr: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(sched.total_steps) + ")");
  }
  if (!(sched.warmup_fraction > 0.0 && sched.warmup_fraction < 1.0)) {
    throw ContractError("one_cycle_lr: warmup_fraction must lie in (0, 1)");
  }
  const double initial = sched.max_lr / 25.0;
  const double final_lr = sched.max_lr / 1e4;
  const std::int64_t peak = sched.peak_step();
  if (step <= peak) {
    if (peak == 0) return sched.max_lr;
    return initial + (sched.max_lr - initial) * double(step) / double(peak);
  }
  const double t = double(step - peak) / double(sched.total_steps - 1 - peak);
  return final_lr + (sched.max_lr - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace docmae
