#pragma once

// Test-only finite-difference oracle, independent of the autograd code paths.

#include <cmath>
#include <functional>
#include <vector>

#include "docmae/tensor.hpp"

namespace docmae::testing {

using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradComparison {
  double rel_error = 0.0;  // |a - n|_2 / (|a|_2 + |n|_2)
  double analytic_norm = 0.0;
  std::size_t entries = 0;
};

// Compares backward() against central differences of `loss` with respect to
// every entry of every input. Inputs must be leaves; they are marked
// trainable here.
inline GradComparison compare_gradients(std::vector<Tensor> inputs, const LossFn& loss, double h = 1e-6) {
  for (Tensor& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(loss(inputs));
  std::vector<double> analytic, numeric;
  for (Tensor& t : inputs)
    for (auto g : t.grad()) analytic.push_back(double(g));
  NoGradGuard no_grad;
  for (Tensor& t : inputs) {
    auto data = t.data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const Scalar saved = data[j];
      data[j] = saved + Scalar(h);
      const double plus = loss(inputs).item();
      data[j] = saved - Scalar(h);
      const double minus = loss(inputs).item();
      data[j] = saved;
      numeric.push_back((plus - minus) / (2 * h));
    }
  }
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  GradComparison out;
  out.entries = analytic.size();
  out.analytic_norm = std::sqrt(na);
  const double denom = std::sqrt(na) + std::sqrt(nn);
  out.rel_error = denom == 0 ? 0.0 : std::sqrt(diff) / denom;
  return out;
}

}  // namespace docmae::testing
