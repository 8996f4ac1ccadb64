#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "docmae/tensor.hpp"

namespace docmae {

// splitmix64 mixing of a base seed with stream identifiers, so that every
// (corpus seed, sample index, ...) tuple gets an independent stream.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

// xoshiro256** with portable samplers. Unlike <random> distributions the
// output sequence does not depend on the standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  std::size_t uniform_index(std::size_t n);  // [0, n)
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[uniform_index(i)]);
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0;
};

// Truncated normal N(0, std^2) clipped by resampling at +-2 std.
void trunc_normal_(Tensor& t, Rng& rng, double std = 0.02);

}  // namespace docmae
