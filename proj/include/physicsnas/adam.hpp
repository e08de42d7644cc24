#pragma once

#include "physicsnas/tensor.hpp"

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace physicsnas {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments are kept per parameter, and so is the step counter: a parameter
// left out of a step (e.g. an operation that was not sampled) keeps its
// moments and its bias-correction clock untouched.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::uint64_t steps(const Tensor& p) const;

 private:
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
  };
  friend void adam_step(std::span<Tensor> params, AdamState& state);

  AdamConfig cfg_;
  std::unordered_map<const TensorImpl*, Slot> slots_;
};

// One bias-corrected Adam update of every parameter, then zero their grads.
// Throws std::logic_error if a parameter has no gradient buffer.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace physicsnas
