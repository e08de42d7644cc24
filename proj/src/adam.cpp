#include "physicsnas/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace physicsnas {

std::uint64_t AdamState::steps(const Tensor& p) const {
  auto it = slots_.find(p.impl().get());
  return it == slots_.end() ? 0 : it->second.t;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  const auto& c = state.cfg_;
  for (auto& p : params) {
    if (!p.is_leaf() || !p.has_grad())
      throw std::logic_error("adam_step: parameter of shape " + shape_str(p.shape()) +
                             " has no gradient");
    auto& slot = state.slots_[p.impl().get()];
    if (slot.m.empty()) {
      slot.m.assign(p.size(), 0.0);
      slot.v.assign(p.size(), 0.0);
    }
    ++slot.t;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(slot.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(slot.t));
    auto w = p.mutable_values();
    auto g = p.mutable_grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      slot.m[i] = c.beta1 * slot.m[i] + (1.0 - c.beta1) * g[i];
      slot.v[i] = c.beta2 * slot.v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
      g[i] = 0.0;
    }
  }
}

}  // namespace physicsnas
