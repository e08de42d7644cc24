#pragma once

// Layers, the differentiable physics stages, and the Model interface shared
// by the baselines and searched architectures.

#include "physicsnas/dataset.hpp"
#include "physicsnas/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace physicsnas {

inline constexpr std::size_t kHiddenWidth = 128;

struct Linear {
  Tensor w;  // [out x in]
  Tensor b;  // [out]

  Tensor operator()(const Tensor& x) const { return affine(x, w, b); }
  std::size_t in() const { return w.shape()[1]; }
  std::size_t out() const { return w.shape()[0]; }
};

// Hands out layers initialised uniform in +-sqrt(1/fan_in) with zero bias.
// Layer k draws from a stream derived from (seed, k), so two models that
// create same-shaped layers in the same order start from identical weights.
class LayerFactory {
 public:
  explicit LayerFactory(std::uint64_t seed) : seed_(seed) {}
  Linear make(std::size_t in, std::size_t out);
  std::size_t created() const { return next_; }

 private:
  std::uint64_t seed_;
  std::size_t next_ = 0;
};

// Parabola (x1, y1, vx, vy) evaluated at each time: [rows x 4] -> [rows x 2T].
Tensor projectile(const Tensor& params, std::span<const double> times);

// Elastic collision (m_a, m_b, v_a1, v_b1): [rows x 4] -> [rows x 2].
Tensor elastic_collision(const Tensor& params);

// The task's physical process applied to parameters in physical units,
// output in physical label units.
Tensor physical_process(Task task, const Tensor& params, double dt);

// Standardized features -> head -> physical parameters -> physical process
// -> standardized labels.
Tensor physics_forward(const Tensor& features, const Linear& head, const TaskScaling& scaling);

class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  // Prediction in standardized label units, one row per sample.
  virtual Tensor forward(const Batch& batch) const = 0;
  virtual std::vector<Tensor> parameters() const = 0;
  // Additional objective term on the standardized prediction.
  virtual std::optional<Tensor> penalty(const Tensor& pred, const Batch& batch) const {
    (void)pred;
    (void)batch;
    return std::nullopt;
  }

  std::size_t parameter_count() const;
};

}  // namespace physicsnas
