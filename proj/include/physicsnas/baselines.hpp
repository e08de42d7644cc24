#pragma once

// Hand-designed physics-based-learning reference models. All of them share
// the MLP building block (hidden width 128, ReLU) and the train() loop.

#include "physicsnas/dataset.hpp"
#include "physicsnas/nn.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace physicsnas {

enum class BaselineKind { Naive, Fusion, Residual, Regularized, Embedded };

std::string to_string(BaselineKind k);
BaselineKind baseline_from_string(const std::string& s);
std::vector<BaselineKind> all_baselines();

struct ModelSpec {
  BaselineKind kind = BaselineKind::Naive;
  Task task = Task::Toss;
  std::size_t hidden = kHiddenWidth;
  double reg_lambda = 0.1;  // Regularized only
};

// Naive/Regularized: x -> 128 -> 128 -> out.
// Fusion: [x -> 128 -> 128] ++ [y_phy -> 128 -> 128] -> out.
// Residual: y_phy + MLP(concat(x, y_phy)).
// Embedded: MLP(x) -> 4 physical parameters -> fixed physical process.
std::unique_ptr<Model> build_model(const ModelSpec& spec, const TaskScaling& scaling,
                                   std::uint64_t seed);

// Hinge penalty on a prediction in physical units, averaged over rows.
// Toss: backwards horizontal steps relative to the observed direction.
// Collision: kinetic energy in excess of the initial kinetic energy.
Tensor reg_penalty(Task task, const Tensor& pred_physical, std::span<const double> x_raw);

// The prior itself as a predictor (no parameters).
class PriorModel final : public Model {
 public:
  std::string name() const override { return "prior"; }
  Tensor forward(const Batch& batch) const override { return batch.y_phy; }
  std::vector<Tensor> parameters() const override { return {}; }
};

// x -> ReLU(affine) -> ... -> affine, used by several baselines.
class Mlp {
 public:
  Mlp() = default;
  Mlp(LayerFactory& f, std::span<const std::size_t> widths);
  Tensor operator()(const Tensor& x) const;
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<Linear>& layers() { return layers_; }
  void collect(std::vector<Tensor>& out) const;

 private:
  std::vector<Linear> layers_;
};

}  // namespace physicsnas
