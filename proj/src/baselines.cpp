#include "physicsnas/baselines.hpp"

#include <stdexcept>

namespace physicsnas {

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Naive: return "naive";
    case BaselineKind::Fusion: return "fusion";
    case BaselineKind::Residual: return "residual";
    case BaselineKind::Regularized: return "regularized";
    case BaselineKind::Embedded: return "embedded";
  }
  return "?";
}

BaselineKind baseline_from_string(const std::string& s) {
  for (auto k : all_baselines())
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

std::vector<BaselineKind> all_baselines() {
  return {BaselineKind::Naive, BaselineKind::Fusion, BaselineKind::Residual,
          BaselineKind::Regularized, BaselineKind::Embedded};
}

Mlp::Mlp(LayerFactory& f, std::span<const std::size_t> widths) {
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers_.push_back(f.make(widths[i], widths[i + 1]));
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

void Mlp::collect(std::vector<Tensor>& out) const {
  for (const auto& l : layers_) {
    out.push_back(l.w);
    out.push_back(l.b);
  }
}

Tensor reg_penalty(Task task, const Tensor& pred, std::span<const double> x_raw) {
  const std::size_t rows = pred.rows();
  if (x_raw.size() != rows * input_width(task))
    throw DimensionError("reg_penalty: raw inputs do not match prediction rows");
  if (task == Task::Toss) {
    std::vector<std::size_t> xcols;
    for (std::size_t i = 0; i < kTossPredicted; ++i) xcols.push_back(2 * i);
    const std::size_t steps = kTossPredicted - 1;
    std::vector<double> diff(kTossPredicted * steps, 0.0);
    for (std::size_t j = 0; j < steps; ++j) {
      diff[j * steps + j] = -1.0;
      diff[(j + 1) * steps + j] = 1.0;
    }
    std::vector<double> dir(rows * steps);
    for (std::size_t r = 0; r < rows; ++r) {
      const double moved = x_raw[r * 6 + 4] - x_raw[r * 6 + 0];
      const double s = moved < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < steps; ++j) dir[r * steps + j] = -s;
    }
    const Tensor dx = matmul_const(gather_cols(pred, xcols), diff, kTossPredicted, steps);
    return scale(sum(relu(mul_const(dx, dir))), 1.0 / static_cast<double>(rows));
  }
  std::vector<double> half_mass(rows * 2), ke0(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = x_raw.data() + r * 7;
    half_mass[2 * r] = 0.5 * x[4];
    half_mass[2 * r + 1] = 0.5 * x[5];
    ke0[r] = 0.5 * x[4] * x[0] * x[0] + 0.5 * x[5] * x[2] * x[2];
  }
  const Tensor ke = sum_cols(mul_const(mul(pred, pred), half_mass));
  const Tensor excess = sub(ke, Tensor::from(ke.shape(), std::move(ke0)));
  return scale(sum(relu(excess)), 1.0 / static_cast<double>(rows));
}

namespace {

class MlpModel final : public Model {
 public:
  MlpModel(const ModelSpec& spec, const TaskScaling& scaling, std::uint64_t seed)
      : spec_(spec), scaling_(scaling) {
    LayerFactory f(seed);
    const std::size_t w[] = {input_width(spec.task), spec.hidden, spec.hidden, label_width(spec.task)};
    mlp_ = Mlp(f, w);
  }
  std::string name() const override { return to_string(spec_.kind); }
  Tensor forward(const Batch& b) const override { return mlp_(b.x); }
  std::vector<Tensor> parameters() const override {
    std::vector<Tensor> p;
    mlp_.collect(p);
    return p;
  }
  std::optional<Tensor> penalty(const Tensor& pred, const Batch& b) const override {
    if (spec_.kind != BaselineKind::Regularized || spec_.reg_lambda == 0.0) return std::nullopt;
    const Tensor phys = affine_cols(pred, scaling_.y.inverse_scale(), scaling_.y.inverse_shift());
    return scale(reg_penalty(spec_.task, phys, b.x_raw), spec_.reg_lambda);
  }

 private:
  ModelSpec spec_;
  TaskScaling scaling_;
  Mlp mlp_;
};

class FusionModel final : public Model {
 public:
  FusionModel(const ModelSpec& spec, std::uint64_t seed) {
    LayerFactory f(seed);
    const std::size_t out = label_width(spec.task);
    const std::size_t wx[] = {input_width(spec.task), spec.hidden, spec.hidden};
    const std::size_t wy[] = {out, spec.hidden, spec.hidden};
    x_branch_ = Mlp(f, wx);
    y_branch_ = Mlp(f, wy);
    head_ = f.make(2 * spec.hidden, out);
  }
  std::string name() const override { return "fusion"; }
  Tensor forward(const Batch& b) const override {
    const Tensor fx = relu(x_branch_(b.x));
    const Tensor fy = relu(y_branch_(b.y_phy));
    return head_(concat({fx, fy}));
  }
  std::vector<Tensor> parameters() const override {
    std::vector<Tensor> p;
    x_branch_.collect(p);
    y_branch_.collect(p);
    p.push_back(head_.w);
    p.push_back(head_.b);
    return p;
  }

 private:
  Mlp x_branch_, y_branch_;
  Linear head_;
};

class ResidualModel final : public Model {
 public:
  ResidualModel(const ModelSpec& spec, std::uint64_t seed) {
    LayerFactory f(seed);
    const std::size_t out = label_width(spec.task);
    const std::size_t w[] = {input_width(spec.task) + out, spec.hidden, spec.hidden, out};
    mlp_ = Mlp(f, w);
  }
  std::string name() const override { return "residual"; }
  Tensor forward(const Batch& b) const override {
    return add(b.y_phy, mlp_(concat({b.x, b.y_phy})));
  }
  std::vector<Tensor> parameters() const override {
    std::vector<Tensor> p;
    mlp_.collect(p);
    return p;
  }
  Mlp& mlp() { return mlp_; }

 private:
  Mlp mlp_;
};

class EmbeddedModel final : public Model {
 public:
  EmbeddedModel(const ModelSpec& spec, const TaskScaling& scaling, std::uint64_t seed)
      : scaling_(scaling) {
    LayerFactory f(seed);
    const std::size_t w[] = {input_width(spec.task), spec.hidden, spec.hidden};
    body_ = Mlp(f, w);
    head_ = f.make(spec.hidden, kPhysicalParams);
  }
  std::string name() const override { return "embedded"; }
  Tensor forward(const Batch& b) const override {
    return physics_forward(relu(body_(b.x)), head_, scaling_);
  }
  std::vector<Tensor> parameters() const override {
    std::vector<Tensor> p;
    body_.collect(p);
    p.push_back(head_.w);
    p.push_back(head_.b);
    return p;
  }

 private:
  TaskScaling scaling_;
  Mlp body_;
  Linear head_;
};

}  // namespace

std::unique_ptr<Model> build_model(const ModelSpec& spec, const TaskScaling& scaling,
                                   std::uint64_t seed) {
  if (scaling.task != spec.task)
    throw std::invalid_argument("build_model: scaling was fitted on a different task");
  switch (spec.kind) {
    case BaselineKind::Naive:
    case BaselineKind::Regularized: return std::make_unique<MlpModel>(spec, scaling, seed);
    case BaselineKind::Fusion: return std::make_unique<FusionModel>(spec, seed);
    case BaselineKind::Residual: return std::make_unique<ResidualModel>(spec, seed);
    case BaselineKind::Embedded: return std::make_unique<EmbeddedModel>(spec, scaling, seed);
  }
  throw std::invalid_argument("build_model: unknown model kind");
}

}  // namespace physicsnas
