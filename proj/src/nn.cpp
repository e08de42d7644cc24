#include "physicsnas/nn.hpp"

#include "physicsnas/rng.hpp"

#include <cmath>

namespace physicsnas {

Linear LayerFactory::make(std::size_t in, std::size_t out) {
  Rng rng(derive_seed(seed_, {0x6c61796572ULL, next_++}));
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& v : w) v = uniform(rng, -bound, bound);
  return {Tensor::matrix(out, in, std::move(w), true), Tensor::zeros({out}, true)};
}

Tensor projectile(const Tensor& params, std::span<const double> times) {
  const std::size_t k = 2 * times.size();
  std::vector<double> m(kPhysicalParams * k, 0.0);
  std::vector<double> shift(k, 0.0), ones(k, 1.0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    m[0 * k + 2 * i] = 1.0;      // x1
    m[2 * k + 2 * i] = t;        // vx
    m[1 * k + 2 * i + 1] = 1.0;  // y1
    m[3 * k + 2 * i + 1] = t;    // vy
    shift[2 * i + 1] = -0.5 * kGravity * t * t;
  }
  return affine_cols(matmul_const(params, m, kPhysicalParams, k), ones, shift);
}

Tensor elastic_collision(const Tensor& params) {
  if (params.cols() != kPhysicalParams)
    throw DimensionError("elastic_collision: expects 4 parameters per row, got " +
                         shape_str(params.shape()));
  const std::size_t rows = params.rows();
  std::vector<double> out(rows * 2);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = params.values().data() + r * kPhysicalParams;
    const auto v = elastic_collision(p[0], p[1], p[2], p[3]);
    out[2 * r] = v.a;
    out[2 * r + 1] = v.b;
  }
  Shape shape = params.rank() == 2 ? Shape{rows, 2} : Shape{2};
  auto result = out;
  return detail::make_op(
      "elastic_collision", std::move(shape), std::move(out), {params},
      [rows, result = std::move(result)](std::span<const double> g,
                                         const std::vector<std::shared_ptr<TensorImpl>>& par) {
        auto gp = detail::grad_sink(*par[0]);
        if (gp.empty()) return;
        const auto& pv = par[0]->value;
        for (std::size_t r = 0; r < rows; ++r) {
          const double ma = pv[4 * r], mb = pv[4 * r + 1], va = pv[4 * r + 2], vb = pv[4 * r + 3];
          const double s = ma + mb;
          const double fa = result[2 * r], fb = result[2 * r + 1];
          const double ga = g[2 * r], gb = g[2 * r + 1];
          gp[4 * r + 0] += ga * (va - fa) / s + gb * (2.0 * va - vb - fb) / s;
          gp[4 * r + 1] += ga * (2.0 * vb - va - fa) / s + gb * (vb - fb) / s;
          gp[4 * r + 2] += ga * (ma - mb) / s + gb * 2.0 * ma / s;
          gp[4 * r + 3] += ga * 2.0 * mb / s + gb * (mb - ma) / s;
        }
      });
}

Tensor physical_process(Task task, const Tensor& params, double dt) {
  if (task == Task::Toss) {
    const auto times = toss_prediction_times(dt);
    return projectile(params, times);
  }
  return elastic_collision(params);
}

Tensor physics_forward(const Tensor& features, const Linear& head, const TaskScaling& scaling) {
  const Tensor params = affine_cols(head(features), scaling.params.inverse_scale(),
                                    scaling.params.inverse_shift());
  const Tensor phys = physical_process(scaling.task, params, scaling.dt);
  return affine_cols(phys, scaling.y.forward_scale(), scaling.y.forward_shift());
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

}  // namespace physicsnas
