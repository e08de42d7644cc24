#include "physicsnas/tensor.hpp"

#include "physicsnas/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace physicsnas {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};

void check_rank(const Shape& s) {
  if (s.size() > 2) throw DimensionError("tensor rank > 2: " + shape_str(s));
}

std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
std::size_t cols_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->value.assign(1, 0.0); }

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_rank(shape);
  if (values.size() != shape_size(shape))
    throw DimensionError("value count " + std::to_string(values.size()) + " does not fill shape " +
                         shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return from({values.size()}, std::vector<double>(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return from({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

std::size_t Tensor::rows() const { return rows_of(impl_->shape); }
std::size_t Tensor::cols() const { return cols_of(impl_->shape); }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return impl_->value[0];
}

std::span<double> Tensor::mutable_values() {
  if (!is_leaf()) throw std::logic_error("mutable_values() on a non-leaf tensor");
  return impl_->value;
}

void Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) throw std::logic_error("set_requires_grad() on a non-leaf tensor");
  impl_->requires_grad = on;
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(size(), 0.0);
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), impl_->value, false); }

Tensor Tensor::clone_leaf(bool requires_grad) const {
  return from(shape(), impl_->value, requires_grad);
}

Graph Graph::reachable_from(const Tensor& root) {
  Graph g;
  std::unordered_set<const TensorImpl*> seen;
  std::vector<TensorImpl*> stack{root.impl().get()};
  while (!stack.empty()) {
    TensorImpl* t = stack.back();
    stack.pop_back();
    if (!t->op || !seen.insert(t).second) continue;
    g.nodes.push_back({t->op.get(), t});
    for (const auto& p : t->op->parents) stack.push_back(p.get());
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const Entry& a, const Entry& b) { return a.op->seq < b.op->seq; });
  return g;
}

namespace detail {

Tensor make_op(std::string kind, Shape shape, std::vector<double> value,
               std::vector<Tensor> parents, BackwardFn backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(value);
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
  if (needs) {
    auto rec = std::make_shared<OpRecord>();
    rec->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
    rec->kind = std::move(kind);
    rec->parents.reserve(parents.size());
    for (const auto& p : parents) rec->parents.push_back(p.impl());
    rec->backward = std::move(backward);
    impl->requires_grad = true;
    impl->op = std::move(rec);
  }
  return Tensor(std::move(impl));
}

std::span<double> grad_sink(TensorImpl& t) {
  if (!t.requires_grad) return {};
  if (t.grad.empty()) t.grad.assign(t.value.size(), 0.0);
  return t.grad;
}

}  // namespace detail

using detail::grad_sink;
using detail::make_op;
using Parents = std::vector<std::shared_ptr<TensorImpl>>;

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || b.rank() != 1 || x.rank() == 0 || b.shape()[0] != w.shape()[0] ||
      x.cols() != w.shape()[1])
    throw DimensionError("affine: x " + shape_str(x.shape()) + ", W " + shape_str(w.shape()) +
                         ", b " + shape_str(b.shape()) + " do not conform");
  const std::size_t rows = x.rows(), n = w.shape()[1], m = w.shape()[0];
  std::vector<double> out(rows * m);
  kernels::affine_forward({x.values().data(), rows, n}, {w.values().data(), m, n}, b.values(),
                          {out.data(), rows, m});
  Shape shape = x.rank() == 2 ? Shape{rows, m} : Shape{m};
  return make_op("affine", std::move(shape), std::move(out), {x, w, b},
                 [rows, n, m](std::span<const double> g, const Parents& p) {
                   const kernels::MatView dy{g.data(), rows, m};
                   auto gw = grad_sink(*p[1]);
                   auto gb = grad_sink(*p[2]);
                   if (!gw.empty() || !gb.empty()) {
                     std::vector<double> tmp_w, tmp_b;
                     if (gw.empty()) { tmp_w.assign(m * n, 0.0); gw = tmp_w; }
                     if (gb.empty()) { tmp_b.assign(m, 0.0); gb = tmp_b; }
                     kernels::affine_backward_weight(dy, {p[0]->value.data(), rows, n},
                                                     {gw.data(), m, n}, gb);
                   }
                   auto gx = grad_sink(*p[0]);
                   if (!gx.empty())
                     kernels::affine_backward_input(dy, {p[1]->value.data(), m, n},
                                                    {gx.data(), rows, n});
                 });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return make_op("relu", x.shape(), std::move(out), {x},
                 [](std::span<const double> g, const Parents& p) {
                   auto gx = grad_sink(*p[0]);
                   const auto& v = p[0]->value;
                   for (std::size_t i = 0; i < gx.size(); ++i)
                     if (v[i] > 0.0) gx[i] += g[i];
                 });
}

Tensor concat(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DimensionError("concat: empty input list");
  const std::size_t rows = xs[0].rows();
  const std::size_t rank = xs[0].rank();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& t : xs) {
    if (t.rank() != rank || t.rank() == 0 || t.rows() != rows)
      throw DimensionError("concat: incompatible shapes " + shape_str(xs[0].shape()) + " and " +
                           shape_str(t.shape()));
    widths.push_back(t.cols());
    total += t.cols();
  }
  std::vector<double> out(rows * total);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const auto v = xs[k].values();
      std::copy_n(v.data() + r * widths[k], widths[k], out.data() + r * total + off);
      off += widths[k];
    }
  }
  Shape shape = rank == 2 ? Shape{rows, total} : Shape{total};
  return make_op("concat", std::move(shape), std::move(out), xs,
                 [rows, total, widths](std::span<const double> g, const Parents& p) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < p.size(); ++k) {
                     auto gx = grad_sink(*p[k]);
                     if (!gx.empty())
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < widths[k]; ++j)
                           gx[r * widths[k] + j] += g[r * total + off + j];
                     off += widths[k];
                   }
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_op("add", a.shape(), std::move(out), {a, b},
                 [](std::span<const double> g, const Parents& p) {
                   for (int k = 0; k < 2; ++k) {
                     auto gx = grad_sink(*p[k]);
                     for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                   }
                 });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_op("sub", a.shape(), std::move(out), {a, b},
                 [](std::span<const double> g, const Parents& p) {
                   auto ga = grad_sink(*p[0]);
                   for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                   auto gb = grad_sink(*p[1]);
                   for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_op("mul", a.shape(), std::move(out), {a, b},
                 [](std::span<const double> g, const Parents& p) {
                   auto ga = grad_sink(*p[0]);
                   for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * p[1]->value[i];
                   auto gb = grad_sink(*p[1]);
                   for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * p[0]->value[i];
                 });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
  return make_op("scale", a.shape(), std::move(out), {a},
                 [c](std::span<const double> g, const Parents& p) {
                   auto ga = grad_sink(*p[0]);
                   for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * c;
                 });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw DimensionError("scale_by: factor must be scalar, got " + shape_str(s.shape()));
  const double c = s[0];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
  return make_op("scale_by", a.shape(), std::move(out), {a, s},
                 [c](std::span<const double> g, const Parents& p) {
                   auto ga = grad_sink(*p[0]);
                   for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * c;
                   auto gs = grad_sink(*p[1]);
                   if (!gs.empty()) {
                     double acc = 0.0;
                     for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * p[0]->value[i];
                     gs[0] += acc;
                   }
                 });
}

Tensor softmax(const Tensor& z) {
  if (z.rank() != 1 || z.size() == 0)
    throw DimensionError("softmax: expects a non-empty vector, got " + shape_str(z.shape()));
  const auto v = z.values();
  const double zmax = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += out[i] = std::exp(v[i] - zmax);
  for (auto& o : out) o /= total;
  auto probs = out;
  return make_op("softmax", z.shape(), std::move(out), {z},
                 [probs](std::span<const double> g, const Parents& p) {
                   auto gz = grad_sink(*p[0]);
                   double dot = 0.0;
                   for (std::size_t i = 0; i < probs.size(); ++i) dot += g[i] * probs[i];
                   for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += probs[i] * (g[i] - dot);
                 });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape("mse_loss", pred, target);
  const std::size_t n = pred.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return make_op("mse_loss", {}, {acc / static_cast<double>(n)}, {pred, target},
                 [n](std::span<const double> g, const Parents& p) {
                   const double k = 2.0 * g[0] / static_cast<double>(n);
                   auto gp = grad_sink(*p[0]);
                   for (std::size_t i = 0; i < gp.size(); ++i)
                     gp[i] += k * (p[0]->value[i] - p[1]->value[i]);
                   auto gt = grad_sink(*p[1]);
                   for (std::size_t i = 0; i < gt.size(); ++i)
                     gt[i] -= k * (p[0]->value[i] - p[1]->value[i]);
                 });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_op("sum", {}, {acc}, {x}, [](std::span<const double> g, const Parents& p) {
    auto gx = grad_sink(*p[0]);
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor sum_cols(const Tensor& x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += x[r * cols + c];
  Shape shape = x.rank() == 2 ? Shape{rows, 1} : Shape{1};
  return make_op("sum_cols", std::move(shape), std::move(out), {x},
                 [rows, cols](std::span<const double> g, const Parents& p) {
                   auto gx = grad_sink(*p[0]);
                   for (std::size_t r = 0; r < rows; ++r)
                     for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r];
                 });
}

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols) {
  const std::size_t rows = x.rows(), w = x.cols();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  for (auto c : idx)
    if (c >= w) throw DimensionError("gather_cols: column " + std::to_string(c) + " out of range for " + shape_str(x.shape()));
  std::vector<double> out(rows * idx.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < idx.size(); ++j) out[r * idx.size() + j] = x[r * w + idx[j]];
  Shape shape = x.rank() == 2 ? Shape{rows, idx.size()} : Shape{idx.size()};
  return make_op("gather_cols", std::move(shape), std::move(out), {x},
                 [rows, w, idx](std::span<const double> g, const Parents& p) {
                   auto gx = grad_sink(*p[0]);
                   for (std::size_t r = 0; r < rows; ++r)
                     for (std::size_t j = 0; j < idx.size(); ++j)
                       gx[r * w + idx[j]] += g[r * idx.size() + j];
                 });
}

Tensor pick(const Tensor& z, std::size_t i) {
  if (i >= z.size()) throw DimensionError("pick: index out of range for " + shape_str(z.shape()));
  return make_op("pick", {}, {z[i]}, {z}, [i](std::span<const double> g, const Parents& p) {
    auto gz = grad_sink(*p[0]);
    if (!gz.empty()) gz[i] += g[0];
  });
}

Tensor matmul_const(const Tensor& x, std::span<const double> m, std::size_t n, std::size_t k) {
  if (x.cols() != n || m.size() != n * k)
    throw DimensionError("matmul_const: x " + shape_str(x.shape()) + " vs constant [" +
                         std::to_string(n) + "x" + std::to_string(k) + "]");
  const std::size_t rows = x.rows();
  std::vector<double> mat(m.begin(), m.end());
  std::vector<double> out(rows * k);
  kernels::matmul({x.values().data(), rows, n}, {mat.data(), n, k}, {out.data(), rows, k});
  Shape shape = x.rank() == 2 ? Shape{rows, k} : Shape{k};
  return make_op("matmul_const", std::move(shape), std::move(out), {x},
                 [rows, n, k, mat = std::move(mat)](std::span<const double> g, const Parents& p) {
                   auto gx = grad_sink(*p[0]);
                   if (!gx.empty())
                     kernels::matmul_backward({g.data(), rows, k}, {mat.data(), n, k},
                                              {gx.data(), rows, n});
                 });
}

Tensor mul_const(const Tensor& x, std::span<const double> c) {
  if (c.size() != x.size())
    throw DimensionError("mul_const: constant of size " + std::to_string(c.size()) +
                         " vs tensor " + shape_str(x.shape()));
  std::vector<double> cv(c.begin(), c.end());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * cv[i];
  return make_op("mul_const", x.shape(), std::move(out), {x},
                 [cv = std::move(cv)](std::span<const double> g, const Parents& p) {
                   auto gx = grad_sink(*p[0]);
                   for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * cv[i];
                 });
}

Tensor affine_cols(const Tensor& x, std::span<const double> scale_v, std::span<const double> shift) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (scale_v.size() != cols || shift.size() != cols)
    throw DimensionError("affine_cols: per-column constants of size " +
                         std::to_string(scale_v.size()) + " vs tensor " + shape_str(x.shape()));
  std::vector<double> s(scale_v.begin(), scale_v.end());
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] * s[c] + shift[c];
  return make_op("affine_cols", x.shape(), std::move(out), {x},
                 [rows, cols, s = std::move(s)](std::span<const double> g, const Parents& p) {
                   auto gx = grad_sink(*p[0]);
                   if (gx.empty()) return;
                   for (std::size_t r = 0; r < rows; ++r)
                     for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c] * s[c];
                 });
}

Tensor straight_through(const Tensor& p) {
  if (p.size() != 1) throw DimensionError("straight_through: expects a scalar, got " + shape_str(p.shape()));
  return make_op("straight_through", {}, {1.0}, {p},
                 [](std::span<const double> g, const Parents& par) {
                   auto gp = grad_sink(*par[0]);
                   if (!gp.empty()) gp[0] += g[0];
                 });
}

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw DimensionError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  auto& root = *loss.impl();
  if (!root.op) {
    auto g = grad_sink(root);
    if (!g.empty()) g[0] += 1.0;
    return;
  }
  const auto graph = Graph::reachable_from(loss);
  for (const auto& e : graph.nodes) e.output->grad.assign(e.output->value.size(), 0.0);
  root.grad[0] = 1.0;
  for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it)
    it->op->backward(it->output->grad, it->op->parents);
}

}  // namespace physicsnas
