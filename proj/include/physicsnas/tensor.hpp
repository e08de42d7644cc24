#pragma once

// Define-by-run reverse-mode autodiff over dense 1-D / 2-D arrays.
//
// A Tensor is a cheap handle onto shared storage. Operations applied to
// tensors that require gradients record an OpRecord; backward() walks the
// records reachable from a scalar loss in reverse creation order. Rank-2
// tensors are treated as a stack of row vectors (one sample per row), which
// is the only batching the ops support.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace physicsnas {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TensorImpl;

using BackwardFn = std::function<void(std::span<const double> out_grad,
                                      const std::vector<std::shared_ptr<TensorImpl>>& parents)>;

struct OpRecord {
  std::uint64_t seq = 0;
  std::string kind;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first written
  bool requires_grad = false;
  std::shared_ptr<OpRecord> op;  // null for leaves
};

class Tensor {
 public:
  Tensor();

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->value.size(); }
  // Rows/cols of the row-stack view: a 1-D tensor is one row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return impl_->value; }
  double operator[](std::size_t i) const { return impl_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return impl_->value[r * cols() + c]; }
  double item() const;

  // Direct writes are for leaves only (optimizer updates, initialisation).
  std::span<double> mutable_values();

  bool requires_grad() const { return impl_->requires_grad; }
  // Leaves only: freezes or unfreezes a parameter for subsequent ops.
  void set_requires_grad(bool on);
  bool is_leaf() const { return impl_->op == nullptr; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Zeros if no backward pass has reached this tensor.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }

  // Copy of the values with no history.
  Tensor detach() const;
  Tensor clone_leaf(bool requires_grad) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Records reachable from a tensor, ordered so every record follows its parents.
struct Graph {
  struct Entry {
    const OpRecord* op;
    TensorImpl* output;
  };
  std::vector<Entry> nodes;
  static Graph reachable_from(const Tensor& root);
};

namespace detail {

// Builds an op result; records history only when some parent requires grad.
Tensor make_op(std::string kind, Shape shape, std::vector<double> value,
               std::vector<Tensor> parents, BackwardFn backward);

// Gradient buffer of a parent, allocated on demand; empty when the parent
// does not require gradients.
std::span<double> grad_sink(TensorImpl& t);

}  // namespace detail

// y = W x + b for x of shape [n] or [rows x n]; W is [m x n], b is [m].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor relu(const Tensor& x);
// Row-wise concatenation of feature blocks.
Tensor concat(const std::vector<Tensor>& xs);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// a * s for a scalar tensor s; differentiable in both.
Tensor scale_by(const Tensor& a, const Tensor& s);
Tensor softmax(const Tensor& z);
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Per-row sum, result shaped [rows x 1] (or [1] for a 1-D input).
Tensor sum_cols(const Tensor& x);
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols);
Tensor pick(const Tensor& z, std::size_t i);
// x . m for a constant [n x k] matrix m.
Tensor matmul_const(const Tensor& x, std::span<const double> m, std::size_t n, std::size_t k);
// Elementwise product with a constant of identical shape.
Tensor mul_const(const Tensor& x, std::span<const double> c);
// y[r, j] = x[r, j] * scale[j] + shift[j]
Tensor affine_cols(const Tensor& x, std::span<const double> scale, std::span<const double> shift);
// Forward value 1; the gradient passes through to the probability p.
Tensor straight_through(const Tensor& p);

// Reverse sweep from a scalar. Leaf gradients accumulate across calls;
// intermediate gradients are reset at the start of every sweep.
void backward(const Tensor& loss);

}  // namespace physicsnas
