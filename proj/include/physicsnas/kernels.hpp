#pragma once

// Dense row-major kernels used by the autodiff layer.
//
// Two implementations share one contract: `serial` is the reference, and
// `parallel` splits the output rows across OpenMP threads. Every output
// element is reduced in the same order by both, so results are bitwise
// identical regardless of the thread count.

#include <cstddef>
#include <span>

namespace physicsnas::kernels {

struct MatView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
};

struct MutMatView {
  double* data;
  std::size_t rows;
  std::size_t cols;
};

namespace serial {

// out[r, i] = bias[i] + sum_k x[r, k] * w[i, k]
void affine_forward(MatView x, MatView w, std::span<const double> bias, MutMatView out);
// dx[r, k] += sum_i dy[r, i] * w[i, k]
void affine_backward_input(MatView dy, MatView w, MutMatView dx);
// dw[i, k] += sum_r dy[r, i] * x[r, k];  db[i] += sum_r dy[r, i]
void affine_backward_weight(MatView dy, MatView x, MutMatView dw, std::span<double> db);
// out[r, j] = sum_k x[r, k] * m[k, j]
void matmul(MatView x, MatView m, MutMatView out);
// dx[r, k] += sum_j dy[r, j] * m[k, j]
void matmul_backward(MatView dy, MatView m, MutMatView dx);

}  // namespace serial

namespace parallel {

void affine_forward(MatView x, MatView w, std::span<const double> bias, MutMatView out);
void affine_backward_input(MatView dy, MatView w, MutMatView dx);
void affine_backward_weight(MatView dy, MatView x, MutMatView dw, std::span<double> db);
void matmul(MatView x, MatView m, MutMatView out);
void matmul_backward(MatView dy, MatView m, MutMatView dx);

}  // namespace parallel

// Work (multiply-adds) below which the dispatchers stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

// Dispatchers used by the tensor ops: parallel above the threshold and
// outside an enclosing parallel region, serial otherwise.
void affine_forward(MatView x, MatView w, std::span<const double> bias, MutMatView out);
void affine_backward_input(MatView dy, MatView w, MutMatView dx);
void affine_backward_weight(MatView dy, MatView x, MutMatView dw, std::span<double> db);
void matmul(MatView x, MatView m, MutMatView out);
void matmul_backward(MatView dy, MatView m, MutMatView dx);

// Threads available to the parallel kernels (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace physicsnas::kernels
