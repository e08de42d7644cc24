#include "physicsnas/kernels.hpp"

#include "kernels_rowops.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdint>

namespace physicsnas::kernels {

namespace parallel {

void affine_forward(MatView x, MatView w, std::span<const double> bias, MutMatView out) {
  const auto rows = static_cast<std::int64_t>(x.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) rowops::affine_row(x, w, bias, out, r);
}

void affine_backward_input(MatView dy, MatView w, MutMatView dx) {
  const auto rows = static_cast<std::int64_t>(dy.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) rowops::affine_input_grad_row(dy, w, dx, r);
}

void affine_backward_weight(MatView dy, MatView x, MutMatView dw, std::span<double> db) {
  const auto rows = static_cast<std::int64_t>(dw.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) rowops::affine_weight_grad_row(dy, x, dw, db, i);
}

void matmul(MatView x, MatView m, MutMatView out) {
  const auto rows = static_cast<std::int64_t>(x.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) rowops::matmul_row(x, m, out, r);
}

void matmul_backward(MatView dy, MatView m, MutMatView dx) {
  const auto rows = static_cast<std::int64_t>(dy.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) rowops::matmul_grad_row(dy, m, dx, r);
}

}  // namespace parallel

namespace {

bool go_parallel(std::size_t work) {
#ifdef _OPENMP
  return work >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
#else
  (void)work;
  return false;
#endif
}

}  // namespace

void affine_forward(MatView x, MatView w, std::span<const double> bias, MutMatView out) {
  if (go_parallel(x.rows * w.rows * w.cols))
    parallel::affine_forward(x, w, bias, out);
  else
    serial::affine_forward(x, w, bias, out);
}

void affine_backward_input(MatView dy, MatView w, MutMatView dx) {
  if (go_parallel(dy.rows * w.rows * w.cols))
    parallel::affine_backward_input(dy, w, dx);
  else
    serial::affine_backward_input(dy, w, dx);
}

void affine_backward_weight(MatView dy, MatView x, MutMatView dw, std::span<double> db) {
  if (go_parallel(dy.rows * dw.rows * dw.cols))
    parallel::affine_backward_weight(dy, x, dw, db);
  else
    serial::affine_backward_weight(dy, x, dw, db);
}

void matmul(MatView x, MatView m, MutMatView out) {
  if (go_parallel(x.rows * m.rows * m.cols))
    parallel::matmul(x, m, out);
  else
    serial::matmul(x, m, out);
}

void matmul_backward(MatView dy, MatView m, MutMatView dx) {
  if (go_parallel(dy.rows * m.rows * m.cols))
    parallel::matmul_backward(dy, m, dx);
  else
    serial::matmul_backward(dy, m, dx);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace physicsnas::kernels
