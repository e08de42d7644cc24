#pragma once

// Per-row bodies shared by the serial and parallel kernels. Keeping a single
// body per output row is what makes the two drivers agree bit for bit.

#include "physicsnas/kernels.hpp"

namespace physicsnas::kernels::rowops {

// Fixed-order dot product with four interleaved partial sums.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

inline void affine_row(MatView x, MatView w, std::span<const double> bias, MutMatView out,
                       std::size_t r) {
  const double* xr = x.data + r * x.cols;
  double* o = out.data + r * out.cols;
  for (std::size_t i = 0; i < w.rows; ++i) o[i] = dot(xr, w.data + i * w.cols, x.cols) + bias[i];
}

inline void affine_input_grad_row(MatView dy, MatView w, MutMatView dx, std::size_t r) {
  const double* g = dy.data + r * dy.cols;
  double* d = dx.data + r * dx.cols;
  for (std::size_t i = 0; i < w.rows; ++i) {
    if (g[i] != 0.0) axpy(g[i], w.data + i * w.cols, d, w.cols);
  }
}

inline void affine_weight_grad_row(MatView dy, MatView x, MutMatView dw, std::span<double> db,
                                   std::size_t i) {
  double* d = dw.data + i * dw.cols;
  double bsum = 0.0;
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const double g = dy.data[r * dy.cols + i];
    bsum += g;
    if (g != 0.0) axpy(g, x.data + r * x.cols, d, x.cols);
  }
  db[i] += bsum;
}

inline void matmul_row(MatView x, MatView m, MutMatView out, std::size_t r) {
  double* o = out.data + r * out.cols;
  for (std::size_t j = 0; j < out.cols; ++j) o[j] = 0.0;
  const double* xr = x.data + r * x.cols;
  for (std::size_t k = 0; k < x.cols; ++k) {
    if (xr[k] != 0.0) axpy(xr[k], m.data + k * m.cols, o, m.cols);
  }
}

inline void matmul_grad_row(MatView dy, MatView m, MutMatView dx, std::size_t r) {
  const double* g = dy.data + r * dy.cols;
  double* d = dx.data + r * dx.cols;
  for (std::size_t k = 0; k < m.rows; ++k) d[k] += dot(g, m.data + k * m.cols, m.cols);
}

}  // namespace physicsnas::kernels::rowops
