#include "physicsnas/kernels.hpp"

#include "kernels_rowops.hpp"

namespace physicsnas::kernels::serial {

void affine_forward(MatView x, MatView w, std::span<const double> bias, MutMatView out) {
  for (std::size_t r = 0; r < x.rows; ++r) rowops::affine_row(x, w, bias, out, r);
}

void affine_backward_input(MatView dy, MatView w, MutMatView dx) {
  for (std::size_t r = 0; r < dy.rows; ++r) rowops::affine_input_grad_row(dy, w, dx, r);
}

void affine_backward_weight(MatView dy, MatView x, MutMatView dw, std::span<double> db) {
  for (std::size_t i = 0; i < dw.rows; ++i) rowops::affine_weight_grad_row(dy, x, dw, db, i);
}

void matmul(MatView x, MatView m, MutMatView out) {
  for (std::size_t r = 0; r < x.rows; ++r) rowops::matmul_row(x, m, out, r);
}

void matmul_backward(MatView dy, MatView m, MutMatView dx) {
  for (std::size_t r = 0; r < dy.rows; ++r) rowops::matmul_grad_row(dy, m, dx, r);
}

}  // namespace physicsnas::kernels::serial
