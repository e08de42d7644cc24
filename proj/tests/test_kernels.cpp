#include "physicsnas/kernels.hpp"
#include "physicsnas/rng.hpp"

#include <doctest.h>

#include <cstring>
#include <vector>

using namespace physicsnas;
namespace k = physicsnas::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
  Rng rng(3);
  const int saved = k::max_threads();
  for (int threads : {1, 2, 3, 8}) {
    k::set_threads(threads);
    for (auto [rows, in, out] : {std::array<std::size_t, 3>{1, 1, 1}, {7, 5, 3}, {33, 128, 30},
                                 {300, 64, 128}, {1024, 9, 128}}) {
      CAPTURE(threads);
      CAPTURE(rows);
      const auto x = rand_vec(rows * in, rng), w = rand_vec(out * in, rng), b = rand_vec(out, rng);
      const auto dy = rand_vec(rows * out, rng);
      const k::MatView xv{x.data(), rows, in}, wv{w.data(), out, in}, dyv{dy.data(), rows, out};

      std::vector<double> s(rows * out), p(rows * out);
      k::serial::affine_forward(xv, wv, b, {s.data(), rows, out});
      k::parallel::affine_forward(xv, wv, b, {p.data(), rows, out});
      CHECK(same_bits(s, p));

      // Backward kernels accumulate, so start both from the same nonzero state.
      std::vector<double> gs = rand_vec(rows * in, rng), gp = gs;
      k::serial::affine_backward_input(dyv, wv, {gs.data(), rows, in});
      k::parallel::affine_backward_input(dyv, wv, {gp.data(), rows, in});
      CHECK(same_bits(gs, gp));

      std::vector<double> ws(out * in + out, 0.5), wp = ws;
      k::serial::affine_backward_weight(dyv, xv, {ws.data(), out, in}, std::span(ws).subspan(out * in));
      k::parallel::affine_backward_weight(dyv, xv, {wp.data(), out, in}, std::span(wp).subspan(out * in));
      CHECK(same_bits(ws, wp));

      // matmul with the same x against an [in x out] matrix.
      const auto m = rand_vec(in * out, rng);
      const k::MatView mv{m.data(), in, out};
      std::vector<double> ms(rows * out), mp(rows * out);
      k::serial::matmul(xv, mv, {ms.data(), rows, out});
      k::parallel::matmul(xv, mv, {mp.data(), rows, out});
      CHECK(same_bits(ms, mp));
      std::vector<double> bs(rows * in), bp(rows * in);
      k::serial::matmul_backward(dyv, mv, {bs.data(), rows, in});
      k::parallel::matmul_backward(dyv, mv, {bp.data(), rows, in});
      CHECK(same_bits(bs, bp));

      std::vector<double> dd(rows * out);
      k::affine_forward(xv, wv, b, {dd.data(), rows, out});
      CHECK(same_bits(s, dd));
    }
  }
  k::set_threads(saved);
}

TEST_CASE("affine_forward matches a hand computation") {
  // Two rows of two inputs, three outputs.
  const std::vector<double> x{1, 2, 3, 4}, w{1, 0, -1, 2, 0.5, 1}, bias{0.5, -1.0, 0.0};
  std::vector<double> out(6);
  k::serial::affine_forward({x.data(), 2, 2}, {w.data(), 3, 2}, bias, {out.data(), 2, 3});
  // row 0 = (1, 2): [1*1+0*2+0.5, -1*1+2*2-1, 0.5*1+1*2]
  CHECK(out[0] == 1.5);
  CHECK(out[1] == 2.0);
  CHECK(out[2] == 2.5);
  // row 1 = (3, 4)
  CHECK(out[3] == 3.5);
  CHECK(out[4] == 4.0);
  CHECK(out[5] == 5.5);
}
