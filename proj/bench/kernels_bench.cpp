// Serial vs OpenMP kernels on the shapes the models use. Prints one line per
// (kernel, shape) with both timings, the speedup, and whether the outputs
// are bitwise identical.

#include "physicsnas/kernels.hpp"
#include "physicsnas/rng.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

using namespace physicsnas;
namespace k = physicsnas::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

double time_ms(int reps, const std::function<void()>& f) {
  f();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

struct Shape {
  std::size_t rows, in, out;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel kernel benchmark"};
  int reps = 20;
  int threads = k::max_threads();
  app.add_option("--reps", reps, "repetitions per measurement");
  app.add_option("--threads", threads, "OpenMP threads for the parallel kernels");
  CLI11_PARSE(app, argc, argv);
  k::set_threads(threads);

  const std::vector<Shape> shapes{{32, 6, 128}, {128, 128, 128}, {128, 36, 128},
                                  {1024, 128, 128}, {1024, 128, 30}, {4096, 128, 128}};
  Rng rng(42);
  std::printf("threads=%d reps=%d\n", threads, reps);
  std::printf("%-22s %18s %10s %10s %8s %6s\n", "kernel", "rows x in -> out", "serial_ms",
              "parallel_ms", "speedup", "equal");
  bool all_equal = true;
  for (const auto& s : shapes) {
    const auto x = random_vec(s.rows * s.in, rng);
    const auto w = random_vec(s.out * s.in, rng);
    const auto b = random_vec(s.out, rng);
    const auto dy = random_vec(s.rows * s.out, rng);
    const k::MatView xv{x.data(), s.rows, s.in}, wv{w.data(), s.out, s.in}, dyv{dy.data(), s.rows, s.out};

    auto report = [&](const char* name, std::vector<double>& a, std::vector<double>& c,
                      const std::function<void(std::vector<double>&)>& ser,
                      const std::function<void(std::vector<double>&)>& par) {
      const double ts = time_ms(reps, [&] { std::fill(a.begin(), a.end(), 0.0); ser(a); });
      const double tp = time_ms(reps, [&] { std::fill(c.begin(), c.end(), 0.0); par(c); });
      std::fill(a.begin(), a.end(), 0.0);
      std::fill(c.begin(), c.end(), 0.0);
      ser(a);
      par(c);
      const bool eq = std::memcmp(a.data(), c.data(), a.size() * sizeof(double)) == 0;
      all_equal = all_equal && eq;
      char shape[40];
      std::snprintf(shape, sizeof shape, "%zux%zu -> %zu", s.rows, s.in, s.out);
      std::printf("%-22s %18s %10.3f %10.3f %8.2f %6s\n", name, shape, ts, tp, ts / tp, eq ? "yes" : "NO");
    };

    std::vector<double> o1(s.rows * s.out), o2(s.rows * s.out);
    report("affine_forward", o1, o2,
           [&](auto& o) { k::serial::affine_forward(xv, wv, b, {o.data(), s.rows, s.out}); },
           [&](auto& o) { k::parallel::affine_forward(xv, wv, b, {o.data(), s.rows, s.out}); });
    std::vector<double> g1(s.rows * s.in), g2(s.rows * s.in);
    report("affine_backward_input", g1, g2,
           [&](auto& g) { k::serial::affine_backward_input(dyv, wv, {g.data(), s.rows, s.in}); },
           [&](auto& g) { k::parallel::affine_backward_input(dyv, wv, {g.data(), s.rows, s.in}); });
    std::vector<double> w1(s.out * s.in + s.out), w2(s.out * s.in + s.out);
    report("affine_backward_weight", w1, w2,
           [&](auto& g) {
             k::serial::affine_backward_weight(dyv, xv, {g.data(), s.out, s.in},
                                               std::span(g).subspan(s.out * s.in));
           },
           [&](auto& g) {
             k::parallel::affine_backward_weight(dyv, xv, {g.data(), s.out, s.in},
                                                 std::span(g).subspan(s.out * s.in));
           });
  }
  return all_equal ? 0 : 1;
}
