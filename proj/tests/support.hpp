#pragma once
// Helpers shared by the unit tests and the acceptance binary: a central
// finite-difference gradient checker and independent physics oracles.
#include "physicsnas/physics.hpp"
#include "physicsnas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace physicsnas::testing {

// Contracts a tensor to a scalar with fixed, uneven weights so every output
// element reaches the gradient with a different coefficient.
inline Tensor contract(const Tensor& t) {
  std::vector<double> w(t.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.3 * static_cast<double>(i) + 0.7) + 0.1;
  return sum(mul_const(t, w));
}

// |analytic - numeric| / max(1, |analytic|, |numeric|), worst over every
// element of every input.
inline double gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                        std::vector<Tensor> inputs, double h = 1e-6) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  backward(f(inputs));
  double worst = 0.0;
  for (auto& t : inputs) {
    const auto analytic = t.grad();
    auto v = t.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = f(inputs).item();
      v[i] = keep - h;
      const double down = f(inputs).item();
      v[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

// Toss under gravity, wind and quadratic drag, integrated with classic RK4.
inline std::vector<Point2> rk4_toss(const TossScenario& s, std::size_t n_stamps, double h = 1e-3) {
  struct State {
    double px, py, vx, vy;
  };
  auto deriv = [&](const State& q) {
    const double speed = std::hypot(q.vx, q.vy);
    return State{q.vx, q.vy, s.wind_x - s.drag_k * speed * q.vx / s.mass,
                 -kGravity + s.wind_y - s.drag_k * speed * q.vy / s.mass};
  };
  auto axpy = [](const State& a, double c, const State& d) {
    return State{a.px + c * d.px, a.py + c * d.py, a.vx + c * d.vx, a.vy + c * d.vy};
  };
  State q{s.x0, s.y0, s.vx, s.vy};
  const auto sub = static_cast<std::size_t>(std::llround(s.dt / h));
  std::vector<Point2> out{{q.px, q.py}};
  for (std::size_t i = 1; i < n_stamps; ++i) {
    for (std::size_t k = 0; k < sub; ++k) {
      const State k1 = deriv(q);
      const State k2 = deriv(axpy(q, h / 2, k1));
      const State k3 = deriv(axpy(q, h / 2, k2));
      const State k4 = deriv(axpy(q, h, k3));
      q = {q.px + h / 6 * (k1.px + 2 * k2.px + 2 * k3.px + k4.px),
           q.py + h / 6 * (k1.py + 2 * k2.py + 2 * k3.py + k4.py),
           q.vx + h / 6 * (k1.vx + 2 * k2.vx + 2 * k3.vx + k4.vx),
           q.vy + h / 6 * (k1.vy + 2 * k2.vy + 2 * k3.vy + k4.vy)};
    }
    out.push_back({q.px, q.py});
  }
  return out;
}

// Post-impact velocities with sliding friction, in closed form. Body a starts
// at 0 moving right, b at `gap` moving left; each decelerates at mu*g until
// it stops. Returns false when they never meet.
inline bool closed_form_collision(const CollisionScenario& s, VelocityPair& out) {
  const double d = s.mu * kGravity;
  const double va = s.v_a1, vb = -s.v_b1;  // speeds
  if (d == 0.0) {
    out = elastic_collision(s.m_a, s.m_b, s.v_a1, s.v_b1);
    return va + vb > 0.0;
  }
  const double ta = va / d, tb = vb / d;  // stopping times
  const double reach = va * va / (2 * d) + vb * vb / (2 * d);
  if (reach <= s.gap) return false;
  // Both still moving: gap - (va + vb) t + d t^2 = 0.
  const double disc = (va + vb) * (va + vb) - 4.0 * d * s.gap;
  double t = disc >= 0.0 ? ((va + vb) - std::sqrt(disc)) / (2.0 * d)
                         : std::numeric_limits<double>::infinity();
  if (t > std::min(ta, tb)) {
    // One body has stopped; the other closes the remaining distance alone.
    const bool a_stops = ta < tb;
    const double v = a_stops ? vb : va;
    const double rest = s.gap - (a_stops ? va * va / (2 * d) : vb * vb / (2 * d));
    t = (v - std::sqrt(v * v - 2.0 * d * rest)) / d;
  }
  const double ua = std::max(0.0, va - d * t), ub = std::max(0.0, vb - d * t);
  out = elastic_collision(s.m_a, s.m_b, ua, -ub);
  return true;
}

}  // namespace physicsnas::testing
