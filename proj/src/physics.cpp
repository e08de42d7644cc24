#include "physicsnas/physics.hpp"

#include <cmath>
#include <limits>

namespace physicsnas {

std::string to_string(Task t) { return t == Task::Toss ? "toss" : "collision"; }

Task task_from_string(const std::string& s) {
  if (s == "toss") return Task::Toss;
  if (s == "collision") return Task::Collision;
  throw std::invalid_argument("unknown task '" + s + "' (expected toss or collision)");
}

std::size_t input_width(Task t) { return t == Task::Toss ? 2 * kTossObserved : 7; }
std::size_t label_width(Task t) { return t == Task::Toss ? 2 * kTossPredicted : 2; }

std::vector<Point2> simulate_toss(const TossScenario& scn, std::size_t n_stamps, double dt_sim) {
  if (scn.dt <= 0.0 || dt_sim <= 0.0 || scn.drag_k < 0.0 || scn.mass <= 0.0)
    throw std::invalid_argument("simulate_toss: dt, dt_sim and mass must be positive, k >= 0");
  const auto sub = static_cast<std::size_t>(std::llround(scn.dt / dt_sim));
  const double h = scn.dt / static_cast<double>(sub);
  double px = scn.x0, py = scn.y0, vx = scn.vx, vy = scn.vy;
  std::vector<Point2> out;
  out.reserve(n_stamps);
  out.push_back({px, py});
  for (std::size_t i = 1; i < n_stamps; ++i) {
    for (std::size_t s = 0; s < sub; ++s) {
      const double speed = std::hypot(vx, vy);
      const double ax = scn.wind_x - scn.drag_k * speed * vx / scn.mass;
      const double ay = -kGravity + scn.wind_y - scn.drag_k * speed * vy / scn.mass;
      vx += ax * h;
      vy += ay * h;
      px += vx * h;
      py += vy * h;
    }
    if (!std::isfinite(px) || !std::isfinite(py))
      throw ScenarioRejected("simulate_toss: non-finite state");
    out.push_back({px, py});
  }
  return out;
}

Point2 toss_equation(const TossParams& p, double t) {
  return {p[0] + p[2] * t, p[1] + p[3] * t - 0.5 * kGravity * t * t};
}

TossParams estimate_toss_params(std::span<const double> observed, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("toss prior: dt must be positive");
  if (observed.size() != 2 * kTossObserved)
    throw std::invalid_argument("toss prior: expects three observed 2-D locations");
  const double x1 = observed[0], y1 = observed[1];
  double stt = 0.0, stx = 0.0, sty = 0.0;
  for (std::size_t i = 1; i < kTossObserved; ++i) {
    const double t = static_cast<double>(i) * dt;
    stt += t * t;
    stx += t * (observed[2 * i] - x1);
    sty += t * (observed[2 * i + 1] - y1 + 0.5 * kGravity * t * t);
  }
  return {x1, y1, stx / stt, sty / stt};
}

std::vector<double> toss_prediction_times(double dt) {
  std::vector<double> t(kTossPredicted);
  for (std::size_t i = 0; i < kTossPredicted; ++i)
    t[i] = static_cast<double>(kTossObserved + i) * dt;
  return t;
}

std::vector<double> toss_prior(std::span<const double> observed, double dt) {
  const auto p = estimate_toss_params(observed, dt);
  std::vector<double> out;
  out.reserve(2 * kTossPredicted);
  for (double t : toss_prediction_times(dt)) {
    const auto l = toss_equation(p, t);
    out.push_back(l.x);
    out.push_back(l.y);
  }
  return out;
}

VelocityPair elastic_collision(double m_a, double m_b, double v_a, double v_b) {
  const double s = m_a + m_b;
  return {(v_a * (m_a - m_b) + 2.0 * m_b * v_b) / s, (v_b * (m_b - m_a) + 2.0 * m_a * v_a) / s};
}

namespace {

struct Body {
  double pos;
  double vel;
};

// Exact constant-deceleration update over h; a body that stops stays put.
Body advance(Body b, double decel, double h) {
  if (b.vel == 0.0) return b;
  const double sgn = b.vel > 0.0 ? 1.0 : -1.0;
  const double speed = std::abs(b.vel);
  if (decel > 0.0 && speed <= decel * h) {
    b.pos += sgn * speed * speed / (2.0 * decel);
    b.vel = 0.0;
    return b;
  }
  b.pos += b.vel * h - 0.5 * sgn * decel * h * h;
  b.vel -= sgn * decel * h;
  return b;
}

}  // namespace

VelocityPair friction_velocities(const CollisionScenario& scn, double t) {
  const double decel = scn.mu * kGravity;
  return {advance({0.0, scn.v_a1}, decel, t).vel, advance({0.0, scn.v_b1}, decel, t).vel};
}

VelocityPair simulate_collision(const CollisionScenario& scn, double dt_sim) {
  if (scn.gap <= 0.0 || scn.m_a <= 0.0 || scn.m_b <= 0.0 || scn.mu < 0.0)
    throw std::invalid_argument("simulate_collision: masses and gap must be positive, mu >= 0");
  const double decel = scn.mu * kGravity;
  Body a{0.0, scn.v_a1};
  Body b{scn.gap, scn.v_b1};
  constexpr double kHorizon = 1000.0;
  for (double t = 0.0; t < kHorizon; t += dt_sim) {
    const Body na = advance(a, decel, dt_sim);
    const Body nb = advance(b, decel, dt_sim);
    if (nb.pos - na.pos <= 0.0) {
      double lo = 0.0, hi = dt_sim;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (advance(b, decel, mid).pos - advance(a, decel, mid).pos > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      const double v_a = advance(a, decel, hi).vel;
      const double v_b = advance(b, decel, hi).vel;
      return elastic_collision(scn.m_a, scn.m_b, v_a, v_b);
    }
    a = na;
    b = nb;
    if (a.vel == 0.0 && b.vel == 0.0) break;
  }
  throw ScenarioRejected("simulate_collision: objects stop before closing the gap");
}

std::array<double, 7> collision_inputs(const CollisionScenario& scn) {
  const auto v2 = friction_velocities(scn, scn.dt_obs);
  return {scn.v_a1, v2.a, scn.v_b1, v2.b, scn.m_a, scn.m_b, scn.gap};
}

std::array<double, 2> collision_prior(std::span<const double> x) {
  if (x.size() != 7) throw std::invalid_argument("collision prior: expects 7 inputs");
  const auto v = elastic_collision(x[4], x[5], x[0], x[2]);
  return {v.a, v.b};
}

double metric_avg_euclidean(std::span<const double> pred, std::span<const double> truth,
                            std::size_t point_dim) {
  if (point_dim == 0 || pred.size() != truth.size() || pred.size() % point_dim != 0 ||
      pred.empty())
    throw std::invalid_argument("metric: lengths " + std::to_string(pred.size()) + " and " +
                                std::to_string(truth.size()) + " incompatible with point size " +
                                std::to_string(point_dim));
  const std::size_t points = pred.size() / point_dim;
  double total = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    double s = 0.0;
    for (std::size_t d = 0; d < point_dim; ++d) {
      const double e = pred[p * point_dim + d] - truth[p * point_dim + d];
      s += e * e;
    }
    total += std::sqrt(s);
  }
  return total / static_cast<double>(points);
}

}  // namespace physicsnas
