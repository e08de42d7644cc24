#pragma once

// Ground-truth simulators, the analytic priors they are compared against,
// and the evaluation metric. Everything here is a pure function.

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace physicsnas {

inline constexpr double kGravity = 9.8;

enum class Task { Toss, Collision };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

// Stamps: 3 observed + 15 predicted.
inline constexpr std::size_t kTossObserved = 3;
inline constexpr std::size_t kTossPredicted = 15;
inline constexpr std::size_t kTossStamps = kTossObserved + kTossPredicted;
inline constexpr std::size_t kPhysicalParams = 4;

std::size_t input_width(Task t);   // 6 or 7
std::size_t label_width(Task t);   // 30 or 2

class ScenarioRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct TossScenario {
  double x0 = 0.0, y0 = 0.0;       // m
  double vx = 0.0, vy = 0.0;       // m/s
  double wind_x = 0.0, wind_y = 0.0;  // m/s^2
  double drag_k = 0.0;             // F_air = k |v|^2
  double dt = 0.1;                 // s between stamps
  double mass = 1.0;               // kg
};

// Locations at t_i = i * dt for i in [0, n_stamps). Semi-implicit Euler at
// dt_sim under gravity, constant wind and quadratic drag opposing velocity.
std::vector<Point2> simulate_toss(const TossScenario& scn, std::size_t n_stamps,
                                  double dt_sim = 1e-4);

// Parabola parameters (x1, y1, vx, vy).
using TossParams = std::array<double, kPhysicalParams>;

Point2 toss_equation(const TossParams& p, double t);

// Initial location fixed to the first observation, velocities by least
// squares over the remaining observations with g held at 9.8.
TossParams estimate_toss_params(std::span<const double> observed, double dt);

// Flattened (x, y) of stamps 4..18 given the three observed locations.
std::vector<double> toss_prior(std::span<const double> observed, double dt);

// Stamp times t_4..t_18 measured from the first observation.
std::vector<double> toss_prediction_times(double dt);

struct CollisionScenario {
  double m_a = 1.0, m_b = 2.0;     // kg
  double v_a1 = 0.0, v_b1 = 0.0;   // m/s, signed; a moves towards +x, b towards -x
  double gap = 1.0;                // m
  double mu = 0.0;                 // sliding friction coefficient
  double dt_obs = 0.05;            // s, second velocity observation
};

struct VelocityPair {
  double a = 0.0;
  double b = 0.0;
};

// Post-impact velocities of a perfectly elastic 1-D collision.
VelocityPair elastic_collision(double m_a, double m_b, double v_a, double v_b);

// Velocities at time t under friction only (no contact), each object stopping
// for good once its speed reaches zero.
VelocityPair friction_velocities(const CollisionScenario& scn, double t);

// Objects decelerate under friction until the gap closes; the impact instant
// is refined by bisection inside the closing sub-step and the elastic rule is
// applied to the impact velocities. Throws ScenarioRejected if they never meet.
VelocityPair simulate_collision(const CollisionScenario& scn, double dt_sim = 1e-4);

// Input layout: {v_a1, v_a2, v_b1, v_b2, m_a, m_b, D}.
std::array<double, 7> collision_inputs(const CollisionScenario& scn);
// Frictionless prediction; ignores v_a2, v_b2 and D.
std::array<double, 2> collision_prior(std::span<const double> x);

// Mean over points of the per-point Euclidean distance.
double metric_avg_euclidean(std::span<const double> pred, std::span<const double> truth,
                            std::size_t point_dim);

}  // namespace physicsnas
