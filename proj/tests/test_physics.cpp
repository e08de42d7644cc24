#include "physicsnas/dataset.hpp"
#include "physicsnas/physics.hpp"
#include "physicsnas/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace physicsnas;

TEST_CASE("toss simulator converges to an RK4 integration") {
  // Semi-implicit Euler is first order: a tenth of the step should cut the
  // error roughly tenfold.
  Rng rng(21);
  for (int i = 0; i < 20; ++i) {
    TossScenario s;
    s.vx = uniform(rng, 2.0, 8.0);
    s.vy = uniform(rng, 3.0, 10.0);
    s.wind_x = uniform(rng, -3.0, 3.0);
    s.wind_y = uniform(rng, -3.0, 3.0);
    s.drag_k = uniform(rng, 0.0, 0.5);
    const auto ref = testing::rk4_toss(s, kTossStamps);
    auto worst = [&](double dt_sim) {
      const auto sim = simulate_toss(s, kTossStamps, dt_sim);
      double w = 0.0;
      for (std::size_t t = 0; t < kTossStamps; ++t)
        w = std::max({w, std::abs(sim[t].x - ref[t].x), std::abs(sim[t].y - ref[t].y)});
      return w;
    };
    const double coarse = worst(1e-4), fine = worst(1e-5);
    CHECK(coarse < 5e-3);
    CHECK(fine < 5e-4);
    CHECK(fine < 0.2 * coarse);
  }
}

TEST_CASE("toss prior recovers an exact parabola") {
  const TossParams p{0.3, -0.2, 4.0, 7.5};
  std::vector<double> obs;
  for (std::size_t i = 0; i < kTossObserved; ++i) {
    const auto l = toss_equation(p, static_cast<double>(i) * kTossDt);
    obs.push_back(l.x);
    obs.push_back(l.y);
  }
  const auto est = estimate_toss_params(obs, kTossDt);
  for (std::size_t i = 0; i < 4; ++i) CHECK(est[i] == doctest::Approx(p[i]).epsilon(1e-12));
  const auto pred = toss_prior(obs, kTossDt);
  REQUIRE(pred.size() == 2 * kTossPredicted);
  const auto last = toss_equation(p, 17 * kTossDt);
  CHECK(pred[28] == doctest::Approx(last.x));
  CHECK(pred[29] == doctest::Approx(last.y));
}

TEST_CASE("priors are exact without mismatch") {
  const auto toss = generate_dataset(Task::Toss, mismatch_preset("toss-zero"), 200, 4);
  for (const auto& s : toss.samples)
    for (std::size_t j = 0; j < s.y.size(); ++j) CHECK(std::abs(s.y[j] - s.y_phy[j]) < 1e-3);
  const auto col = generate_dataset(Task::Collision, mismatch_preset("collision-zero"), 200, 4);
  for (const auto& s : col.samples)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(s.y[j] - s.y_phy[j]) < 1e-9);
}

TEST_CASE("elastic collision conserves momentum and kinetic energy") {
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double ma = uniform(rng, 0.1, 10.0), mb = uniform(rng, 0.1, 10.0);
    const double va = uniform(rng, -10.0, 10.0), vb = uniform(rng, -10.0, 10.0);
    const auto out = elastic_collision(ma, mb, va, vb);
    const double p0 = ma * va + mb * vb, p1 = ma * out.a + mb * out.b;
    const double e0 = ma * va * va + mb * vb * vb, e1 = ma * out.a * out.a + mb * out.b * out.b;
    const double pscale = std::abs(ma * va) + std::abs(mb * vb);
    REQUIRE(std::abs(p1 - p0) <= 1e-9 * pscale);
    REQUIRE(std::abs(e1 - e0) <= 1e-9 * e0);
  }
}

TEST_CASE("equal masses swap velocities") {
  const auto out = elastic_collision(2.0, 2.0, 3.0, -1.0);
  CHECK(out.a == doctest::Approx(-1.0));
  CHECK(out.b == doctest::Approx(3.0));
}

TEST_CASE("friction simulator matches the closed-form impact") {
  Rng rng(5);
  int met = 0;
  for (int i = 0; i < 2000; ++i) {
    CollisionScenario s;
    s.m_a = uniform(rng, 1.0, 5.0);
    s.m_b = uniform(rng, 1.0, 5.0);
    s.v_a1 = uniform(rng, 0.5, 6.0);
    s.v_b1 = uniform(rng, -6.0, -0.5);
    s.gap = uniform(rng, 0.5, 4.0);
    s.mu = uniform(rng, 0.0, 0.6);
    VelocityPair want;
    if (!testing::closed_form_collision(s, want)) {
      CHECK_THROWS_AS(simulate_collision(s), ScenarioRejected);
      continue;
    }
    ++met;
    const auto got = simulate_collision(s);
    CHECK(got.a == doctest::Approx(want.a).epsilon(1e-9).scale(1.0));
    CHECK(got.b == doctest::Approx(want.b).epsilon(1e-9).scale(1.0));
  }
  CHECK(met > 500);
}

TEST_CASE("friction velocities stop and stay stopped") {
  CollisionScenario s;
  s.v_a1 = 1.0;
  s.v_b1 = -2.0;
  s.mu = 0.5;
  const auto v = friction_velocities(s, 0.1);
  CHECK(v.a == doctest::Approx(1.0 - 0.49));
  CHECK(v.b == doctest::Approx(-2.0 + 0.49));
  const auto late = friction_velocities(s, 10.0);
  CHECK(late.a == 0.0);
  CHECK(late.b == 0.0);
}

TEST_CASE("collision prior ignores the second observation and the gap") {
  const std::array<double, 7> x{3.0, 123.0, -2.0, 456.0, 1.0, 4.0, 99.0};
  const auto y = collision_prior(x);
  const auto e = elastic_collision(1.0, 4.0, 3.0, -2.0);
  CHECK(y[0] == e.a);
  CHECK(y[1] == e.b);
  CHECK_THROWS_AS(collision_prior(std::span<const double>(x.data(), 6)), std::invalid_argument);
}

TEST_CASE("average Euclidean metric") {
  const std::vector<double> pred{0, 0, 1, 1}, truth{3, 4, 1, 1};
  CHECK(metric_avg_euclidean(pred, truth, 2) == doctest::Approx(2.5));
  CHECK(metric_avg_euclidean(pred, pred, 2) == 0.0);
  CHECK_THROWS_AS(metric_avg_euclidean(pred, std::vector<double>{1, 2}, 2), std::invalid_argument);
  CHECK_THROWS_AS(metric_avg_euclidean(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}, 2),
                  std::invalid_argument);
}

TEST_CASE("invalid scenarios are rejected") {
  TossScenario t;
  t.drag_k = -1.0;
  CHECK_THROWS_AS(simulate_toss(t, 3), std::invalid_argument);
  CollisionScenario c;
  c.gap = 0.0;
  CHECK_THROWS_AS(simulate_collision(c), std::invalid_argument);
  CHECK_THROWS_AS(task_from_string("pendulum"), std::invalid_argument);
}
