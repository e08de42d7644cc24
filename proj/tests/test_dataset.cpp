#include "physicsnas/dataset.hpp"

#include <doctest.h>

#include <sstream>

using namespace physicsnas;

TEST_CASE("presets resolve to the published mismatch ranges") {
  CHECK(mismatch_preset("toss-low") == [] { auto m = toss_level(1.0, 0.2); m.name = "toss-low"; return m; }());
  const auto high = mismatch_preset("toss-high");
  CHECK(high.wind_range == 3.0);
  CHECK(high.drag_k == 0.5);
  const auto cl = mismatch_preset("collision-low");
  CHECK(cl.mu_lo == 0.28);
  CHECK(cl.mu_hi == 0.32);
  const auto ch = mismatch_preset("collision-high");
  CHECK(ch.mu_lo == 0.45);
  CHECK(ch.mu_hi == 0.55);
  const auto probe = mismatch_preset("collision-probe");
  CHECK(probe.mu_lo == 0.15);
  CHECK(probe.mu_hi == 0.25);
  CHECK(mismatch_preset("toss:r=2,k=0.35").drag_k == 0.35);
  CHECK(mismatch_preset("collision:mu=0.1-0.2").mu_hi == 0.2);
  CHECK_THROWS_AS(mismatch_preset("toss-medium"), std::invalid_argument);
  CHECK_THROWS_AS(mismatch_preset("collision:mu=0.3-0.1"), std::invalid_argument);
}

TEST_CASE("mismatch axis runs from extreme to low") {
  const auto axis = mismatch_axis(Task::Toss);
  REQUIRE(axis.size() == 5);
  CHECK(axis.front().wind_range == 3.0);
  CHECK(axis.front().drag_k == 0.5);
  CHECK(axis.back().wind_range == 1.0);
  CHECK(axis.back().drag_k == 0.2);
  for (std::size_t i = 1; i < axis.size(); ++i) CHECK(axis[i].drag_k < axis[i - 1].drag_k);
}

TEST_CASE("generation is deterministic and prefix-stable in n") {
  const auto level = mismatch_preset("toss-high");
  const auto a = generate_dataset(Task::Toss, level, 40, 8);
  const auto b = generate_dataset(Task::Toss, level, 40, 8);
  const auto c = generate_dataset(Task::Toss, level, 10, 8);
  const auto other = generate_dataset(Task::Toss, level, 10, 9);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a.samples[i].x == b.samples[i].x);
    CHECK(a.samples[i].y == c.samples[i].y);
  }
  CHECK(a.samples[0].x != other.samples[0].x);
}

TEST_CASE("sample widths follow the task") {
  for (Task t : {Task::Toss, Task::Collision}) {
    const auto d = generate_dataset(t, mismatch_preset(t == Task::Toss ? "toss-low" : "collision-low"), 5, 1);
    for (const auto& s : d.samples) {
      CHECK(s.x.size() == input_width(t));
      CHECK(s.y.size() == label_width(t));
      CHECK(s.y_phy.size() == label_width(t));
    }
  }
  CHECK_THROWS_AS(generate_dataset(Task::Toss, mismatch_preset("collision-low"), 5, 1),
                  std::invalid_argument);
}

TEST_CASE("friction scenarios always collide and observe before impact") {
  const auto d = generate_dataset(Task::Collision, mismatch_preset("collision-high"), 100, 2);
  for (const auto& s : d.samples) {
    const auto& c = std::get<CollisionScenario>(s.scenario);
    CHECK((c.v_a1 - c.v_b1) * c.dt_obs < c.gap);
    CHECK(c.mu >= 0.45);
    CHECK(c.mu <= 0.55);
    CHECK(std::abs(c.m_a - c.m_b) > 0.2);
  }
}

TEST_CASE("jsonl round trip") {
  const auto d = generate_dataset(Task::Collision, mismatch_preset("collision-low"), 6, 3);
  std::stringstream ss;
  write_jsonl(d, ss);
  const auto r = read_jsonl(ss);
  REQUIRE(r.size() == d.size());
  CHECK(r.task == d.task);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(r.samples[i].x == d.samples[i].x);
    CHECK(r.samples[i].y == d.samples[i].y);
    CHECK(r.samples[i].y_phy == d.samples[i].y_phy);
  }
}

TEST_CASE("standardizer inverts its own transform") {
  const std::vector<double> rows{1, 10, 2, 10, 3, 10, 4, 10};
  const auto s = Standardizer::fit(rows, 2);
  CHECK(s.mean[0] == doctest::Approx(2.5));
  CHECK(s.stddev[1] == 1.0);  // constant column keeps unit scale
  const auto z = s.apply(rows);
  const auto back = s.invert(z);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(back[i] == doctest::Approx(rows[i]));
}

TEST_CASE("batches share the label transform with the prior") {
  const auto d = generate_dataset(Task::Toss, mismatch_preset("toss-zero"), 8, 1);
  const auto scaling = fit_scaling(d);
  const auto b = make_batch(d, scaling);
  CHECK(b.rows == 8);
  CHECK(b.x.cols() == 6);
  for (std::size_t i = 0; i < b.y.size(); ++i) CHECK(std::abs(b.y[i] - b.y_phy[i]) < 1e-2);
}
