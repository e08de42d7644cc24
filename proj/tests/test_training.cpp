#include "physicsnas/adam.hpp"
#include "physicsnas/baselines.hpp"
#include "physicsnas/training.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace physicsnas;

namespace {

struct Fixture {
  Dataset train, test;
  TaskScaling scaling;
  Batch tr, te;
  explicit Fixture(const std::string& level, std::size_t n = 32) {
    const auto lv = mismatch_preset(level);
    train = generate_dataset(lv.task, lv, n, 1);
    test = generate_dataset(lv.task, lv, 64, 1000);
    scaling = fit_scaling(train);
    tr = make_batch(train, scaling);
    te = make_batch(test, scaling);
  }
};

}  // namespace

TEST_CASE("one Adam step matches the closed form") {
  auto p = Tensor::vector({1.0, -2.0}, true);
  p.mutable_grad()[0] = 0.5;
  p.mutable_grad()[1] = -4.0;
  AdamState st({0.1, 0.9, 0.999, 1e-8});
  std::vector<Tensor> ps{p};
  adam_step(ps, st);
  // After one bias-corrected step the update is lr * g / (|g| + eps').
  CHECK(p[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
  CHECK(st.steps(p) == 1);
}

TEST_CASE("Adam keeps a clock per parameter") {
  auto a = Tensor::vector({0.0}, true), b = Tensor::vector({0.0}, true);
  AdamState st;
  for (int i = 0; i < 3; ++i) {
    a.mutable_grad()[0] = 1.0;
    std::vector<Tensor> ps{a};
    adam_step(ps, st);
  }
  b.mutable_grad()[0] = 1.0;
  std::vector<Tensor> both{a, b};
  adam_step(both, st);
  CHECK(st.steps(a) == 4);
  CHECK(st.steps(b) == 1);
  auto c = Tensor::vector({0.0}, true);
  std::vector<Tensor> none{c};
  CHECK_THROWS_AS(adam_step(none, st), std::logic_error);
}

TEST_CASE("every baseline trains and lowers its training loss") {
  Fixture f("toss-low");
  TrainConfig cfg;
  cfg.epochs = 60;
  for (auto kind : all_baselines()) {
    CAPTURE(to_string(kind));
    auto m = build_model({kind, Task::Toss}, f.scaling, 3);
    const auto r = train(*m, f.tr, cfg);
    REQUIRE(r.loss_curve.size() == 60);
    CHECK(r.loss_curve.back() < r.loss_curve.front());
    CHECK(std::isfinite(evaluate(*m, f.te, f.scaling)));
  }
}

TEST_CASE("baseline sizes follow their layouts") {
  Fixture f("collision-low");
  auto naive = build_model({BaselineKind::Naive, Task::Collision}, f.scaling, 1);
  CHECK(naive->parameter_count() == (7 * 128 + 128) + (128 * 128 + 128) + (128 * 2 + 2));
  auto residual = build_model({BaselineKind::Residual, Task::Collision}, f.scaling, 1);
  CHECK(residual->parameter_count() == (9 * 128 + 128) + (128 * 128 + 128) + (128 * 2 + 2));
  auto embedded = build_model({BaselineKind::Embedded, Task::Collision}, f.scaling, 1);
  CHECK(embedded->parameter_count() == (7 * 128 + 128) + (128 * 128 + 128) + (128 * 4 + 4));
  CHECK_THROWS_AS(build_model({BaselineKind::Naive, Task::Toss}, f.scaling, 1), std::invalid_argument);
}

TEST_CASE("residual with a silenced MLP is the prior") {
  Fixture f("collision-low");
  auto m = build_model({BaselineKind::Residual, Task::Collision}, f.scaling, 1);
  for (auto& p : m->parameters())
    for (auto& v : p.mutable_values()) v = 0.0;
  PriorModel prior;
  CHECK(evaluate(*m, f.te, f.scaling) == doctest::Approx(evaluate(prior, f.te, f.scaling)).epsilon(1e-12));
}

TEST_CASE("regularization penalty vanishes on physical predictions") {
  for (const char* level : {"toss-zero", "collision-zero"}) {
    Fixture f(level, 16);
    const auto y = Tensor::from(f.tr.y.shape(), f.tr.y_raw);
    CHECK(reg_penalty(f.train.task, y, f.tr.x_raw).item() < 1e-9);
  }
  // Doubling the collision outputs adds kinetic energy.
  Fixture f("collision-zero", 16);
  std::vector<double> doubled(f.tr.y_raw);
  for (auto& v : doubled) v *= 2.0;
  CHECK(reg_penalty(Task::Collision, Tensor::from(f.tr.y.shape(), doubled), f.tr.x_raw).item() > 0.0);
}

TEST_CASE("training is deterministic given the seed") {
  Fixture f("collision-high");
  TrainConfig cfg;
  cfg.epochs = 30;
  auto a = build_model({BaselineKind::Fusion, Task::Collision}, f.scaling, 5);
  auto b = build_model({BaselineKind::Fusion, Task::Collision}, f.scaling, 5);
  const auto ra = train(*a, f.tr, cfg), rb = train(*b, f.tr, cfg);
  CHECK(ra.loss_curve == rb.loss_curve);
  CHECK(evaluate(*a, f.te, f.scaling) == evaluate(*b, f.te, f.scaling));
}

TEST_CASE("validation restores the best epoch") {
  Fixture f("toss-low");
  TrainConfig cfg;
  cfg.epochs = 40;
  auto m = build_model({BaselineKind::Naive, Task::Toss}, f.scaling, 2);
  const auto r = train(*m, f.tr, cfg, &f.te);
  CHECK(r.best_epoch < 40);
  const auto pred = m->forward(f.te);
  CHECK(mse_loss(pred, f.te.y).item() == doctest::Approx(r.best_val));
}

TEST_CASE("weights round-trip through the binary blob") {
  Fixture f("toss-low", 8);
  auto a = build_model({BaselineKind::Embedded, Task::Toss}, f.scaling, 1);
  auto b = build_model({BaselineKind::Embedded, Task::Toss}, f.scaling, 2);
  std::stringstream ss;
  write_weights(*a, ss);
  read_weights(*b, ss);
  CHECK(evaluate(*a, f.te, f.scaling) == evaluate(*b, f.te, f.scaling));
}

TEST_CASE("divergent training raises TrainingDiverged") {
  Fixture f("toss-low", 8);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 1e300;
  auto m = build_model({BaselineKind::Naive, Task::Toss}, f.scaling, 1);
  CHECK_THROWS_AS(train(*m, f.tr, cfg), TrainingDiverged);
}
