#include "physicsnas/search.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace physicsnas;

namespace {

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& ts) {
  std::vector<std::vector<double>> out;
  for (const auto& t : ts) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

struct Fixture {
  Dataset train, test;
  TaskScaling scaling;
  SearchSplit split;
  Batch omega, alpha;
  explicit Fixture(const std::string& level, std::size_t n = 24) {
    const auto lv = mismatch_preset(level);
    train = generate_dataset(lv.task, lv, n, 3);
    test = generate_dataset(lv.task, lv, 64, 500);
    scaling = fit_scaling(train);
    split = split_for_search(train, 1);
    omega = make_batch(split.omega, scaling);
    alpha = make_batch(split.alpha, scaling);
  }
};

}  // namespace

TEST_CASE("search split halves are disjoint and cover the set") {
  const auto lv = mismatch_preset("collision-low");
  const auto d = generate_dataset(lv.task, lv, 33, 1);
  const auto s = split_for_search(d, 7);
  CHECK(s.omega.size() == 17);
  CHECK(s.alpha.size() == 16);
  std::set<std::uint64_t> seen;
  for (const auto* part : {&s.omega, &s.alpha})
    for (const auto& smp : part->samples) CHECK(seen.insert(smp.seed).second);
  CHECK(seen.size() == 33);
  const auto again = split_for_search(d, 7);
  CHECK(again.alpha.samples[0].seed == s.alpha.samples[0].seed);
  CHECK_THROWS_AS(split_for_search(d.subset(std::vector<std::size_t>{0}), 1), std::invalid_argument);
}

TEST_CASE("weight steps never touch the logits, arch steps never touch the weights") {
  for (const char* level : {"toss-low", "collision-high"}) {
    Fixture f(level);
    Supernet net(f.scaling, 2);
    AdamState w_adam({1e-2}), a_adam({1e-1});
    Rng rng(4);
    // A sample may route only through parameter-free operations, so progress
    // is required on most steps rather than on every one.
    int weights_moved = 0, alphas_moved = 0;
    for (int i = 0; i < 20; ++i) {
      const auto alphas = snapshot(net.alphas());
      const auto weights = snapshot(net.weights());
      weight_step(net, f.omega, rng, w_adam);
      CHECK(snapshot(net.alphas()) == alphas);
      weights_moved += snapshot(net.weights()) != weights;

      const auto w2 = snapshot(net.weights());
      const auto a2 = snapshot(net.alphas());
      arch_step(net, f.alpha, rng, a_adam);
      CHECK(snapshot(net.weights()) == w2);
      alphas_moved += snapshot(net.alphas()) != a2;
      for (const auto& w : net.weights()) {
        CHECK(w.requires_grad());
        CHECK_FALSE(w.has_grad());
      }
    }
    CHECK(weights_moved >= 15);
    CHECK(alphas_moved >= 15);
  }
}

TEST_CASE("search is deterministic and its result satisfies the invariants") {
  Fixture f("toss-high");
  SearchConfig cfg;
  cfg.epochs = 25;
  cfg.snapshot_interval = 10;
  cfg.seed = 9;
  Supernet a(f.scaling, 1), b(f.scaling, 1);
  const auto ra = search(a, f.omega, f.alpha, cfg);
  const auto rb = search(b, f.omega, f.alpha, cfg);
  CHECK(ra.arch == rb.arch);
  CHECK(ra.trace.train_loss == rb.trace.train_loss);
  CHECK(ra.trace.val_loss == rb.trace.val_loss);
  CHECK(ra.trace.train_loss.size() == 25);
  REQUIRE(ra.trace.snapshots.size() == 4);  // 0, 10, 20 and the last epoch
  CHECK(ra.trace.snapshots.back().epoch == 24);
  REQUIRE_NOTHROW(ra.arch.validate());
  CHECK(ra.arch.provenance.source == "search");
  for (const auto& n : ra.arch.nodes)
    if (!is_input(n.kind)) CHECK(ra.arch.incoming(n.id).size() == 2);
}

TEST_CASE("warmup epochs skip architecture steps") {
  Fixture f("toss-low");
  SearchConfig cfg;
  cfg.epochs = 6;
  cfg.warmup_epochs = 4;
  Supernet net(f.scaling, 1);
  const auto before = snapshot(net.alphas());
  const auto r = search(net, f.omega, f.alpha, cfg);
  CHECK(std::isnan(r.trace.val_loss[3]));
  CHECK(std::isfinite(r.trace.val_loss[4]));
  CHECK(snapshot(net.alphas()) != before);
}

TEST_CASE("non-finite search raises CollapseError") {
  Fixture f("toss-low");
  SearchConfig cfg;
  cfg.epochs = 50;
  cfg.weight_lr = 1e300;
  Supernet net(f.scaling, 1);
  try {
    search(net, f.omega, f.alpha, cfg);
    FAIL("expected CollapseError");
  } catch (const CollapseError& e) {
    CHECK(e.weight_lr() == 1e300);
    CHECK(std::string(e.what()).find("arch lr") != std::string::npos);
  }
}

TEST_CASE("pipeline retrains a fresh network and evaluates it") {
  Fixture f("collision-low");
  SearchConfig scfg;
  scfg.epochs = 20;
  TrainConfig tcfg;
  tcfg.epochs = 30;
  const auto r1 = search_and_retrain(f.train, f.test, scfg, tcfg);
  const auto r2 = search_and_retrain(f.train, f.test, scfg, tcfg);
  CHECK(std::isfinite(r1.test_error));
  CHECK(r1.test_error == r2.test_error);
  CHECK(r1.arch == r2.arch);
  CHECK(r1.parameters == ArchModel(r1.arch, f.scaling, 0).parameter_count());
}

TEST_CASE("edge-weight ablation toggles the selection rule") {
  Fixture f("toss-low");
  SearchConfig scfg;
  scfg.epochs = 10;
  TrainConfig tcfg;
  tcfg.epochs = 5;
  const auto r = ablate_edge_weights(f.train, f.test, scfg, tcfg);
  CHECK(r.with_weights.arch.provenance.config.find("\"edge_weights\":true") != std::string::npos);
  CHECK(r.without_weights.arch.provenance.config.find("\"edge_weights\":false") != std::string::npos);
}

TEST_CASE("trace CSV lists snapshot paths on snapshot epochs") {
  SearchTrace t;
  t.train_loss = {1.0, 0.5, 0.25};
  t.val_loss = {2.0, 1.0, 0.5};
  t.snapshots.push_back({0, 2.0, {}});
  t.snapshots.push_back({2, 0.5, {}});
  std::ostringstream os;
  write_trace_csv(t, "snap/epoch", os);
  CHECK(os.str() ==
        "epoch,train_loss,val_loss,snapshot_path\n"
        "0,1,2,snap/epoch0.json\n"
        "1,0.5,1,\n"
        "2,0.25,0.5,snap/epoch2.json\n");
}

TEST_CASE("relaxed validation monitor") {
  SearchTrace t;
  for (double v : {5.0, 4.0, 3.0, 2.0, 1.5, 1.4, 1.3, 1.2}) t.snapshots.push_back({0, v, {}});
  CHECK(t.relaxed_val_settled());
  t.snapshots.push_back({0, 9.0, {}});
  CHECK_FALSE(t.relaxed_val_settled());
}
