#include "physicsnas/dataset.hpp"

#include "physicsnas/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace physicsnas {

using nlohmann::json;

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

MismatchLevel toss_level(double wind_range, double drag_k) {
  MismatchLevel m;
  m.name = "toss:r=" + fmt_num(wind_range) + ",k=" + fmt_num(drag_k);
  m.task = Task::Toss;
  m.wind_range = wind_range;
  m.drag_k = drag_k;
  return m;
}

MismatchLevel collision_level(double mu_lo, double mu_hi) {
  MismatchLevel m;
  m.name = "collision:mu=" + fmt_num(mu_lo) + "-" + fmt_num(mu_hi);
  m.task = Task::Collision;
  m.mu_lo = mu_lo;
  m.mu_hi = mu_hi;
  return m;
}

MismatchLevel mismatch_preset(const std::string& name) {
  MismatchLevel m;
  if (name == "toss-zero") m = toss_level(0.0, 0.0);
  else if (name == "toss-low") m = toss_level(1.0, 0.2);
  else if (name == "toss-high") m = toss_level(3.0, 0.5);
  else if (name == "collision-zero") m = collision_level(0.0, 0.0);
  else if (name == "collision-low") m = collision_level(0.28, 0.32);
  else if (name == "collision-high") m = collision_level(0.45, 0.55);
  else if (name == "collision-probe") m = collision_level(0.15, 0.25);
  else if (name.rfind("toss:", 0) == 0) {
    double r = 0.0, k = 0.0;
    if (std::sscanf(name.c_str(), "toss:r=%lf,k=%lf", &r, &k) != 2 || r < 0.0 || k < 0.0)
      throw std::invalid_argument("bad toss mismatch '" + name + "' (toss:r=<r>,k=<k>)");
    return toss_level(r, k);
  } else if (name.rfind("collision:", 0) == 0) {
    double lo = 0.0, hi = 0.0;
    if (std::sscanf(name.c_str(), "collision:mu=%lf-%lf", &lo, &hi) != 2 || lo < 0.0 || hi < lo)
      throw std::invalid_argument("bad collision mismatch '" + name +
                                  "' (collision:mu=<lo>-<hi>)");
    return collision_level(lo, hi);
  } else {
    throw std::invalid_argument("unknown mismatch level '" + name + "'");
  }
  m.name = name;
  return m;
}

std::vector<std::string> preset_names() {
  return {"toss-zero",      "toss-low",      "toss-high",      "collision-zero",
          "collision-low",  "collision-high", "collision-probe"};
}

std::vector<MismatchLevel> mismatch_axis(Task task) {
  if (task == Task::Toss)
    return {toss_level(3.0, 0.5), toss_level(2.5, 0.425), toss_level(2.0, 0.35),
            toss_level(1.5, 0.275), toss_level(1.0, 0.2)};
  return {collision_level(0.45, 0.55), collision_level(0.38, 0.42), collision_level(0.28, 0.32),
          collision_level(0.18, 0.22), collision_level(0.08, 0.12)};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d;
  d.task = task;
  d.level = level;
  d.seed = seed;
  d.samples.reserve(indices.size());
  for (auto i : indices) d.samples.push_back(samples.at(i));
  return d;
}

namespace {

Sample toss_sample(const MismatchLevel& level, Rng& rng) {
  for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
    TossScenario scn;
    const double speed = uniform(rng, 4.0, 12.0);
    const double angle = uniform(rng, 30.0, 75.0) * std::numbers::pi / 180.0;
    scn.vx = speed * std::cos(angle);
    scn.vy = speed * std::sin(angle);
    if (level.wind_range > 0.0) {
      scn.wind_x = uniform(rng, -level.wind_range, level.wind_range);
      scn.wind_y = uniform(rng, -level.wind_range, level.wind_range);
    }
    scn.drag_k = level.drag_k;
    scn.dt = kTossDt;
    std::vector<Point2> traj;
    try {
      traj = simulate_toss(scn, kTossStamps);
    } catch (const ScenarioRejected&) {
      continue;
    }
    Sample s;
    for (std::size_t i = 0; i < kTossStamps; ++i) {
      auto& dst = i < kTossObserved ? s.x : s.y;
      dst.push_back(traj[i].x);
      dst.push_back(traj[i].y);
    }
    s.y_phy = toss_prior(s.x, scn.dt);
    s.scenario = scn;
    return s;
  }
  throw std::runtime_error("toss generation: rejection budget exceeded for " + level.name);
}

Sample collision_sample(const MismatchLevel& level, Rng& rng) {
  for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
    CollisionScenario scn;
    do {
      scn.m_a = uniform(rng, 1.0, 5.0);
      scn.m_b = uniform(rng, 1.0, 5.0);
    } while (std::abs(scn.m_a - scn.m_b) <= 0.2);
    scn.v_a1 = uniform(rng, 2.0, 6.0);
    scn.v_b1 = uniform(rng, -6.0, -2.0);
    scn.gap = uniform(rng, 1.0, 4.0);
    scn.mu = level.mu_hi > level.mu_lo ? uniform(rng, level.mu_lo, level.mu_hi) : level.mu_lo;
    scn.dt_obs = kCollisionObsDt;
    // The second velocity reading must precede any possible contact.
    if ((scn.v_a1 - scn.v_b1) * scn.dt_obs >= scn.gap) continue;
    VelocityPair final_v;
    try {
      final_v = simulate_collision(scn);
    } catch (const ScenarioRejected&) {
      continue;
    }
    Sample s;
    const auto x = collision_inputs(scn);
    s.x.assign(x.begin(), x.end());
    s.y = {final_v.a, final_v.b};
    const auto prior = collision_prior(s.x);
    s.y_phy.assign(prior.begin(), prior.end());
    s.scenario = scn;
    return s;
  }
  throw std::runtime_error("collision generation: rejection budget exceeded for " + level.name);
}

}  // namespace

Dataset generate_dataset(Task task, const MismatchLevel& level, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be at least 1");
  if (level.task != task)
    throw std::invalid_argument("generate_dataset: level " + level.name + " is not a " +
                                to_string(task) + " level");
  Dataset d;
  d.task = task;
  d.level = level;
  d.seed = seed;
  d.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto sample_seed = derive_seed(seed, {i});
    Rng rng(sample_seed);
    Sample s = task == Task::Toss ? toss_sample(level, rng) : collision_sample(level, rng);
    s.seed = sample_seed;
    d.samples.push_back(std::move(s));
  }
  return d;
}

namespace {

json scenario_json(const Sample& s) {
  if (const auto* t = std::get_if<TossScenario>(&s.scenario))
    return {{"x0", t->x0},         {"y0", t->y0},         {"vx", t->vx},
            {"vy", t->vy},         {"wind_x", t->wind_x}, {"wind_y", t->wind_y},
            {"drag_k", t->drag_k}, {"dt", t->dt},         {"mass", t->mass}};
  const auto& c = std::get<CollisionScenario>(s.scenario);
  return {{"m_a", c.m_a},   {"m_b", c.m_b}, {"v_a1", c.v_a1},
          {"v_b1", c.v_b1}, {"gap", c.gap}, {"mu", c.mu},
          {"dt_obs", c.dt_obs}};
}

}  // namespace

void write_jsonl(const Dataset& d, std::ostream& os) {
  for (const auto& s : d.samples) {
    json rec;
    rec["x"] = s.x;
    rec["y"] = s.y;
    rec["y_phy"] = s.y_phy;
    rec["meta"] = {{"task", to_string(d.task)},
                   {"level", d.level.name},
                   {"dataset_seed", d.seed},
                   {"seed", s.seed},
                   {"scenario", scenario_json(s)}};
    os << rec.dump() << '\n';
  }
}

Dataset read_jsonl(std::istream& is) {
  Dataset d;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    const auto& meta = rec.at("meta");
    if (first) {
      d.task = task_from_string(meta.at("task").get<std::string>());
      d.level = mismatch_preset(meta.at("level").get<std::string>());
      d.seed = meta.at("dataset_seed").get<std::uint64_t>();
      first = false;
    }
    Sample s;
    s.x = rec.at("x").get<std::vector<double>>();
    s.y = rec.at("y").get<std::vector<double>>();
    s.y_phy = rec.at("y_phy").get<std::vector<double>>();
    s.seed = meta.at("seed").get<std::uint64_t>();
    const auto& sc = meta.at("scenario");
    if (d.task == Task::Toss) {
      TossScenario t;
      t.x0 = sc.at("x0"); t.y0 = sc.at("y0"); t.vx = sc.at("vx"); t.vy = sc.at("vy");
      t.wind_x = sc.at("wind_x"); t.wind_y = sc.at("wind_y"); t.drag_k = sc.at("drag_k");
      t.dt = sc.at("dt"); t.mass = sc.at("mass");
      s.scenario = t;
    } else {
      CollisionScenario c;
      c.m_a = sc.at("m_a"); c.m_b = sc.at("m_b"); c.v_a1 = sc.at("v_a1"); c.v_b1 = sc.at("v_b1");
      c.gap = sc.at("gap"); c.mu = sc.at("mu"); c.dt_obs = sc.at("dt_obs");
      s.scenario = c;
    }
    if (s.x.size() != input_width(d.task) || s.y.size() != label_width(d.task) ||
        s.y_phy.size() != label_width(d.task))
      throw std::runtime_error("read_jsonl: record widths do not match task " + to_string(d.task));
    d.samples.push_back(std::move(s));
  }
  return d;
}

Standardizer Standardizer::fit(std::span<const double> rows, std::size_t width) {
  if (width == 0 || rows.empty() || rows.size() % width != 0)
    throw DimensionError("Standardizer::fit: data does not divide into rows of width " +
                         std::to_string(width));
  const std::size_t n = rows.size() / width;
  Standardizer s;
  s.mean.assign(width, 0.0);
  s.stddev.assign(width, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < width; ++c) s.mean[c] += rows[r * width + c];
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      const double d = rows[r * width + c] - s.mean[c];
      s.stddev[c] += d * d;
    }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < 1e-9) v = 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t width) {
  return {std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
}

std::vector<double> Standardizer::forward_scale() const {
  std::vector<double> out(width());
  for (std::size_t c = 0; c < width(); ++c) out[c] = 1.0 / stddev[c];
  return out;
}

std::vector<double> Standardizer::forward_shift() const {
  std::vector<double> out(width());
  for (std::size_t c = 0; c < width(); ++c) out[c] = -mean[c] / stddev[c];
  return out;
}

std::vector<double> Standardizer::apply(std::span<const double> rows) const {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = i % width();
    out[i] = (rows[i] - mean[c]) / stddev[c];
  }
  return out;
}

std::vector<double> Standardizer::invert(std::span<const double> rows) const {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = i % width();
    out[i] = rows[i] * stddev[c] + mean[c];
  }
  return out;
}

TaskScaling fit_scaling(const Dataset& train) {
  if (train.samples.empty()) throw std::invalid_argument("fit_scaling: empty training set");
  TaskScaling s;
  s.task = train.task;
  if (const auto* t = std::get_if<TossScenario>(&train.samples[0].scenario)) s.dt = t->dt;
  std::vector<double> xs, ys, ps;
  for (const auto& smp : train.samples) {
    xs.insert(xs.end(), smp.x.begin(), smp.x.end());
    ys.insert(ys.end(), smp.y.begin(), smp.y.end());
    if (train.task == Task::Toss) {
      const auto p = estimate_toss_params(smp.x, s.dt);
      ps.insert(ps.end(), p.begin(), p.end());
    } else {
      // (m_a, m_b, v_a1, v_b1)
      ps.insert(ps.end(), {smp.x[4], smp.x[5], smp.x[0], smp.x[2]});
    }
  }
  s.x = Standardizer::fit(xs, input_width(train.task));
  s.y = Standardizer::fit(ys, label_width(train.task));
  s.params = Standardizer::fit(ps, kPhysicalParams);
  return s;
}

Batch make_batch(const Dataset& d, const TaskScaling& s) {
  if (d.samples.empty()) throw std::invalid_argument("make_batch: empty dataset");
  const std::size_t in = input_width(d.task), out = label_width(d.task);
  Batch b;
  b.rows = d.samples.size();
  std::vector<double> yphy;
  for (const auto& smp : d.samples) {
    b.x_raw.insert(b.x_raw.end(), smp.x.begin(), smp.x.end());
    b.y_raw.insert(b.y_raw.end(), smp.y.begin(), smp.y.end());
    yphy.insert(yphy.end(), smp.y_phy.begin(), smp.y_phy.end());
  }
  b.x = Tensor::matrix(b.rows, in, s.x.apply(b.x_raw));
  b.y = Tensor::matrix(b.rows, out, s.y.apply(b.y_raw));
  b.y_phy = Tensor::matrix(b.rows, out, s.y.apply(yphy));
  return b;
}

}  // namespace physicsnas
