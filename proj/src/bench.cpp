#include "physicsnas/bench.hpp"

#include "physicsnas/rng.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace physicsnas {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTagTrainData = 0x747261696eULL;
constexpr std::uint64_t kTestSpace = 0x7465737473657473ULL;
constexpr std::uint64_t kTagInit = 0x696e6974ULL;
constexpr std::uint64_t kTagShuffle = 0x73687566ULL;
constexpr std::uint64_t kTagSearch = 0x736561726368ULL;

constexpr std::pair<Method, const char*> kMethodNames[] = {
    {Method::Naive, "naive"},         {Method::Fusion, "fusion"},
    {Method::Residual, "residual"},   {Method::Regularized, "regularized"},
    {Method::Embedded, "embedded"},   {Method::PhysicsNAS, "physicsnas"}};

// Datasets depend on the resolved level parameters, not on how the level
// was spelled, so "toss-low" and "toss:r=1,k=0.2" share data.
std::uint64_t level_key(const MismatchLevel& m) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(m.task));
  for (double v : {m.wind_range, m.drag_k, m.mu_lo, m.mu_hi}) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  return h;
}

std::string num17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string slug(const ExperimentSpec& s) {
  std::string out = s.level + "_n" + std::to_string(s.n);
  for (auto& c : out)
    if (c == ':' || c == ',' || c == '=' || c == '/') c = '_';
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TrainConfig seeded(TrainConfig cfg, std::uint64_t seed) {
  cfg.seed = derive_seed(seed, {kTagShuffle});
  return cfg;
}

SearchConfig seeded(SearchConfig cfg, std::uint64_t seed) {
  cfg.seed = derive_seed(seed, {kTagSearch});
  return cfg;
}

// Runs body(i) for i in [0, n) on up to `threads` workers; the first
// exception is rethrown after the pool drains.
template <class F>
void pool(std::size_t n, int threads, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [k, name] : kMethodNames)
    if (k == m) return name;
  return "?";
}

Method method_from_string(const std::string& s) {
  for (const auto& [k, name] : kMethodNames)
    if (s == name) return k;
  throw std::invalid_argument("unknown method '" + s +
                              "' (naive, fusion, residual, regularized, embedded, physicsnas)");
}

std::vector<Method> all_methods() {
  return {Method::Naive,       Method::Fusion,   Method::Residual,
          Method::Regularized, Method::Embedded, Method::PhysicsNAS};
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  const auto m = mismatch_preset(level);
  if (m.task != task)
    throw std::invalid_argument("level '" + level + "' belongs to task " + to_string(m.task));
  if (n < 2) throw std::invalid_argument("experiment needs at least 2 training samples");
  if (test_size == 0) throw std::invalid_argument("experiment needs a test set");
  if (train.epochs == 0 || train.lr <= 0.0)
    throw std::invalid_argument("training epochs and learning rate must be positive");
  if (method == Method::PhysicsNAS && (search.weight_lr < 0.0 || search.arch_lr < 0.0))
    throw std::invalid_argument("search learning rates must be nonnegative");
}

std::string ExperimentSpec::cell() const { return level + "/" + std::to_string(n); }

Dataset train_set_for(const ExperimentSpec& spec, std::uint64_t seed) {
  const auto level = mismatch_preset(spec.level);
  return generate_dataset(spec.task, level, spec.n, derive_seed(seed, {kTagTrainData, level_key(level)}));
}

Dataset test_set_for(Task task, const std::string& level_name, std::size_t size) {
  const auto level = mismatch_preset(level_name);
  if (level.task != task) throw std::invalid_argument("test_set_for: level/task mismatch");
  return generate_dataset(task, level, size, derive_seed(kTestSpace, {level_key(level)}));
}

SeedResult run_seed(const ExperimentSpec& spec, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset train_set = train_set_for(spec, seed);
  const Dataset test = test_set_for(spec.task, spec.level, spec.test_size);
  try {
    if (spec.method == Method::PhysicsNAS) {
      auto p = search_and_retrain(train_set, test, seeded(spec.search, seed), seeded(spec.train, seed));
      r.error = p.test_error;
      r.parameters = p.parameters;
      r.arch = std::move(p.arch);
      r.trace = std::move(p.trace);
    } else {
      const auto kind = baseline_from_string(to_string(spec.method));
      const TaskScaling scaling = fit_scaling(train_set);
      auto model = build_model({kind, spec.task}, scaling, derive_seed(seed, {kTagInit}));
      train(*model, make_batch(train_set, scaling), seeded(spec.train, seed));
      r.error = evaluate(*model, make_batch(test, scaling), scaling);
      r.parameters = model->parameter_count();
    }
    if (!std::isfinite(*r.error)) {
      r.failure = "non-finite test error";
      r.error.reset();
    }
  } catch (const CollapseError& e) {
    r.failure = e.what();
  } catch (const TrainingDiverged& e) {
    r.failure = e.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<double> ResultRow::errors() const {
  std::vector<double> out;
  for (const auto& s : seeds)
    if (s.error) out.push_back(*s.error);
  return out;
}

bool ResultRow::partial() const {
  return std::any_of(seeds.begin(), seeds.end(), [](const SeedResult& s) { return !s.error; });
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double ResultRow::median() const { return median_of(errors()); }

double ResultRow::mean() const {
  const auto e = errors();
  if (e.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : e) s += v;
  return s / static_cast<double>(e.size());
}

double ResultRow::stddev() const {
  const auto e = errors();
  if (e.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double mu = mean();
  double s = 0.0;
  for (double v : e) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(e.size()));
}

double ResultRow::seconds() const {
  double s = 0.0;
  for (const auto& r : seeds) s += r.seconds;
  return s;
}

std::vector<ResultRow> run_all(const std::vector<ExperimentSpec>& specs, int threads) {
  for (const auto& s : specs) s.validate();
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  std::vector<ResultRow> rows(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    rows[i].spec = specs[i];
    rows[i].seeds.resize(specs[i].seeds.size());
    for (std::size_t j = 0; j < specs[i].seeds.size(); ++j) jobs.emplace_back(i, j);
  }
  // Physics-NAS jobs are the longest; start them first.
  std::stable_sort(jobs.begin(), jobs.end(), [&](const auto& a, const auto& b) {
    return (specs[a.first].method == Method::PhysicsNAS) > (specs[b.first].method == Method::PhysicsNAS);
  });
  pool(jobs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = jobs[k];
    rows[i].seeds[j] = run_seed(specs[i], specs[i].seeds[j]);
  });
  return rows;
}

ResultRow run(const ExperimentSpec& spec, int threads) { return run_all({spec}, threads).front(); }

std::string results_csv_header() {
  return "task,level,n,method,edge_weights,seeds,train_epochs,train_lr,search_epochs,weight_lr,"
         "arch_lr,errors,median,mean,std,status";
}

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& os, bool header) {
  if (header) os << results_csv_header() << '\n';
  for (const auto& r : rows) {
    const auto& s = r.spec;
    std::vector<std::string> seeds, errors;
    for (const auto& sr : r.seeds) {
      seeds.push_back(std::to_string(sr.seed));
      errors.push_back(sr.error ? num17(*sr.error) : "nan");
    }
    const bool nas = s.method == Method::PhysicsNAS;
    const auto errs = r.errors();
    const std::string status = errs.empty() ? "failed" : (r.partial() ? "partial" : "ok");
    os << to_string(s.task) << ",\"" << s.level << "\"," << s.n << ',' << to_string(s.method) << ','
       << (nas ? (s.search.edge_weights ? "on" : "off") : "") << ',' << join(seeds, ';') << ','
       << s.train.epochs << ',' << num17(s.train.lr) << ',' << (nas ? std::to_string(s.search.epochs) : "")
       << ',' << (nas ? num17(s.search.weight_lr) : "") << ',' << (nas ? num17(s.search.arch_lr) : "")
       << ',' << join(errors, ';') << ',' << num17(r.median()) << ',' << num17(r.mean()) << ','
       << num17(r.stddev()) << ',' << status << '\n';
  }
}

std::vector<CsvRecord> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != results_csv_header())
    throw std::runtime_error("results CSV: unexpected header");
  std::vector<CsvRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    // The level is the only quoted field.
    const auto q1 = line.find('"'), q2 = line.find('"', q1 + 1);
    if (q1 == std::string::npos || q2 == std::string::npos)
      throw std::runtime_error("results CSV: malformed row");
    CsvRecord rec;
    rec.level = line.substr(q1 + 1, q2 - q1 - 1);
    rec.task = line.substr(0, q1 - 1);
    const auto f = split(line.substr(q2 + 2), ',');
    if (f.size() != 14) throw std::runtime_error("results CSV: expected 16 fields");
    rec.n = std::stoul(f[0]);
    rec.method = f[1];
    for (const auto& e : split(f[9], ';')) rec.errors.push_back(e == "nan" ? std::nan("") : std::stod(e));
    rec.median = f[10] == "nan" ? std::nan("") : std::stod(f[10]);
    rec.status = f[13];
    out.push_back(std::move(rec));
  }
  return out;
}

void write_results_json(const std::vector<ResultRow>& rows, std::ostream& os) {
  json out = json::array();
  for (const auto& r : rows) {
    const auto& s = r.spec;
    json seeds = json::array();
    for (const auto& sr : r.seeds) {
      json j{{"seed", sr.seed},
             {"error", sr.error ? json(*sr.error) : json(nullptr)},
             {"seconds", sr.seconds},
             {"parameters", sr.parameters}};
      if (!sr.failure.empty()) j["failure"] = sr.failure;
      if (sr.arch) j["architecture"] = json::parse(export_architecture(*sr.arch, ArchFormat::Json));
      seeds.push_back(std::move(j));
    }
    json spec{{"task", to_string(s.task)},
              {"level", s.level},
              {"n", s.n},
              {"method", to_string(s.method)},
              {"test_size", s.test_size},
              {"train", {{"epochs", s.train.epochs}, {"lr", s.train.lr}}}};
    if (s.method == Method::PhysicsNAS)
      spec["search"] = {{"epochs", s.search.epochs},
                        {"weight_lr", s.search.weight_lr},
                        {"arch_lr", s.search.arch_lr},
                        {"snapshot_interval", s.search.snapshot_interval},
                        {"edge_weights", s.search.edge_weights}};
    const double med = r.median();
    out.push_back({{"spec", spec},
                   {"seeds", seeds},
                   {"median", std::isnan(med) ? json(nullptr) : json(med)},
                   {"partial", r.partial()},
                   {"wall_clock_seconds", r.seconds()}});
  }
  os << out.dump(2) << '\n';
}

void persist(const std::vector<ResultRow>& rows, const std::string& out_dir) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  {
    std::ofstream csv(fs::path(out_dir) / "results.csv");
    write_results_csv(rows, csv);
  }
  {
    std::ofstream js(fs::path(out_dir) / "results.json");
    write_results_json(rows, js);
  }
  for (const auto& r : rows) {
    for (const auto& sr : r.seeds) {
      if (!sr.arch) continue;
      const std::string stem = slug(r.spec) + "_seed" + std::to_string(sr.seed);
      fs::create_directories(fs::path(out_dir) / "archs");
      std::ofstream(fs::path(out_dir) / "archs" / (stem + ".json")) << export_architecture(*sr.arch, ArchFormat::Json);
      std::ofstream(fs::path(out_dir) / "archs" / (stem + ".dot")) << export_architecture(*sr.arch, ArchFormat::Dot);
      if (!sr.trace) continue;
      const fs::path snap_dir = fs::path("snapshots") / stem;
      fs::create_directories(fs::path(out_dir) / snap_dir);
      for (const auto& snap : sr.trace->snapshots)
        std::ofstream(fs::path(out_dir) / snap_dir / ("epoch" + std::to_string(snap.epoch) + ".json"))
            << export_architecture(snap.arch, ArchFormat::Json);
      fs::create_directories(fs::path(out_dir) / "traces");
      std::ofstream trace(fs::path(out_dir) / "traces" / (stem + ".csv"));
      write_trace_csv(*sr.trace, (snap_dir / "epoch").string(), trace);
    }
  }
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "mismatch") return SweepAxis::Mismatch;
  if (s == "samples") return SweepAxis::Samples;
  throw std::invalid_argument("unknown sweep axis '" + s + "' (mismatch or samples)");
}

std::vector<ExperimentSpec> sweep_specs(SweepAxis axis, const ExperimentSpec& base,
                                        const std::vector<std::size_t>& samples) {
  std::vector<ExperimentSpec> out;
  auto add_all = [&](ExperimentSpec s) {
    for (auto m : all_methods()) {
      s.method = m;
      out.push_back(s);
    }
  };
  if (axis == SweepAxis::Mismatch) {
    for (const auto& level : mismatch_axis(base.task)) {
      ExperimentSpec s = base;
      s.level = level.name;
      add_all(s);
    }
  } else {
    if (samples.empty()) throw std::invalid_argument("samples sweep needs at least one count");
    for (auto n : samples) {
      ExperimentSpec s = base;
      s.n = n;
      add_all(s);
    }
  }
  return out;
}

std::string emit_table(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("emit_table: no rows");
  const Task task = rows.front().spec.task;
  for (const auto& r : rows)
    if (r.spec.task != task) throw std::invalid_argument("emit_table: rows mix tasks");

  std::vector<std::string> cells;
  std::vector<Method> methods;
  std::map<std::pair<std::string, Method>, double> med;
  for (const auto& r : rows) {
    const auto c = r.spec.cell();
    if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
    if (std::find(methods.begin(), methods.end(), r.spec.method) == methods.end())
      methods.push_back(r.spec.method);
    med[{c, r.spec.method}] = r.median();
  }
  std::sort(methods.begin(), methods.end());

  std::map<std::pair<std::string, Method>, char> mark;
  for (const auto& c : cells) {
    std::vector<double> vals;
    for (auto m : methods) {
      auto it = med.find({c, m});
      if (it != med.end() && !std::isnan(it->second)) vals.push_back(it->second);
    }
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (auto m : methods) {
      auto it = med.find({c, m});
      if (it == med.end() || std::isnan(it->second)) continue;
      if (it->second == vals[0]) mark[{c, m}] = '*';
      else if (vals.size() > 1 && it->second == vals[1]) mark[{c, m}] = '+';
    }
  }

  std::size_t first = 6;
  for (auto m : methods) first = std::max(first, to_string(m).size());
  std::vector<std::size_t> widths;
  for (const auto& c : cells) widths.push_back(std::max<std::size_t>(c.size(), 10));

  std::ostringstream os;
  auto pad = [&](const std::string& s, std::size_t w, bool left) {
    const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
    os << (left ? s + fill : fill + s);
  };
  pad(to_string(task), first, true);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    os << "  ";
    pad(cells[i], widths[i], false);
  }
  os << '\n';
  for (auto m : methods) {
    pad(to_string(m), first, true);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      os << "  ";
      auto it = med.find({cells[i], m});
      std::string text = "-";
      if (it != med.end()) {
        if (std::isnan(it->second)) {
          text = "failed";
        } else {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.4f", it->second);
          auto mk = mark.find({cells[i], m});
          text = std::string(buf) + (mk != mark.end() ? mk->second : ' ');
        }
      }
      pad(text, widths[i], false);
    }
    os << '\n';
  }
  os << "(median test error over seeds; * best, + second best)\n";
  return os.str();
}

std::string emit_plot_csv(SweepAxis axis, const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << "axis,axis_value,method,median\n";
  for (const auto& r : rows) {
    os << (axis == SweepAxis::Mismatch ? "mismatch" : "samples") << ',';
    if (axis == SweepAxis::Mismatch)
      os << '"' << r.spec.level << '"';
    else
      os << r.spec.n;
    os << ',' << to_string(r.spec.method) << ',' << num17(r.median()) << '\n';
  }
  return os.str();
}

namespace {

double median_size(const std::vector<std::size_t>& v) {
  std::vector<double> d(v.begin(), v.end());
  return median_of(d);
}

}  // namespace

double AblationReport::median_error_with() const { return median_of(error_with); }
double AblationReport::median_error_without() const { return median_of(error_without); }
double AblationReport::median_depth_with() const { return median_size(depth_with); }
double AblationReport::median_depth_without() const { return median_size(depth_without); }

AblationReport ablate(const ExperimentSpec& spec, int threads) {
  ExperimentSpec s = spec;
  s.method = Method::PhysicsNAS;
  s.validate();
  const std::size_t k = s.seeds.size();
  std::vector<EdgeWeightAblation> res(k);
  const Dataset test = test_set_for(s.task, s.level, s.test_size);
  pool(k, threads, [&](std::size_t i) {
    const auto seed = s.seeds[i];
    res[i] = ablate_edge_weights(train_set_for(s, seed), test, seeded(s.search, seed), seeded(s.train, seed));
  });
  AblationReport r;
  for (auto& a : res) {
    r.error_with.push_back(a.with_weights.test_error);
    r.error_without.push_back(a.without_weights.test_error);
    r.depth_with.push_back(a.with_weights.arch.depth());
    r.depth_without.push_back(a.without_weights.arch.depth());
    r.arch_with.push_back(std::move(a.with_weights.arch));
    r.arch_without.push_back(std::move(a.without_weights.arch));
  }
  return r;
}

std::string ablation_csv(const AblationReport& r) {
  auto list = [](const auto& v) {
    std::vector<std::string> parts;
    for (auto x : v) parts.push_back(num17(static_cast<double>(x)));
    return join(parts, ';');
  };
  std::ostringstream os;
  os << "variant,median_error,median_depth,errors,depths\n";
  os << "with_edge_weights," << num17(r.median_error_with()) << ',' << num17(r.median_depth_with())
     << ',' << list(r.error_with) << ',' << list(r.depth_with) << '\n';
  os << "without_edge_weights," << num17(r.median_error_without()) << ','
     << num17(r.median_depth_without()) << ',' << list(r.error_without) << ','
     << list(r.depth_without) << '\n';
  return os.str();
}

Architecture probe_hand_built_arch() {
  const Task t = Task::Collision;
  const std::vector<NodeSpec> nodes{{0, NodeKind::InputX, input_width(t)},
                                    {1, NodeKind::InputYPhy, label_width(t)},
                                    {2, NodeKind::Hidden, kHiddenWidth},
                                    {3, NodeKind::Output, label_width(t)}};
  return make_architecture(t, nodes,
                           {{0, 2, OpKind::FCReLU}, {1, 3, OpKind::Identity}, {2, 3, OpKind::FCLinear}},
                           {"hand-built", 0, 0, ""});
}

SupernetLayout probe_layout() {
  SupernetLayout l;
  l.inputs = {NodeKind::InputX, NodeKind::InputYPhy};
  l.hidden_nodes = 1;
  return l;
}

double ProbeReport::median_hand_built() const { return median_of(hand_built); }
double ProbeReport::median_searchable() const { return median_of(searchable); }

ProbeReport failure_probe(const ExperimentSpec& spec, int threads) {
  ExperimentSpec s = spec;
  s.method = Method::PhysicsNAS;
  s.validate();
  if (s.task != Task::Collision) throw std::invalid_argument("failure probe runs on the collision task");
  const std::size_t k = s.seeds.size();
  ProbeReport r;
  r.hand_arch = probe_hand_built_arch();
  r.hand_built.resize(k);
  r.searchable.resize(k);
  r.searched.resize(k);
  const Dataset test = test_set_for(s.task, s.level, s.test_size);
  pool(k, threads, [&](std::size_t i) {
    const auto seed = s.seeds[i];
    const Dataset train_set = train_set_for(s, seed);
    const TaskScaling scaling = fit_scaling(train_set);
    ArchModel hand(r.hand_arch, scaling, derive_seed(seed, {kTagInit}));
    train(hand, make_batch(train_set, scaling), seeded(s.train, seed));
    r.hand_built[i] = evaluate(hand, make_batch(test, scaling), scaling);
    auto p = search_and_retrain(train_set, test, seeded(s.search, seed), seeded(s.train, seed), probe_layout());
    r.searchable[i] = p.test_error;
    r.searched[i] = std::move(p.arch);
  });
  return r;
}

}  // namespace physicsnas
