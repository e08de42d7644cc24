#pragma once

// Experiment grid: cells of (task, mismatch level, sample count) crossed with
// methods and seeds, plus the sweeps, ablations and probes built on it.

#include "physicsnas/baselines.hpp"
#include "physicsnas/search.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace physicsnas {

enum class Method { Naive, Fusion, Residual, Regularized, Embedded, PhysicsNAS };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::vector<Method> all_methods();  // baselines first, physicsnas last

inline constexpr std::size_t kTestSetSize = 1024;

struct ExperimentSpec {
  Task task = Task::Toss;
  std::string level = "toss-low";  // preset or custom level string
  std::size_t n = 128;
  Method method = Method::Naive;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir;  // empty: nothing persisted
  TrainConfig train;
  SearchConfig search;  // physicsnas only; its seed is derived per run
  std::size_t test_size = kTestSetSize;

  // Throws std::invalid_argument when the spec cannot run.
  void validate() const;
  std::string cell() const;  // "<level>/<n>"
};

// Training data for one (cell, seed); identical for every method.
Dataset train_set_for(const ExperimentSpec& spec, std::uint64_t seed);
// Shared test data for a (task, level), from a seed space disjoint from
// training seeds.
Dataset test_set_for(Task task, const std::string& level, std::size_t size = kTestSetSize);

struct SeedResult {
  std::uint64_t seed = 0;
  std::optional<double> error;  // absent when the run failed
  std::string failure;          // CollapseError / TrainingDiverged message
  double seconds = 0.0;
  std::optional<Architecture> arch;  // physicsnas
  std::optional<SearchTrace> trace;  // physicsnas
  std::size_t parameters = 0;
};

struct ResultRow {
  ExperimentSpec spec;
  std::vector<SeedResult> seeds;

  std::vector<double> errors() const;  // successful seeds only
  bool partial() const;                // some seed failed
  double median() const;               // NaN when no seed succeeded
  double mean() const;
  double stddev() const;               // population
  double seconds() const;
};

// Trains (or searches and retrains) every seed of every spec on a bounded
// worker pool; rows come back in spec order. Seeds that raise
// CollapseError or TrainingDiverged are recorded, not rethrown.
std::vector<ResultRow> run_all(const std::vector<ExperimentSpec>& specs, int threads = 1);
ResultRow run(const ExperimentSpec& spec, int threads = 1);

// One seed of one spec; exposed for tests.
SeedResult run_seed(const ExperimentSpec& spec, std::uint64_t seed);

// Writes results.csv and results.json under out_dir (replacing earlier
// ones), and for physicsnas the searched architectures, search traces and
// snapshots.
void persist(const std::vector<ResultRow>& rows, const std::string& out_dir);

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& os, bool header = true);
std::string results_csv_header();
void write_results_json(const std::vector<ResultRow>& rows, std::ostream& os);

struct CsvRecord {
  std::string task, level, method;
  std::size_t n = 0;
  std::vector<double> errors;
  double median = 0.0;
  std::string status;
};
std::vector<CsvRecord> read_results_csv(std::istream& is);

enum class SweepAxis { Mismatch, Samples };
SweepAxis sweep_axis_from_string(const std::string& s);

// Every method at every axis value. The mismatch axis runs the task's
// level ladder at the base sample count; the samples axis runs the given
// counts at the base level.
std::vector<ExperimentSpec> sweep_specs(SweepAxis axis, const ExperimentSpec& base,
                                        const std::vector<std::size_t>& samples = {32, 64, 128, 256});

// Text table: methods down, cells across; '*' marks the best median in a
// cell and '+' the second best, with ties all marked.
std::string emit_table(const std::vector<ResultRow>& rows);
// "axis,axis_value,method,median" long format.
std::string emit_plot_csv(SweepAxis axis, const std::vector<ResultRow>& rows);

struct AblationReport {
  std::vector<double> error_with, error_without;
  std::vector<std::size_t> depth_with, depth_without;
  std::vector<Architecture> arch_with, arch_without;
  double median_error_with() const;
  double median_error_without() const;
  double median_depth_with() const;
  double median_depth_without() const;
};
AblationReport ablate(const ExperimentSpec& spec, int threads = 1);
std::string ablation_csv(const AblationReport& r);

struct ProbeReport {
  std::vector<double> hand_built, searchable;
  Architecture hand_arch;
  std::vector<Architecture> searched;
  double median_hand_built() const;
  double median_searchable() const;
};

// Single-stream residual architecture vs a minimal searchable variant on
// collision with friction in [0.15, 0.25] and 32 samples.
Architecture probe_hand_built_arch();
SupernetLayout probe_layout();
ProbeReport failure_probe(const ExperimentSpec& spec, int threads = 1);

double median_of(std::vector<double> v);

}  // namespace physicsnas
