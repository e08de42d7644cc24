#pragma once

#include "physicsnas/physics.hpp"
#include "physicsnas/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace physicsnas {

// Mismatch between simulator and prior. Toss: wind components uniform in
// [-wind_range, wind_range] plus quadratic drag k. Collision: friction
// coefficient uniform in [mu_lo, mu_hi].
struct MismatchLevel {
  std::string name;
  Task task = Task::Toss;
  double wind_range = 0.0;
  double drag_k = 0.0;
  double mu_lo = 0.0;
  double mu_hi = 0.0;

  bool operator==(const MismatchLevel&) const = default;
};

MismatchLevel toss_level(double wind_range, double drag_k);
MismatchLevel collision_level(double mu_lo, double mu_hi);

// toss-zero, toss-low, toss-high, collision-zero, collision-low,
// collision-high, collision-probe; also "toss:r=<r>,k=<k>" and
// "collision:mu=<lo>-<hi>".
MismatchLevel mismatch_preset(const std::string& name);
std::vector<std::string> preset_names();

// Fine-grained mismatch axis, extreme to low.
std::vector<MismatchLevel> mismatch_axis(Task task);

struct Sample {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_phy;
  std::uint64_t seed = 0;
  std::variant<TossScenario, CollisionScenario> scenario;
};

struct Dataset {
  Task task = Task::Toss;
  MismatchLevel level;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
};

inline constexpr double kTossDt = 0.1;
inline constexpr double kCollisionObsDt = 0.05;
inline constexpr int kRejectionBudget = 10000;

// Deterministic in (task, level, n, seed); each sample draws from its own
// derived stream so sample i does not depend on n.
Dataset generate_dataset(Task task, const MismatchLevel& level, std::size_t n, std::uint64_t seed);

// One JSON object per line: {"x":[..],"y":[..],"y_phy":[..],"meta":{..}}.
void write_jsonl(const Dataset& d, std::ostream& os);
Dataset read_jsonl(std::istream& is);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  // Columns with (near) zero spread keep unit scale.
  static Standardizer fit(std::span<const double> rows, std::size_t width);
  static Standardizer identity(std::size_t width);
  std::size_t width() const { return mean.size(); }
  // Per-column scale/shift of the forward (standardize) and inverse maps.
  std::vector<double> forward_scale() const;
  std::vector<double> forward_shift() const;
  std::vector<double> inverse_scale() const { return stddev; }
  std::vector<double> inverse_shift() const { return mean; }
  std::vector<double> apply(std::span<const double> rows) const;
  std::vector<double> invert(std::span<const double> rows) const;
};

// Standardization fitted on a training split. Labels and the prior share
// the label transform; `params` standardizes the four physical parameters
// predicted by physics heads.
struct TaskScaling {
  Task task = Task::Toss;
  double dt = kTossDt;
  Standardizer x;
  Standardizer y;
  Standardizer params;
};

TaskScaling fit_scaling(const Dataset& train);

struct Batch {
  std::size_t rows = 0;
  Tensor x;      // standardized [rows x in]
  Tensor y;      // standardized [rows x out]
  Tensor y_phy;  // standardized with the label transform
  std::vector<double> x_raw;
  std::vector<double> y_raw;
};

Batch make_batch(const Dataset& d, const TaskScaling& s);

}  // namespace physicsnas
