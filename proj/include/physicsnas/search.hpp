#pragma once

// Bilevel search over a Supernet, then retraining of the pruned result.

#include "physicsnas/adam.hpp"
#include "physicsnas/dataset.hpp"
#include "physicsnas/supernet.hpp"
#include "physicsnas/training.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace physicsnas {

struct SearchConfig {
  std::size_t epochs = 1000;
  double weight_lr = 1e-3;
  double arch_lr = 1e-2;
  double arch_beta1 = 0.9;
  std::size_t warmup_epochs = 0;       // leading epochs with ω-steps only
  std::size_t snapshot_interval = 10;  // 0: final snapshot only
  std::uint64_t seed = 0;
  bool edge_weights = true;
};

// Joint optimisation went non-finite. Usually cured by lowering one of the
// two learning rates, most often the architecture one.
class CollapseError : public std::runtime_error {
 public:
  CollapseError(double weight_lr, double arch_lr, std::size_t epoch);
  double weight_lr() const { return weight_lr_; }
  double arch_lr() const { return arch_lr_; }
  std::size_t epoch() const { return epoch_; }

 private:
  double weight_lr_;
  double arch_lr_;
  std::size_t epoch_;
};

struct SearchSnapshot {
  std::size_t epoch = 0;
  double relaxed_val = 0.0;  // D_α loss of the probability-weighted supernet
  Architecture arch;
};

struct SearchTrace {
  std::vector<double> train_loss;  // ω-step loss on D_ω
  std::vector<double> val_loss;    // α-step loss on D_α
  std::vector<SearchSnapshot> snapshots;

  // Soft health check: relaxed validation loss over the last quarter of the
  // snapshots should not end above where it started.
  bool relaxed_val_settled() const;
};

struct SearchSplit {
  Dataset omega;  // network weights
  Dataset alpha;  // architecture logits
};

// Shuffled halves; with odd n the extra sample goes to D_ω.
SearchSplit split_for_search(const Dataset& train, std::uint64_t seed);

// One full-batch network step on a fresh gate sample. The logits are not
// part of the graph, so they cannot change. Returns the loss; nothing is
// updated when it is non-finite.
double weight_step(Supernet& net, const Batch& d_omega, Rng& gate_rng, AdamState& adam);
// One architecture step on a fresh gate sample with the weights frozen.
double arch_step(Supernet& net, const Batch& d_alpha, Rng& gate_rng, AdamState& adam);

struct SearchOutcome {
  Architecture arch;
  SearchTrace trace;
};

// Alternates one full-batch ω-step on D_ω and one α-step on D_α per epoch,
// each with a fresh gate sample, then prunes.
SearchOutcome search(Supernet& net, const Batch& d_omega, const Batch& d_alpha,
                     const SearchConfig& cfg);

struct RetrainOutcome {
  ArchModel model;
  TrainResult result;
};

// Fresh weights for the pruned graph, trained like the baselines.
RetrainOutcome retrain(const Architecture& arch, const Batch& train_full,
                       const TaskScaling& scaling, const TrainConfig& cfg);

struct PipelineResult {
  Architecture arch;
  SearchTrace trace;
  double test_error = 0.0;
  std::size_t parameters = 0;
};

// Split, search, retrain on the full training set, evaluate on `test`.
// Scaling is fitted on the full training set.
PipelineResult search_and_retrain(const Dataset& train, const Dataset& test,
                                  const SearchConfig& search_cfg, const TrainConfig& train_cfg,
                                  const SupernetLayout& layout = {});

struct EdgeWeightAblation {
  PipelineResult with_weights;
  PipelineResult without_weights;
};

EdgeWeightAblation ablate_edge_weights(const Dataset& train, const Dataset& test,
                                       const SearchConfig& search_cfg,
                                       const TrainConfig& train_cfg);

// "epoch,train_loss,val_loss,snapshot_path"; the path column is filled for
// snapshot epochs as `<snapshot_prefix><epoch>.json`.
void write_trace_csv(const SearchTrace& trace, const std::string& snapshot_prefix, std::ostream& os);

}  // namespace physicsnas
