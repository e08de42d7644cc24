#pragma once

#include "physicsnas/dataset.hpp"
#include "physicsnas/nn.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace physicsnas {

struct TrainConfig {
  std::size_t epochs = 2000;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;
  std::size_t patience = 0;    // 0: no early stop
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch, double lr)
      : std::runtime_error(what), epoch_(epoch), lr_(lr) {}
  std::size_t epoch() const { return epoch_; }
  double lr() const { return lr_; }

 private:
  std::size_t epoch_;
  double lr_;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean training objective per epoch
  std::size_t best_epoch = 0;      // epoch whose weights were kept
  double best_val = 0.0;           // validation MSE at best_epoch, when validated
};

// Rows of a batch, in the given order.
Batch slice_rows(const Batch& b, std::span<const std::size_t> rows);

// Adam on MSE (+ the model's penalty). With a validation batch the weights
// of the best validation epoch are restored at the end; otherwise the final
// epoch is kept. Deterministic given (model init, data, cfg).
TrainResult train(Model& model, const Batch& train_set, const TrainConfig& cfg,
                  const Batch* validation = nullptr);

// Prediction in physical label units, row-major.
std::vector<double> predict_physical(const Model& model, const Batch& batch,
                                     const TaskScaling& scaling);

// Mean over samples of the average per-point Euclidean error (2-D points),
// in physical units.
double evaluate(const Model& model, const Batch& test, const TaskScaling& scaling);

// Flat little-endian float64 blob of every parameter, in parameters() order.
void write_weights(const Model& model, std::ostream& os);
void read_weights(Model& model, std::istream& is);

void write_loss_csv(std::span<const double> curve, std::ostream& os);

}  // namespace physicsnas
