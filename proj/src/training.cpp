#include "physicsnas/training.hpp"

#include "physicsnas/adam.hpp"
#include "physicsnas/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace physicsnas {

Batch slice_rows(const Batch& b, std::span<const std::size_t> rows) {
  const std::size_t in = b.x.cols(), out = b.y.cols();
  Batch s;
  s.rows = rows.size();
  std::vector<double> x(s.rows * in), y(s.rows * out), yp(s.rows * out);
  s.x_raw.resize(s.rows * in);
  s.y_raw.resize(s.rows * out);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= b.rows) throw std::out_of_range("slice_rows: row index out of range");
    std::copy_n(b.x.values().data() + r * in, in, x.data() + i * in);
    std::copy_n(b.y.values().data() + r * out, out, y.data() + i * out);
    std::copy_n(b.y_phy.values().data() + r * out, out, yp.data() + i * out);
    std::copy_n(b.x_raw.data() + r * in, in, s.x_raw.data() + i * in);
    std::copy_n(b.y_raw.data() + r * out, out, s.y_raw.data() + i * out);
  }
  s.x = Tensor::matrix(s.rows, in, std::move(x));
  s.y = Tensor::matrix(s.rows, out, std::move(y));
  s.y_phy = Tensor::matrix(s.rows, out, std::move(yp));
  return s;
}

namespace {

double validation_mse(const Model& model, const Batch& v) {
  return mse_loss(model.forward(v), v.y).item();
}

}  // namespace

TrainResult train(Model& model, const Batch& train_set, const TrainConfig& cfg,
                  const Batch* validation) {
  if (train_set.rows == 0) throw std::invalid_argument("train: empty training set");
  if (cfg.epochs == 0 || cfg.lr <= 0.0)
    throw std::invalid_argument("train: epochs and learning rate must be positive");
  AdamState adam({cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  auto params = model.parameters();
  const std::size_t bs =
      cfg.batch_size == 0 || cfg.batch_size >= train_set.rows ? train_set.rows : cfg.batch_size;
  const bool full_batch = bs == train_set.rows;

  std::vector<std::size_t> order(train_set.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(cfg.seed, {0x73687566ULL}));

  TrainResult result;
  result.loss_curve.reserve(cfg.epochs);
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_weights;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!full_batch) std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < train_set.rows; start += bs) {
      const std::size_t len = std::min(bs, train_set.rows - start);
      Batch mb_storage;
      const Batch* mb = &train_set;
      if (!full_batch) {
        mb_storage = slice_rows(train_set, std::span(order).subspan(start, len));
        mb = &mb_storage;
      }
      const Tensor pred = model.forward(*mb);
      Tensor loss = mse_loss(pred, mb->y);
      if (auto pen = model.penalty(pred, *mb)) loss = add(loss, *pen);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw TrainingDiverged("training diverged (non-finite loss) at epoch " +
                                   std::to_string(epoch) + " with lr " + std::to_string(cfg.lr) +
                                   "; lower the learning rate",
                               epoch, cfg.lr);
      backward(loss);
      adam_step(params, adam);
      epoch_loss += value * static_cast<double>(len);
      seen += len;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(seen));

    if (validation) {
      const double v = validation_mse(model, *validation);
      if (v < best) {
        best = v;
        result.best_epoch = epoch;
        result.best_val = v;
        best_weights.clear();
        for (const auto& p : params) best_weights.emplace_back(p.values().begin(), p.values().end());
        since_best = 0;
      } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
        break;
      }
    } else {
      result.best_epoch = epoch;
    }
  }
  if (validation && !best_weights.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i)
      std::copy(best_weights[i].begin(), best_weights[i].end(), params[i].mutable_values().begin());
  }
  return result;
}

std::vector<double> predict_physical(const Model& model, const Batch& batch,
                                     const TaskScaling& scaling) {
  const Tensor pred = model.forward(batch);
  return scaling.y.invert(pred.values());
}

double evaluate(const Model& model, const Batch& test, const TaskScaling& scaling) {
  if (test.rows == 0) throw std::invalid_argument("evaluate: empty test set");
  const auto pred = predict_physical(model, test, scaling);
  const std::size_t w = test.y.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < test.rows; ++r)
    total += metric_avg_euclidean(std::span(pred).subspan(r * w, w),
                                  std::span(test.y_raw).subspan(r * w, w), 2);
  return total / static_cast<double>(test.rows);
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight blobs are written in host order; big-endian hosts need byte swapping");

}  // namespace

void write_weights(const Model& model, std::ostream& os) {
  for (const auto& p : model.parameters()) {
    const auto v = p.values();
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
}

void read_weights(Model& model, std::istream& is) {
  for (auto& p : model.parameters()) {
    auto v = p.mutable_values();
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw std::runtime_error("read_weights: blob shorter than the model's parameters");
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("read_weights: blob longer than the model's parameters");
}

void write_loss_csv(std::span<const double> curve, std::ostream& os) {
  os << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", curve[i]);
    os << i << ',' << buf << '\n';
  }
}

}  // namespace physicsnas
