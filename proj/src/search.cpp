#include "physicsnas/search.hpp"

#include "physicsnas/adam.hpp"
#include "physicsnas/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace physicsnas {

namespace {

constexpr std::uint64_t kTagSplit = 0x73706c6974ULL;
constexpr std::uint64_t kTagSupernet = 0x7375706572ULL;
constexpr std::uint64_t kTagGates = 0x6761746573ULL;
constexpr std::uint64_t kTagRetrain = 0x726574726eULL;

std::string format_lr(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string config_json(const SearchConfig& c) {
  return nlohmann::json{{"epochs", c.epochs},
                        {"weight_lr", c.weight_lr},
                        {"arch_lr", c.arch_lr},
                        {"arch_beta1", c.arch_beta1},
                        {"warmup_epochs", c.warmup_epochs},
                        {"snapshot_interval", c.snapshot_interval},
                        {"seed", c.seed},
                        {"edge_weights", c.edge_weights}}
      .dump();
}

// Steps the parameters that received a gradient and drops every buffer so
// the next step starts clean.
void step_touched(std::vector<Tensor>& params, AdamState& adam) {
  std::vector<Tensor> touched;
  for (auto& p : params)
    if (p.has_grad()) touched.push_back(p);
  adam_step(touched, adam);
  for (auto& p : params) p.clear_grad();
}

}  // namespace

CollapseError::CollapseError(double weight_lr, double arch_lr, std::size_t epoch)
    : std::runtime_error("search collapsed (non-finite loss) at epoch " + std::to_string(epoch) +
                         " with weight lr " + format_lr(weight_lr) + " and arch lr " +
                         format_lr(arch_lr) + "; retry with a smaller arch lr"),
      weight_lr_(weight_lr),
      arch_lr_(arch_lr),
      epoch_(epoch) {}

bool SearchTrace::relaxed_val_settled() const {
  if (snapshots.size() < 2) return true;
  const std::size_t window = std::max<std::size_t>(2, (snapshots.size() + 3) / 4);
  const auto& first = snapshots[snapshots.size() - window];
  return snapshots.back().relaxed_val <= first.relaxed_val;
}

SearchSplit split_for_search(const Dataset& train, std::uint64_t seed) {
  const std::size_t n = train.size();
  if (n < 2) throw std::invalid_argument("split_for_search: need at least 2 samples, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {kTagSplit}));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_alpha = n / 2;
  std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<long>(n - n_alpha));
  std::vector<std::size_t> b(order.begin() + static_cast<long>(n - n_alpha), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {train.subset(a), train.subset(b)};
}

double weight_step(Supernet& net, const Batch& d_omega, Rng& gate_rng, AdamState& adam) {
  const auto gates = net.sample_gates(gate_rng);
  Tensor loss = mse_loss(net.forward(d_omega, gates, false), d_omega.y);
  const double v = loss.item();
  if (!std::isfinite(v)) return v;
  backward(loss);
  auto weights = net.weights();
  step_touched(weights, adam);
  return v;
}

double arch_step(Supernet& net, const Batch& d_alpha, Rng& gate_rng, AdamState& adam) {
  const auto gates = net.sample_gates(gate_rng);
  net.set_weights_trainable(false);
  double v = 0.0;
  try {
    Tensor loss = mse_loss(net.forward(d_alpha, gates, true), d_alpha.y);
    v = loss.item();
    if (std::isfinite(v)) {
      backward(loss);
      auto alphas = net.alphas();
      step_touched(alphas, adam);
    }
  } catch (...) {
    net.set_weights_trainable(true);
    throw;
  }
  net.set_weights_trainable(true);
  return v;
}

SearchOutcome search(Supernet& net, const Batch& d_omega, const Batch& d_alpha,
                     const SearchConfig& cfg) {
  if (d_omega.rows == 0 || d_alpha.rows == 0) throw std::invalid_argument("search: empty split");
  AdamState w_adam({cfg.weight_lr, 0.9, 0.999, 1e-8});
  AdamState a_adam({cfg.arch_lr, cfg.arch_beta1, 0.999, 1e-8});
  const auto alphas = net.alphas();
  Rng gate_rng(derive_seed(cfg.seed, {kTagGates}));
  const std::string cfg_text = config_json(cfg);

  SearchOutcome out;
  auto& trace = out.trace;
  trace.train_loss.reserve(cfg.epochs);
  trace.val_loss.reserve(cfg.epochs);

  auto snapshot = [&](std::size_t epoch) {
    const double relaxed = mse_loss(net.forward_relaxed(d_alpha), d_alpha.y).item();
    trace.snapshots.push_back({epoch, relaxed, net.prune({"search", cfg.seed, epoch, cfg_text})});
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double tl = weight_step(net, d_omega, gate_rng, w_adam);
    if (!std::isfinite(tl)) throw CollapseError(cfg.weight_lr, cfg.arch_lr, epoch);
    trace.train_loss.push_back(tl);
    if (epoch < cfg.warmup_epochs) {
      trace.val_loss.push_back(std::nan(""));
    } else {
      const double vl = arch_step(net, d_alpha, gate_rng, a_adam);
      if (!std::isfinite(vl)) throw CollapseError(cfg.weight_lr, cfg.arch_lr, epoch);
      trace.val_loss.push_back(vl);
    }
    for (const auto& a : alphas)
      for (double z : a.values())
        if (!std::isfinite(z)) throw CollapseError(cfg.weight_lr, cfg.arch_lr, epoch);
    if (cfg.snapshot_interval > 0 && epoch % cfg.snapshot_interval == 0) snapshot(epoch);
  }
  if (trace.snapshots.empty() || trace.snapshots.back().epoch + 1 != cfg.epochs)
    snapshot(cfg.epochs == 0 ? 0 : cfg.epochs - 1);
  out.arch = net.prune({"search", cfg.seed, cfg.epochs, cfg_text});
  return out;
}

RetrainOutcome retrain(const Architecture& arch, const Batch& train_full,
                       const TaskScaling& scaling, const TrainConfig& cfg) {
  ArchModel model(arch, scaling, derive_seed(cfg.seed, {kTagRetrain}));
  auto result = train(model, train_full, cfg);
  return {std::move(model), std::move(result)};
}

PipelineResult search_and_retrain(const Dataset& train_set, const Dataset& test,
                                  const SearchConfig& search_cfg, const TrainConfig& train_cfg,
                                  const SupernetLayout& layout) {
  const TaskScaling scaling = fit_scaling(train_set);
  const auto split = split_for_search(train_set, search_cfg.seed);
  const Batch b_omega = make_batch(split.omega, scaling);
  const Batch b_alpha = make_batch(split.alpha, scaling);
  Supernet net(scaling, derive_seed(search_cfg.seed, {kTagSupernet}), layout, search_cfg.edge_weights);
  auto found = search(net, b_omega, b_alpha, search_cfg);

  const Batch full = make_batch(train_set, scaling);
  auto re = retrain(found.arch, full, scaling, train_cfg);
  PipelineResult r;
  r.test_error = evaluate(re.model, make_batch(test, scaling), scaling);
  r.parameters = re.model.parameter_count();
  r.arch = std::move(found.arch);
  r.trace = std::move(found.trace);
  return r;
}

EdgeWeightAblation ablate_edge_weights(const Dataset& train_set, const Dataset& test,
                                       const SearchConfig& search_cfg,
                                       const TrainConfig& train_cfg) {
  SearchConfig on = search_cfg, off = search_cfg;
  on.edge_weights = true;
  off.edge_weights = false;
  return {search_and_retrain(train_set, test, on, train_cfg),
          search_and_retrain(train_set, test, off, train_cfg)};
}

void write_trace_csv(const SearchTrace& trace, const std::string& snapshot_prefix, std::ostream& os) {
  os << "epoch,train_loss,val_loss,snapshot_path\n";
  std::size_t s = 0;
  char buf[80];
  for (std::size_t e = 0; e < trace.train_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", trace.train_loss[e], trace.val_loss[e]);
    os << e << ',' << buf << ',';
    while (s < trace.snapshots.size() && trace.snapshots[s].epoch < e) ++s;
    if (s < trace.snapshots.size() && trace.snapshots[s].epoch == e)
      os << snapshot_prefix << e << ".json";
    os << '\n';
  }
}

}  // namespace physicsnas
