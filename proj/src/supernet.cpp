#include "physicsnas/supernet.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace physicsnas {

using nlohmann::json;

namespace {

constexpr std::pair<NodeKind, const char*> kNodeNames[] = {
    {NodeKind::InputX, "x"},           {NodeKind::InputXDup, "x_dup"},
    {NodeKind::InputYPhy, "y_phy"},    {NodeKind::InputConcat, "concat"},
    {NodeKind::Hidden, "hidden"},      {NodeKind::Output, "output"}};

constexpr std::pair<OpKind, const char*> kOpNames[] = {
    {OpKind::FCReLU, "fc_relu"},       {OpKind::FCLinear, "fc_linear"},
    {OpKind::Identity, "identity"},    {OpKind::Zero, "zero"},
    {OpKind::PhysicsForward, "physics_forward"}};

bool has_layer(OpKind k) {
  return k == OpKind::FCReLU || k == OpKind::FCLinear || k == OpKind::PhysicsForward;
}

std::vector<double> softmax_values(std::span<const double> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += p[i] = std::exp(z[i] - zmax);
  for (auto& v : p) v /= total;
  return p;
}

std::size_t draw(Rng& rng, std::span<const double> weights, const std::vector<bool>& taken) {
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (!taken[i]) total += weights[i];
  const double u = uniform(rng, 0.0, 1.0) * total;
  double acc = 0.0;
  std::size_t last = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (taken[i]) continue;
    last = i;
    acc += weights[i];
    if (u < acc) return i;
  }
  return last;
}

// Probability that each item is among k sequential draws without replacement.
std::vector<double> inclusion_probs(std::span<const double> p, std::size_t k) {
  std::vector<double> pi(p.size(), 1.0);
  if (k >= p.size()) return pi;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pi[i] = p[i];
    if (k == 2)
      for (std::size_t j = 0; j < p.size(); ++j)
        if (j != i && p[j] < 1.0) pi[i] += p[j] * p[i] / (1.0 - p[j]);
  }
  return pi;
}

Tensor input_value(NodeKind kind, const Batch& b) {
  switch (kind) {
    case NodeKind::InputX:
    case NodeKind::InputXDup: return b.x;
    case NodeKind::InputYPhy: return b.y_phy;
    case NodeKind::InputConcat: return concat({b.x, b.y_phy});
    default: break;
  }
  throw std::logic_error("input_value: not an input node");
}

std::size_t input_node_width(NodeKind kind, Task task) {
  switch (kind) {
    case NodeKind::InputX:
    case NodeKind::InputXDup: return input_width(task);
    case NodeKind::InputYPhy: return label_width(task);
    case NodeKind::InputConcat: return input_width(task) + label_width(task);
    default: break;
  }
  throw std::logic_error("input_node_width: not an input node");
}

}  // namespace

std::string to_string(NodeKind k) {
  for (const auto& [kind, name] : kNodeNames)
    if (kind == k) return name;
  return "?";
}

std::string to_string(OpKind k) {
  for (const auto& [kind, name] : kOpNames)
    if (kind == k) return name;
  return "?";
}

NodeKind node_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kNodeNames)
    if (s == name) return kind;
  throw std::invalid_argument("unknown node kind '" + s + "'");
}

OpKind op_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kOpNames)
    if (s == name) return kind;
  throw std::invalid_argument("unknown operation '" + s + "'");
}

bool is_input(NodeKind k) { return k != NodeKind::Hidden && k != NodeKind::Output; }

const GateSample::NodeGates& GateSample::for_node(int node) const {
  for (const auto& n : nodes)
    if (n.node == node) return n;
  throw std::out_of_range("GateSample: no gates for node " + std::to_string(node));
}

// --- Architecture ---------------------------------------------------------

std::vector<ArchEdge> Architecture::incoming(int node_id) const {
  std::vector<ArchEdge> out;
  for (const auto& e : edges)
    if (e.to == node_id) out.push_back(e);
  return out;
}

const NodeSpec& Architecture::node(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return n;
  throw std::out_of_range("Architecture: no live node " + std::to_string(id));
}

bool Architecture::uses_op(OpKind op) const {
  return std::any_of(edges.begin(), edges.end(), [op](const ArchEdge& e) { return e.op == op; });
}

std::size_t Architecture::depth() const {
  int max_id = 0;
  for (const auto& n : nodes) max_id = std::max(max_id, n.id);
  std::vector<long> best(static_cast<std::size_t>(max_id) + 1, -1);
  int out_id = -1;
  for (const auto& n : nodes) {
    if (is_input(n.kind)) best[n.id] = 0;
    if (n.kind == NodeKind::Output) out_id = n.id;
  }
  std::vector<NodeSpec> order = nodes;
  std::sort(order.begin(), order.end(), [](auto& a, auto& b) { return a.id < b.id; });
  for (const auto& n : order) {
    if (is_input(n.kind)) continue;
    for (const auto& e : incoming(n.id))
      if (e.op != OpKind::Zero && static_cast<std::size_t>(e.from) < best.size() && best[e.from] >= 0)
        best[n.id] = std::max(best[n.id], best[e.from] + 1);
  }
  return out_id >= 0 && best[out_id] > 0 ? static_cast<std::size_t>(best[out_id]) : 0;
}

void Architecture::validate() const {
  auto live = [&](int id) {
    return std::any_of(nodes.begin(), nodes.end(), [id](const NodeSpec& n) { return n.id == id; });
  };
  const auto outputs = std::count_if(nodes.begin(), nodes.end(),
                                     [](const NodeSpec& n) { return n.kind == NodeKind::Output; });
  if (outputs != 1) throw std::invalid_argument("architecture: expected exactly one output node");
  for (const auto& e : edges) {
    if (e.from >= e.to) throw std::invalid_argument("architecture: edge against topological order");
    if (!live(e.from) || !live(e.to))
      throw std::invalid_argument("architecture: edge " + std::to_string(e.from) + "->" +
                                  std::to_string(e.to) + " references a pruned node");
  }
  for (const auto& n : nodes)
    if (!is_input(n.kind) && incoming(n.id).empty())
      throw std::invalid_argument("architecture: node " + std::to_string(n.id) + " has no inputs");
  if (depth() == 0) throw std::invalid_argument("architecture: output unreachable from inputs");
}

Architecture make_architecture(Task task, std::span<const NodeSpec> all_nodes,
                               std::vector<ArchEdge> edges, Provenance provenance) {
  std::sort(edges.begin(), edges.end(), [](const ArchEdge& a, const ArchEdge& b) {
    return a.to != b.to ? a.to < b.to : a.from < b.from;
  });
  int max_id = 0;
  int out_id = -1;
  for (const auto& n : all_nodes) {
    max_id = std::max(max_id, n.id);
    if (n.kind == NodeKind::Output) out_id = n.id;
  }
  if (out_id < 0) throw std::invalid_argument("make_architecture: no output node");
  std::vector<bool> live(static_cast<std::size_t>(max_id) + 1, false);
  live[out_id] = true;
  for (int j = max_id; j >= 0; --j) {
    if (!live[j]) continue;
    for (const auto& e : edges)
      if (e.to == j) live[e.from] = true;
  }
  Architecture a;
  a.task = task;
  a.provenance = std::move(provenance);
  for (const auto& n : all_nodes) {
    if (live[n.id])
      a.nodes.push_back(n);
    else
      a.dead_nodes.push_back(n.id);
  }
  for (auto& e : edges)
    if (live[e.to]) a.edges.push_back(e);
  return a;
}

ArchFormat arch_format_from_string(const std::string& s) {
  if (s == "json") return ArchFormat::Json;
  if (s == "dot") return ArchFormat::Dot;
  throw std::invalid_argument("unknown architecture format '" + s + "' (json or dot)");
}

namespace {

std::string weights_ref(const ArchEdge& e) {
  return "edge/" + std::to_string(e.from) + "-" + std::to_string(e.to) + "/" + to_string(e.op);
}

std::string node_label(const NodeSpec& n) {
  switch (n.kind) {
    case NodeKind::InputX: return "X";
    case NodeKind::InputXDup: return "X_dup";
    case NodeKind::InputYPhy: return "Y_phy";
    case NodeKind::InputConcat: return "concat(X, Y_phy)";
    case NodeKind::Hidden: return "hidden " + std::to_string(n.id);
    case NodeKind::Output: return "output";
  }
  return "?";
}

}  // namespace

std::string export_architecture(const Architecture& arch, ArchFormat format) {
  if (format == ArchFormat::Json) {
    json j;
    j["schema"] = "physicsnas.architecture";
    j["version"] = 1;
    j["task"] = to_string(arch.task);
    j["nodes"] = json::array();
    for (const auto& n : arch.nodes)
      j["nodes"].push_back({{"id", n.id}, {"kind", to_string(n.kind)}, {"width", n.width}});
    j["edges"] = json::array();
    for (const auto& e : arch.edges)
      j["edges"].push_back(
          {{"from", e.from}, {"to", e.to}, {"op", to_string(e.op)}, {"weights_ref", weights_ref(e)}});
    j["dead_nodes"] = arch.dead_nodes;
    j["provenance"] = {{"source", arch.provenance.source},
                       {"seed", arch.provenance.seed},
                       {"epoch", arch.provenance.epoch},
                       {"config", arch.provenance.config}};
    return j.dump(2) + "\n";
  }
  std::ostringstream os;
  os << "digraph architecture {\n  rankdir=LR;\n";
  for (const auto& n : arch.nodes) {
    const char* shape = is_input(n.kind) ? "box" : (n.kind == NodeKind::Output ? "doublecircle" : "ellipse");
    os << "  n" << n.id << " [label=\"" << node_label(n) << "\", shape=" << shape << "];\n";
  }
  for (const auto& e : arch.edges) {
    os << "  n" << e.from << " -> n" << e.to << " [label=\"" << to_string(e.op) << "\"";
    if (e.op == OpKind::Zero) os << ", style=dashed";
    if (e.op == OpKind::PhysicsForward) os << ", color=red";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

Architecture architecture_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("schema") != "physicsnas.architecture" || j.at("version") != 1)
    throw std::invalid_argument("architecture JSON: unsupported schema or version");
  Architecture a;
  a.task = task_from_string(j.at("task").get<std::string>());
  for (const auto& n : j.at("nodes"))
    a.nodes.push_back({n.at("id").get<int>(), node_kind_from_string(n.at("kind").get<std::string>()),
                       n.at("width").get<std::size_t>()});
  for (const auto& e : j.at("edges"))
    a.edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(),
                       op_kind_from_string(e.at("op").get<std::string>())});
  a.dead_nodes = j.at("dead_nodes").get<std::vector<int>>();
  const auto& p = j.at("provenance");
  a.provenance = {p.at("source").get<std::string>(), p.at("seed").get<std::uint64_t>(),
                  p.at("epoch").get<std::size_t>(), p.at("config").get<std::string>()};
  a.validate();
  return a;
}

// --- Operations -----------------------------------------------------------

std::optional<Tensor> apply_op(const CandidateOp& op, const Tensor& in, const TaskScaling& scaling) {
  switch (op.kind) {
    case OpKind::FCReLU: return relu(op.fc(in));
    case OpKind::FCLinear: return op.fc(in);
    case OpKind::Identity: return in;
    case OpKind::Zero: return std::nullopt;
    case OpKind::PhysicsForward: return physics_forward(in, op.fc, scaling);
  }
  return std::nullopt;
}

Tensor node_forward(std::span<const std::optional<Tensor>> contributions, std::size_t rows,
                    std::size_t width) {
  std::optional<Tensor> acc;
  for (const auto& c : contributions) {
    if (!c) continue;
    if (c->cols() != width || c->rows() != rows)
      throw DimensionError("node_forward: contribution " + shape_str(c->shape()) +
                           " does not match node width " + std::to_string(width));
    acc = acc ? add(*acc, *c) : *c;
  }
  return acc ? *acc : Tensor::zeros({rows, width});
}

// --- Supernet -------------------------------------------------------------

Supernet::Supernet(const TaskScaling& scaling, std::uint64_t seed, SupernetLayout layout,
                   bool edge_weights)
    : scaling_(scaling), layout_(std::move(layout)), edge_weights_(edge_weights) {
  const Task task = scaling_.task;
  int id = 0;
  for (auto kind : layout_.inputs) {
    if (!is_input(kind)) throw std::invalid_argument("Supernet: layout inputs must be input kinds");
    nodes_.push_back({id++, kind, input_node_width(kind, task)});
  }
  for (std::size_t h = 0; h < layout_.hidden_nodes; ++h)
    nodes_.push_back({id++, NodeKind::Hidden, layout_.hidden_width});
  nodes_.push_back({id++, NodeKind::Output, label_width(task)});

  incoming_.resize(nodes_.size());
  edge_alpha_.resize(nodes_.size());
  LayerFactory factory(seed);
  for (const auto& to : nodes_) {
    if (is_input(to.kind)) continue;
    const bool into_output = to.kind == NodeKind::Output;
    for (const auto& from : nodes_) {
      if (from.id >= to.id) break;
      EdgeSpec e;
      e.from = from.id;
      e.to = to.id;
      // Outputs are standardized regression targets; a ReLU there could only
      // predict values above the training mean.
      if (!into_output) e.ops.push_back({OpKind::FCReLU, factory.make(from.width, to.width)});
      e.ops.push_back({OpKind::FCLinear, factory.make(from.width, to.width)});
      if (from.width == to.width) e.ops.push_back({OpKind::Identity, {}});
      e.ops.push_back({OpKind::Zero, {}});
      if (into_output)
        e.ops.push_back({OpKind::PhysicsForward, factory.make(from.width, kPhysicalParams)});
      e.alpha = Tensor::zeros({e.ops.size()}, true);
      incoming_[to.id].push_back(edges_.size());
      edges_.push_back(std::move(e));
    }
    edge_alpha_[to.id] = Tensor::zeros({incoming_[to.id].size()}, true);
  }
}

std::vector<double> Supernet::op_probs(std::size_t edge) const {
  return softmax_values(edges_.at(edge).alpha.values());
}

std::vector<double> Supernet::edge_probs(int node) const {
  if (edge_weights_) return softmax_values(edge_alpha_.at(node).values());
  const auto& in = incoming_.at(node);
  std::vector<double> w(in.size());
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto p = op_probs(in[i]);
    total += w[i] = *std::max_element(p.begin(), p.end());
  }
  for (auto& v : w) v /= total;
  return w;
}

GateSample Supernet::sample_gates(Rng& rng) const {
  GateSample gs;
  for (const auto& n : nodes_) {
    if (is_input(n.kind)) continue;
    const auto& in = incoming_[n.id];
    const auto probs = edge_probs(n.id);
    const std::size_t k = std::min<std::size_t>(2, in.size());
    std::vector<bool> taken(in.size(), false);
    std::vector<std::size_t> picks;
    for (std::size_t d = 0; d < k; ++d) {
      const auto i = draw(rng, probs, taken);
      taken[i] = true;
      picks.push_back(i);
    }
    std::sort(picks.begin(), picks.end());
    GateSample::NodeGates g;
    g.node = n.id;
    for (auto pos : picks) {
      const std::size_t e = in[pos];
      const auto op_p = op_probs(e);
      const std::vector<bool> none(op_p.size(), false);
      const auto op = draw(rng, op_p, none);
      g.edges.push_back(e);
      g.ops.push_back(op);
      g.edge_probs.push_back(probs[pos]);
      g.op_probs.push_back(op_p[op]);
    }
    gs.nodes.push_back(std::move(g));
  }
  return gs;
}

std::vector<Tensor> Supernet::input_values(const Batch& batch) const {
  std::vector<Tensor> vals;
  for (const auto& n : nodes_)
    if (is_input(n.kind)) vals.push_back(input_value(n.kind, batch));
  return vals;
}

Tensor Supernet::mixed_op(std::size_t edge, const Tensor& in, std::size_t op, bool arch_grad) const {
  const auto& e = edges_.at(edge);
  const auto& cand = e.ops.at(op);
  if (cand.kind == OpKind::Identity && in.cols() != nodes_[e.to].width)
    throw DimensionError("mixed_op: identity across widths " + std::to_string(in.cols()) + " and " +
                         std::to_string(nodes_[e.to].width));
  auto out = apply_op(cand, in, scaling_);
  if (!out) return Tensor::zeros({in.rows(), nodes_[e.to].width});
  if (arch_grad) return scale_by(*out, straight_through(pick(softmax(e.alpha), op)));
  return *out;
}

Tensor Supernet::mixed_op_relaxed(std::size_t edge, const Tensor& in) const {
  const auto& e = edges_.at(edge);
  const auto p = op_probs(edge);
  std::vector<std::optional<Tensor>> parts;
  for (std::size_t k = 0; k < e.ops.size(); ++k)
    if (auto o = apply_op(e.ops[k], in, scaling_)) parts.push_back(scale(*o, p[k]));
  return node_forward(parts, in.rows(), nodes_[e.to].width);
}

Tensor Supernet::forward(const Batch& batch, const GateSample& gates, bool arch_grad) const {
  const std::size_t n = nodes_.size();
  const int out_id = nodes_.back().id;
  std::vector<bool> needed(n, false);
  needed[out_id] = true;
  for (auto it = gates.nodes.rbegin(); it != gates.nodes.rend(); ++it) {
    if (!needed[it->node]) continue;
    for (std::size_t a = 0; a < it->edges.size(); ++a)
      if (edges_[it->edges[a]].ops[it->ops[a]].kind != OpKind::Zero)
        needed[edges_[it->edges[a]].from] = true;
  }
  std::vector<std::optional<Tensor>> vals(n);
  {
    auto inputs = input_values(batch);
    for (std::size_t i = 0; i < inputs.size(); ++i) vals[i] = std::move(inputs[i]);
  }
  for (const auto& g : gates.nodes) {
    if (!needed[g.node]) continue;
    std::optional<Tensor> edge_softmax;
    if (arch_grad && edge_weights_) edge_softmax = softmax(edge_alpha_[g.node]);
    std::vector<std::optional<Tensor>> parts;
    for (std::size_t a = 0; a < g.edges.size(); ++a) {
      const auto& e = edges_[g.edges[a]];
      if (e.ops[g.ops[a]].kind == OpKind::Zero) continue;
      Tensor m = mixed_op(g.edges[a], *vals[e.from], g.ops[a], arch_grad);
      if (edge_softmax) {
        const auto& in = incoming_[g.node];
        const auto pos = static_cast<std::size_t>(
            std::find(in.begin(), in.end(), g.edges[a]) - in.begin());
        m = scale_by(m, straight_through(pick(*edge_softmax, pos)));
      }
      parts.push_back(std::move(m));
    }
    vals[g.node] = node_forward(parts, batch.rows, nodes_[g.node].width);
  }
  return *vals[out_id];
}

Tensor Supernet::forward_relaxed(const Batch& batch) const {
  std::vector<std::optional<Tensor>> vals(nodes_.size());
  {
    auto inputs = input_values(batch);
    for (std::size_t i = 0; i < inputs.size(); ++i) vals[i] = std::move(inputs[i]);
  }
  for (const auto& n : nodes_) {
    if (is_input(n.kind)) continue;
    const auto& in = incoming_[n.id];
    const auto pi = inclusion_probs(edge_probs(n.id), 2);
    std::vector<std::optional<Tensor>> parts;
    for (std::size_t i = 0; i < in.size(); ++i)
      parts.push_back(scale(mixed_op_relaxed(in[i], *vals[edges_[in[i]].from]), pi[i]));
    vals[n.id] = node_forward(parts, batch.rows, n.width);
  }
  return *vals[nodes_.back().id];
}

std::vector<Tensor> Supernet::weights() const {
  std::vector<Tensor> out;
  for (const auto& e : edges_)
    for (const auto& op : e.ops)
      if (has_layer(op.kind)) {
        out.push_back(op.fc.w);
        out.push_back(op.fc.b);
      }
  return out;
}

std::vector<Tensor> Supernet::alphas() const {
  std::vector<Tensor> out;
  for (const auto& e : edges_) out.push_back(e.alpha);
  if (edge_weights_)
    for (const auto& n : nodes_)
      if (!is_input(n.kind)) out.push_back(edge_alpha_[n.id]);
  return out;
}

void Supernet::set_weights_trainable(bool on) {
  for (auto& w : weights()) w.set_requires_grad(on);
}

void Supernet::set_alphas_trainable(bool on) {
  for (auto& a : alphas()) a.set_requires_grad(on);
}

Architecture Supernet::prune(Provenance provenance) const {
  std::vector<ArchEdge> kept;
  for (const auto& n : nodes_) {
    if (is_input(n.kind)) continue;
    const auto& in = incoming_[n.id];
    const auto probs = edge_probs(n.id);
    std::vector<std::size_t> order(in.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    const std::size_t k = std::min<std::size_t>(2, in.size());
    for (std::size_t r = 0; r < k; ++r) {
      const auto& e = edges_[in[order[r]]];
      const auto p = op_probs(in[order[r]]);
      std::size_t best = e.ops.size();
      for (std::size_t k = 0; k < e.ops.size(); ++k)
        if (e.ops[k].kind != OpKind::Zero && (best == e.ops.size() || p[k] > p[best])) best = k;
      kept.push_back({e.from, e.to, e.ops[best].kind});
    }
  }
  return make_architecture(task(), nodes_, std::move(kept), std::move(provenance));
}

Architecture Supernet::induced(const GateSample& gates) const {
  std::vector<ArchEdge> kept;
  for (const auto& g : gates.nodes)
    for (std::size_t a = 0; a < g.edges.size(); ++a) {
      const auto& e = edges_[g.edges[a]];
      kept.push_back({e.from, e.to, e.ops[g.ops[a]].kind});
    }
  return make_architecture(task(), nodes_, std::move(kept), {"gate-sample", 0, 0, ""});
}

// --- ArchModel ------------------------------------------------------------

ArchModel::ArchModel(Architecture arch, const TaskScaling& scaling, Check check)
    : arch_(std::move(arch)), scaling_(scaling) {
  if (arch_.task != scaling_.task)
    throw std::invalid_argument("ArchModel: architecture and scaling disagree on the task");
  if (check == Check::Validate) arch_.validate();
}

namespace {

// Nodes whose value can reach the output through non-Zero edges.
std::vector<int> active_nodes(const Architecture& a) {
  int out_id = -1, max_id = 0;
  for (const auto& n : a.nodes) {
    max_id = std::max(max_id, n.id);
    if (n.kind == NodeKind::Output) out_id = n.id;
  }
  std::vector<bool> act(static_cast<std::size_t>(max_id) + 1, false);
  act[out_id] = true;
  for (int j = max_id; j >= 0; --j) {
    if (!act[j]) continue;
    for (const auto& e : a.edges)
      if (e.to == j && e.op != OpKind::Zero) act[e.from] = true;
  }
  std::vector<int> ids;
  for (int j = 0; j <= max_id; ++j)
    if (act[j]) ids.push_back(j);
  return ids;
}

}  // namespace

ArchModel::ArchModel(const Architecture& arch, const TaskScaling& scaling, std::uint64_t seed)
    : ArchModel(Architecture(arch), scaling, Check::Validate) {
  LayerFactory factory(seed);
  for (int id : active_nodes(arch_)) {
    const auto& to = arch_.node(id);
    for (const auto& e : arch_.incoming(id)) {
      if (e.op == OpKind::Zero) continue;
      const auto& from = arch_.node(e.from);
      CandidateOp op{e.op, {}};
      if (e.op == OpKind::FCReLU || e.op == OpKind::FCLinear)
        op.fc = factory.make(from.width, to.width);
      else if (e.op == OpKind::PhysicsForward)
        op.fc = factory.make(from.width, kPhysicalParams);
      else if (from.width != to.width)
        throw DimensionError("ArchModel: identity edge across widths");
      edges_.push_back({e, std::move(op)});
    }
  }
}

ArchModel ArchModel::induced(const Supernet& net, const GateSample& gates) {
  // A sample may feed the output through Zero operations only; the
  // supernet then outputs zeros, and so does this network.
  ArchModel m(net.induced(gates), net.scaling(), Check::Skip);
  const auto act = active_nodes(m.arch_);
  for (int id : act) {
    if (is_input(m.arch_.node(id).kind)) continue;
    const auto& g = gates.for_node(id);
    for (std::size_t a = 0; a < g.edges.size(); ++a) {
      const auto& e = net.edges()[g.edges[a]];
      const auto& cand = e.ops[g.ops[a]];
      if (cand.kind == OpKind::Zero) continue;
      CandidateOp op{cand.kind, {}};
      if (has_layer(cand.kind)) op.fc = {cand.fc.w.clone_leaf(true), cand.fc.b.clone_leaf(true)};
      m.edges_.push_back({{e.from, e.to, cand.kind}, std::move(op)});
    }
  }
  return m;
}

Tensor ArchModel::forward(const Batch& batch) const {
  int max_id = 0;
  for (const auto& n : arch_.nodes) max_id = std::max(max_id, n.id);
  std::vector<std::optional<Tensor>> vals(static_cast<std::size_t>(max_id) + 1);
  for (const auto& n : arch_.nodes)
    if (is_input(n.kind)) vals[n.id] = input_value(n.kind, batch);
  int out_id = -1;
  std::size_t k = 0;
  for (int id : active_nodes(arch_)) {
    const auto& node = arch_.node(id);
    if (node.kind == NodeKind::Output) out_id = id;
    if (is_input(node.kind)) continue;
    std::vector<std::optional<Tensor>> parts;
    for (; k < edges_.size() && edges_[k].spec.to == id; ++k)
      parts.push_back(apply_op(edges_[k].op, *vals[edges_[k].spec.from], scaling_));
    vals[id] = node_forward(parts, batch.rows, node.width);
  }
  return *vals[out_id];
}

std::vector<Tensor> ArchModel::parameters() const {
  std::vector<Tensor> out;
  for (const auto& e : edges_)
    if (has_layer(e.op.kind)) {
      out.push_back(e.op.fc.w);
      out.push_back(e.op.fc.b);
    }
  return out;
}

}  // namespace physicsnas
