#pragma once

// The searchable DAG. Input nodes carry the raw inputs and the prior's
// answer; hidden nodes and the output node receive one mixed-operator edge
// from every earlier node. Each edge owns per-operation logits, each
// receiving node owns per-edge logits, and training evaluates a sampled
// sub-network: two incoming edges per node and one operation per edge.

#include "physicsnas/dataset.hpp"
#include "physicsnas/nn.hpp"
#include "physicsnas/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace physicsnas {

enum class NodeKind { InputX, InputXDup, InputYPhy, InputConcat, Hidden, Output };
enum class OpKind { FCReLU, FCLinear, Identity, Zero, PhysicsForward };

std::string to_string(NodeKind k);
std::string to_string(OpKind k);
NodeKind node_kind_from_string(const std::string& s);
OpKind op_kind_from_string(const std::string& s);
bool is_input(NodeKind k);

struct NodeSpec {
  int id = 0;
  NodeKind kind = NodeKind::Hidden;
  std::size_t width = 0;

  bool operator==(const NodeSpec&) const = default;
};

struct CandidateOp {
  OpKind kind = OpKind::Zero;
  Linear fc;  // FC kinds: the layer; PhysicsForward: the parameter head
};

struct EdgeSpec {
  int from = 0;
  int to = 0;
  std::vector<CandidateOp> ops;
  Tensor alpha;  // per-operation logits
};

struct SupernetLayout {
  std::vector<NodeKind> inputs{NodeKind::InputX, NodeKind::InputXDup, NodeKind::InputYPhy,
                               NodeKind::InputConcat};
  std::size_t hidden_nodes = 5;
  std::size_t hidden_width = kHiddenWidth;
};

// Active sub-network for one step.
struct GateSample {
  struct NodeGates {
    int node = 0;
    std::vector<std::size_t> edges;      // global edge indices, ascending
    std::vector<std::size_t> ops;        // chosen op per active edge
    std::vector<double> edge_probs;      // selection probability of each active edge
    std::vector<double> op_probs;        // probability of each chosen op
  };
  std::vector<NodeGates> nodes;  // one per hidden/output node, in id order

  const NodeGates& for_node(int node) const;
};

struct ArchEdge {
  int from = 0;
  int to = 0;
  OpKind op = OpKind::Zero;

  bool operator==(const ArchEdge&) const = default;
};

struct Provenance {
  std::string source;  // "search", "gate-sample", "hand-built", ...
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string config;  // JSON text of the producing configuration

  bool operator==(const Provenance&) const = default;
};

// A pruned DAG. `nodes` lists live nodes only (those with a path to the
// output through non-Zero edges, plus the output); nodes pruned away are
// listed in `dead_nodes`.
struct Architecture {
  Task task = Task::Toss;
  std::vector<NodeSpec> nodes;
  std::vector<ArchEdge> edges;  // sorted by (to, from)
  std::vector<int> dead_nodes;
  Provenance provenance;

  bool operator==(const Architecture&) const = default;

  std::vector<ArchEdge> incoming(int node) const;
  const NodeSpec& node(int id) const;
  bool uses_op(OpKind op) const;
  // Longest input-to-output path, counted in non-Zero edges.
  std::size_t depth() const;
  // Throws std::invalid_argument when malformed.
  void validate() const;
};

// Marks liveness and fills `nodes`/`dead_nodes` from the full node list.
Architecture make_architecture(Task task, std::span<const NodeSpec> all_nodes,
                               std::vector<ArchEdge> edges, Provenance provenance);

enum class ArchFormat { Json, Dot };
std::string export_architecture(const Architecture& arch, ArchFormat format);
ArchFormat arch_format_from_string(const std::string& s);
Architecture architecture_from_json(const std::string& text);

// Evaluates one candidate operation; Zero yields no tensor.
std::optional<Tensor> apply_op(const CandidateOp& op, const Tensor& in, const TaskScaling& scaling);

// Sum of the contributions reaching a node; zeros when none do.
Tensor node_forward(std::span<const std::optional<Tensor>> contributions, std::size_t rows,
                    std::size_t width);

class Supernet {
 public:
  Supernet(const TaskScaling& scaling, std::uint64_t seed, SupernetLayout layout = {},
           bool edge_weights = true);

  Task task() const { return scaling_.task; }
  const TaskScaling& scaling() const { return scaling_; }
  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const std::vector<EdgeSpec>& edges() const { return edges_; }
  const std::vector<std::size_t>& incoming(int node) const { return incoming_.at(node); }
  bool edge_weights() const { return edge_weights_; }
  const SupernetLayout& layout() const { return layout_; }

  // Logits over a node's incoming edges (edge-weight mode).
  const Tensor& edge_alpha(int node) const { return edge_alpha_.at(node); }

  std::vector<double> op_probs(std::size_t edge) const;
  // Selection distribution over a node's incoming edges: softmax of the edge
  // logits, or with edge weights disabled the normalised maximum operation
  // probability of each edge.
  std::vector<double> edge_probs(int node) const;

  GateSample sample_gates(Rng& rng) const;

  // Forward through the sampled sub-network. With arch_grad the gates are
  // straight-through estimators of their probabilities, so the result is
  // differentiable in the logits; the value is the same either way.
  Tensor forward(const Batch& batch, const GateSample& gates, bool arch_grad = false) const;
  // Probability-weighted forward over every edge and operation (monitoring
  // and tests; no gradient to the logits).
  Tensor forward_relaxed(const Batch& batch) const;

  // Hard mixed operator on one edge.
  Tensor mixed_op(std::size_t edge, const Tensor& in, std::size_t op, bool arch_grad) const;
  // Expectation of the mixed operator under its operation distribution.
  Tensor mixed_op_relaxed(std::size_t edge, const Tensor& in) const;

  std::vector<Tensor> weights() const;
  std::vector<Tensor> alphas() const;
  void set_weights_trainable(bool on);
  void set_alphas_trainable(bool on);

  // Top two incoming edges per node by edge probability (ties to the lower
  // index), then the most probable non-Zero operation on each.
  Architecture prune(Provenance provenance = {}) const;
  // Sub-network selected by a gate sample, as an architecture.
  Architecture induced(const GateSample& gates) const;

 private:
  std::vector<Tensor> input_values(const Batch& batch) const;

  TaskScaling scaling_;
  SupernetLayout layout_;
  bool edge_weights_;
  std::vector<NodeSpec> nodes_;
  std::vector<EdgeSpec> edges_;
  std::vector<std::vector<std::size_t>> incoming_;
  std::vector<Tensor> edge_alpha_;  // indexed by node id; empty for inputs
};

// Plain network for a fixed architecture. Layers are created in node order,
// then in edge order within a node, so layouts that mirror a baseline get
// the baseline's initial weights from the same seed.
class ArchModel final : public Model {
 public:
  ArchModel(const Architecture& arch, const TaskScaling& scaling, std::uint64_t seed);
  // Weights copied from the supernet's operations on the sampled edges.
  static ArchModel induced(const Supernet& net, const GateSample& gates);

  std::string name() const override { return "physicsnas"; }
  Tensor forward(const Batch& batch) const override;
  std::vector<Tensor> parameters() const override;
  const Architecture& architecture() const { return arch_; }

 private:
  struct Edge {
    ArchEdge spec;
    CandidateOp op;
  };
  enum class Check { Validate, Skip };
  ArchModel(Architecture arch, const TaskScaling& scaling, Check check);

  Architecture arch_;
  TaskScaling scaling_;
  std::vector<Edge> edges_;  // live, non-Zero edges sorted by (to, from)
};

}  // namespace physicsnas
