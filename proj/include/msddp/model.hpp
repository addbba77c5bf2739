#pragma once

#include <memory>
#include <string>
#include <vector>

#include "msddp/cost.hpp"
#include "msddp/geometry.hpp"

namespace msddp {

struct PenaltySpec {
  NormKind norm = NormKind::L2;
  double sigma = 1.0;
};

/// psi(v) for the chosen norm (sigma is not applied).
double penalty_eval(const PenaltySpec& spec, ConstVecRef v);
/// Same, rejecting vectors whose dimension differs from `dim`.
double penalty_eval(const PenaltySpec& spec, ConstVecRef v, std::size_t dim);

struct DualBounds {
  double l_lambda = 0.0;
  double l_rho = 0.0;
};

/// Per-node problem data. The feasible set is {(x, y) : x in state_space,
/// y in internal, cost finite}; the copy variable z ranges over the parent's
/// state space.
struct NodeData {
  CostPtr cost;
  StateSpace state_space = StateSpace::none();
  StateSpace internal = StateSpace::none();
  PenaltySpec penalty;
  DualBounds dual_bounds;
  bool convex = false;
};

bool same_data(const NodeData& a, const NodeData& b);

/// Validation of the dual-bound rule: convex nodes need l_lambda >= sigma and
/// l_rho = 0, other nodes need l_rho >= sigma.
bool dual_bounds_consistent(const NodeData& data);

/// One node of an instance description, before validation.
struct NodeSpec {
  std::string id;
  std::string parent;  // empty for the root
  double prob = 1.0;   // transition probability p_{a(n) n}; ignored for the root
  std::string eq_class;  // equivalence class for recombination; defaults to id
  NodeData data;
};

struct TreeNode {
  std::string id;
  int parent = -1;
  std::vector<int> children;
  int stage = 0;
  double prob = 1.0;       // p_n
  double cond_prob = 1.0;  // p_{a(n) n}
  std::string eq_class;
  NodeData data;

  bool is_leaf() const { return children.empty(); }
};

class ScenarioTree {
 public:
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  int root() const { return 0; }
  int horizon() const { return horizon_; }
  const std::vector<int>& stage_nodes(int t) const { return stages_.at(static_cast<std::size_t>(t)); }
  /// State space of the parent of node i (the zero-dimensional point for the root).
  const StateSpace& parent_space(int i) const;
  int find(const std::string& id) const;

 private:
  friend ScenarioTree build_tree(const std::vector<NodeSpec>& specs);
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<int>> stages_;
  int horizon_ = 0;
  StateSpace root_parent_ = StateSpace::none();
};

/// Validates and links a node list. Nodes are reordered breadth-first by
/// stage while keeping input order within a stage; node 0 is the root.
/// Throws DuplicateNodeId, OrphanNode, BadProbability, NegativeCost, BadTree.
ScenarioTree build_tree(const std::vector<NodeSpec>& specs);

struct StageTemplate {
  int node = 0;       // representative node in the underlying tree
  double prob = 1.0;  // p_{t-1, m}
  std::string eq_class;
};

/// Stagewise-independent view: stage t holds the distinct templates N~(t).
/// Stage 0 holds only the root.
struct RecombiningTree {
  std::shared_ptr<const ScenarioTree> tree;
  std::vector<std::vector<StageTemplate>> stages;

  int horizon() const { return static_cast<int>(stages.size()) - 1; }
  const std::vector<StageTemplate>& templates(int t) const { return stages.at(static_cast<std::size_t>(t)); }
};

/// Collapses declared-equivalent nodes. Throws NotStagewiseIndependent.
RecombiningTree recombine(std::shared_ptr<const ScenarioTree> tree);

}  // namespace msddp
