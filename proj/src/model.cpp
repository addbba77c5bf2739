#include "msddp/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "msddp/error.hpp"

namespace msddp {

double penalty_eval(const PenaltySpec& spec, ConstVecRef v) { return norm(spec.norm, v); }

double penalty_eval(const PenaltySpec& spec, ConstVecRef v, std::size_t dim) {
  if (v.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "penalty argument has dimension " + std::to_string(v.size()) + ", expected " + std::to_string(dim));
  }
  return penalty_eval(spec, v);
}

bool same_data(const NodeData& a, const NodeData& b) {
  const bool cost_equal = (a.cost == b.cost) || (a.cost && b.cost && same_cost(*a.cost, *b.cost));
  return cost_equal && a.state_space == b.state_space && a.internal == b.internal &&
         a.penalty.norm == b.penalty.norm && a.penalty.sigma == b.penalty.sigma &&
         a.dual_bounds.l_lambda == b.dual_bounds.l_lambda && a.dual_bounds.l_rho == b.dual_bounds.l_rho &&
         a.convex == b.convex;
}

bool dual_bounds_consistent(const NodeData& data) {
  if (data.convex) return data.dual_bounds.l_lambda >= data.penalty.sigma && data.dual_bounds.l_rho == 0.0;
  return data.dual_bounds.l_rho >= data.penalty.sigma;
}

const StateSpace& ScenarioTree::parent_space(int i) const {
  const TreeNode& n = node(i);
  return n.parent < 0 ? root_parent_ : node(n.parent).data.state_space;
}

int ScenarioTree::find(const std::string& id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

namespace {

constexpr double kProbTol = 1e-12;
constexpr std::size_t kCostCheckBudget = 20000;
constexpr std::size_t kCostCheckGridLimit = 2000000;

// Evaluates the cost on an evenly strided subset of parent-grid x internal x
// own-grid combinations and rejects negative finite values.
bool checkable(const TreeNode& node, const StateSpace& parent_space) {
  return parent_space.grid_size_estimate() <= kCostCheckGridLimit &&
         node.data.state_space.grid_size_estimate() <= kCostCheckGridLimit &&
         node.data.internal.grid_size_estimate() <= kCostCheckGridLimit;
}

const void* grid_key(const StateSpace& space) {
  return space.kind() == SetKind::None ? nullptr : &space.grid();
}

void check_nonnegative(const TreeNode& node, const StateSpace& parent_space) {
  const StateSpace& own = node.data.state_space;
  const StateSpace& internal = node.data.internal;
  const PointSet& zs = parent_space.grid();
  const PointSet& ys = internal.grid();
  const PointSet& xs = own.grid();
  const std::size_t total = zs.size() * ys.size() * xs.size();
  const std::size_t stride = std::max<std::size_t>(1, total / kCostCheckBudget);
  for (std::size_t k = 0; k < total; k += stride) {
    const std::size_t ix = k % xs.size();
    const std::size_t iy = (k / xs.size()) % ys.size();
    const std::size_t iz = k / (xs.size() * ys.size());
    const auto v = node.data.cost->eval(zs[iz], ys[iy], xs[ix]);
    if (v && (*v < 0.0 || std::isnan(*v))) {
      throw Error(ErrorCode::NegativeCost, "node '" + node.id + "' has cost " + std::to_string(*v) + " < 0");
    }
  }
}

}  // namespace

ScenarioTree build_tree(const std::vector<NodeSpec>& specs) {
  if (specs.empty()) throw Error(ErrorCode::BadTree, "tree has no nodes");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].id.empty()) throw Error(ErrorCode::BadTree, "node with empty id");
    if (!index.emplace(specs[i].id, i).second) {
      throw Error(ErrorCode::DuplicateNodeId, "node id '" + specs[i].id + "' appears twice");
    }
    if (!specs[i].data.cost) throw Error(ErrorCode::BadTree, "node '" + specs[i].id + "' has no cost");
  }
  std::vector<int> roots;
  std::vector<std::vector<std::size_t>> children(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].parent.empty()) {
      roots.push_back(static_cast<int>(i));
      continue;
    }
    const auto it = index.find(specs[i].parent);
    if (it == index.end()) {
      throw Error(ErrorCode::OrphanNode, "node '" + specs[i].id + "' has unknown parent '" + specs[i].parent + "'");
    }
    if (!(specs[i].prob > 0.0) || specs[i].prob > 1.0 + kProbTol) {
      throw Error(ErrorCode::BadProbability, "node '" + specs[i].id + "' has transition probability outside (0, 1]");
    }
    children[it->second].push_back(i);
  }
  if (roots.size() != 1) throw Error(ErrorCode::BadTree, "tree must have exactly one root");

  ScenarioTree tree;
  std::vector<int> new_index(specs.size(), -1);
  std::vector<std::size_t> level{static_cast<std::size_t>(roots.front())};
  int stage = 0;
  while (!level.empty()) {
    std::sort(level.begin(), level.end());
    tree.stages_.emplace_back();
    std::vector<std::size_t> next;
    for (std::size_t old : level) {
      const int idx = static_cast<int>(tree.nodes_.size());
      new_index[old] = idx;
      TreeNode node;
      node.id = specs[old].id;
      node.stage = stage;
      node.eq_class = specs[old].eq_class.empty() ? specs[old].id : specs[old].eq_class;
      node.data = specs[old].data;
      if (!specs[old].parent.empty()) {
        node.parent = new_index[index.at(specs[old].parent)];
        node.cond_prob = specs[old].prob;
        node.prob = tree.nodes_[static_cast<std::size_t>(node.parent)].prob * node.cond_prob;
        tree.nodes_[static_cast<std::size_t>(node.parent)].children.push_back(idx);
      }
      tree.nodes_.push_back(std::move(node));
      tree.stages_.back().push_back(idx);
      next.insert(next.end(), children[old].begin(), children[old].end());
    }
    level = std::move(next);
    ++stage;
  }
  if (tree.nodes_.size() != specs.size()) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (new_index[i] < 0) throw Error(ErrorCode::OrphanNode, "node '" + specs[i].id + "' is not reachable from the root");
    }
  }
  tree.horizon_ = static_cast<int>(tree.stages_.size()) - 1;

  for (const TreeNode& node : tree.nodes_) {
    if (node.is_leaf()) {
      if (node.stage != tree.horizon_) {
        throw Error(ErrorCode::BadTree, "leaf '" + node.id + "' is not in the last stage");
      }
      continue;
    }
    double total = 0.0;
    for (int c : node.children) total += tree.nodes_[static_cast<std::size_t>(c)].cond_prob;
    if (std::abs(total - 1.0) > kProbTol) {
      throw Error(ErrorCode::BadProbability,
                  "children of '" + node.id + "' have probabilities summing to " + std::to_string(total));
    }
  }
  // Nodes sharing a cost object and grids need only one check.
  std::set<std::array<const void*, 4>> checked;
  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    const TreeNode& node = tree.nodes_[i];
    const StateSpace& parent_space = tree.parent_space(static_cast<int>(i));
    if (!checkable(node, parent_space)) continue;
    const std::array<const void*, 4> key{node.data.cost.get(), grid_key(parent_space), grid_key(node.data.internal),
                                         grid_key(node.data.state_space)};
    if (checked.insert(key).second) check_nonnegative(node, parent_space);
  }
  return tree;
}

RecombiningTree recombine(std::shared_ptr<const ScenarioTree> tree) {
  RecombiningTree out;
  out.tree = tree;
  const int horizon = tree->horizon();
  out.stages.resize(static_cast<std::size_t>(horizon) + 1);
  out.stages[0].push_back({tree->root(), 1.0, tree->node(tree->root()).eq_class});

  for (int t = 1; t <= horizon; ++t) {
    // Class representatives in order of first appearance.
    std::map<std::string, int> representative;
    std::vector<std::string> order;
    for (int n : tree->stage_nodes(t)) {
      const TreeNode& node = tree->node(n);
      const auto [it, inserted] = representative.emplace(node.eq_class, n);
      if (inserted) {
        order.push_back(node.eq_class);
      } else if (!same_data(tree->node(it->second).data, node.data)) {
        throw Error(ErrorCode::NotStagewiseIndependent,
                    "nodes '" + tree->node(it->second).id + "' and '" + node.id + "' share class '" + node.eq_class +
                        "' but carry different data");
      }
    }
    // Every parent must see the same classes with the same probabilities.
    std::map<std::string, double> reference;
    bool first = true;
    for (int parent : tree->stage_nodes(t - 1)) {
      std::map<std::string, double> seen;
      for (int c : tree->node(parent).children) seen[tree->node(c).eq_class] += tree->node(c).cond_prob;
      if (first) {
        reference = seen;
        first = false;
        continue;
      }
      bool same = seen.size() == reference.size();
      for (auto it = seen.begin(), jt = reference.begin(); same && it != seen.end(); ++it, ++jt) {
        same = it->first == jt->first && std::abs(it->second - jt->second) <= kProbTol;
      }
      if (!same) {
        throw Error(ErrorCode::NotStagewiseIndependent,
                    "stage " + std::to_string(t - 1) + " nodes have different child distributions");
      }
    }
    for (const auto& cls : order) {
      out.stages[static_cast<std::size_t>(t)].push_back({representative.at(cls), reference.at(cls), cls});
    }
  }
  return out;
}

}  // namespace msddp
