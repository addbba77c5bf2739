#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "msddp/approx.hpp"
#include "msddp/model.hpp"

namespace msddp {

struct ForwardSolution {
  Vec x, y, z;
  double objective = 0.0;
  double grid_error = 0.0;
};

struct BackwardSolution {
  Vec x, y, z;
  Vec lambda;
  double rho = 0.0;
  double saddle_value = 0.0;
  double grid_error = 0.0;
};

struct RootSolution {
  Vec x, y;
  double objective = 0.0;
};

/// Subproblem oracles of one node: (F) and (B) for non-root nodes, (R) for the
/// root. Implementations may keep a tie-breaking history, so calls on the
/// same oracle must not overlap.
class NodeOracle {
 public:
  virtual ~NodeOracle() = default;
  virtual ForwardSolution forward(ConstVecRef x_parent, const CostToGoModel& theta) = 0;
  virtual BackwardSolution backward(ConstVecRef x_parent, const CostToGoModel& theta) = 0;
  virtual RootSolution root(const CostToGoModel& theta) = 0;
};

using OraclePtr = std::shared_ptr<NodeOracle>;

struct GridOracleOptions {
  bool adversarial = false;
  /// Number of axis candidates per direction in the convex dual search.
  int dual_axis_candidates = 16;
  std::size_t max_grid_points = 10'000'000;
};

/// Brute-force oracle over the grids of the parent state space (z), the
/// internal set (y) and the node state space (x).
///
/// Ties within 1e-12 * max(1, |best|) go to the lexicographically smallest
/// (z, x) grid pair; in adversarial mode the forward and root oracles instead
/// pick, among tied x, the one farthest (Euclidean) from all x previously
/// returned by this oracle.
class GridOracle final : public NodeOracle {
 public:
  GridOracle(NodeData data, StateSpace parent_space, GridOracleOptions options = {});

  ForwardSolution forward(ConstVecRef x_parent, const CostToGoModel& theta) override;
  BackwardSolution backward(ConstVecRef x_parent, const CostToGoModel& theta) override;
  RootSolution root(const CostToGoModel& theta) override;

  const std::vector<Vec>& history() const { return history_; }

 private:
  struct Choice {
    std::size_t z = 0, x = 0, y = 0;
    double value = 0.0;
  };
  // min over (z, y, x) of f + <lambda, xp - z> + weight * psi(xp - z) + Theta(x)
  Choice minimize(ConstVecRef x_parent, const Vec& lambda, double weight, const std::vector<double>& theta,
                  bool adversarial);
  // r(z) = min over (y, x) of f(z, y, x) + Theta(x), with +inf for infeasible z.
  std::vector<double> reduced(const std::vector<double>& theta);
  double grid_error(const CostToGoModel& theta) const;
  void prepare_separable();

  NodeData data_;
  StateSpace parent_space_;
  GridOracleOptions options_;
  const PointSet* zs_;
  const PointSet* ys_;
  const PointSet* xs_;
  // separable parts: g(z) and min_y h(y, x) with its argmin
  std::vector<double> z_part_;
  std::vector<double> x_part_;
  std::vector<std::size_t> x_part_arg_;
  std::vector<Vec> history_;
  std::mutex mutex_;
};

/// Closed-form leaf oracle for the convex non-Lipschitz example
/// (f(z) = 1 - sqrt(1 - z^2) on [0, 1], l2 penalty).
class ConvexCapLeafOracle final : public NodeOracle {
 public:
  explicit ConvexCapLeafOracle(NodeData data);
  ForwardSolution forward(ConstVecRef x_parent, const CostToGoModel& theta) override;
  BackwardSolution backward(ConstVecRef x_parent, const CostToGoModel& theta) override;
  RootSolution root(const CostToGoModel& theta) override;

 private:
  NodeData data_;
};

/// Closed-form leaf oracle for the mixed-integer example (Q(z) = 0 at z = 0
/// and 1 on (0, 1], l1 penalty, fixed dual pair (0, l_rho)).
class IntegerCoverLeafOracle final : public NodeOracle {
 public:
  explicit IntegerCoverLeafOracle(NodeData data);
  ForwardSolution forward(ConstVecRef x_parent, const CostToGoModel& theta) override;
  BackwardSolution backward(ConstVecRef x_parent, const CostToGoModel& theta) override;
  RootSolution root(const CostToGoModel& theta) override;

 private:
  NodeData data_;
};

/// One oracle per tree node (indexed like ScenarioTree::nodes()).
struct OracleSet {
  std::vector<OraclePtr> nodes;
  bool adversarial = false;

  NodeOracle& at(int node) const { return *nodes.at(static_cast<std::size_t>(node)); }
};

/// Grid oracles for every node, using each state space's own grid. Throws
/// GridTooLarge when any node's enumeration exceeds the point budget.
OracleSet make_grid_oracles(const ScenarioTree& tree, GridOracleOptions options = {});

/// Grid oracles everywhere except leaves, which get the named analytic
/// oracle ("convex_cap" or "integer_cover"). Throws InvalidConfig otherwise.
OracleSet make_analytic_oracles(const ScenarioTree& tree, const std::string& name, GridOracleOptions options = {});

}  // namespace msddp
