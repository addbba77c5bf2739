#include <doctest.h>

#include <cmath>
#include <functional>

#include "msddp/error.hpp"
#include "msddp/instances.hpp"
#include "msddp/oracles.hpp"
#include "support/reference.hpp"

using namespace msddp;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

const UnderApprox& zero_theta() {
  static const UnderApprox theta(0, {});
  return theta;
}

int leaf_of(const Instance& inst) { return inst.tree->stage_nodes(1).front(); }

NodeData linear_leaf(double slope, double l_lambda) {
  NodeData d;
  d.cost = make_cost("linear", {{"z", {slope}}});
  d.state_space = StateSpace::none();
  d.penalty = {NormKind::L1, l_lambda};
  d.dual_bounds = {l_lambda, 0.0};
  d.convex = true;
  return d;
}

}  // namespace

TEST_SUITE("grid oracle") {
  TEST_CASE("convex example forward values") {
    const Instance inst = example_convex_nonlipschitz(1e-3, 4.0 / 3.0);
    const int leaf = leaf_of(inst);
    GridOracle oracle(inst.tree->node(leaf).data, inst.tree->parent_space(leaf));
    const ForwardSolution at0 = oracle.forward(Vec{0.0}, zero_theta());
    CHECK(at0.z[0] == doctest::Approx(0.0));
    CHECK(at0.objective == doctest::Approx(0.0));
    const ForwardSolution at1 = oracle.forward(Vec{1.0}, zero_theta());
    CHECK(at1.objective == doctest::Approx(2.0 / 3.0).epsilon(2e-3));
    CHECK(at1.z[0] == doctest::Approx(0.8).epsilon(5e-3));
    CHECK(at1.grid_error > 0.0);
  }

  TEST_CASE("grid and closed-form oracles agree on the convex example") {
    const Instance inst = example_convex_nonlipschitz(1e-3, 4.0 / 3.0);
    const int leaf = leaf_of(inst);
    const NodeData& data = inst.tree->node(leaf).data;
    GridOracle grid(data, inst.tree->parent_space(leaf));
    ConvexCapLeafOracle closed(data);
    for (double xp : {0.0, 0.2, 0.5, 0.8, 0.9, 1.0}) {
      const double g = grid.forward(Vec{xp}, zero_theta()).objective;
      const double c = closed.forward(Vec{xp}, zero_theta()).objective;
      CHECK(g == doctest::Approx(c).epsilon(2e-3));
      CHECK(c == doctest::Approx(ref::cap_regularized(xp, 4.0 / 3.0)).epsilon(1e-6));
      CHECK(closed.backward(Vec{xp}, zero_theta()).saddle_value <= c + 1e-9);
    }
    GridOracle root(inst.tree->node(0).data, inst.tree->parent_space(0));
    const RootSolution r = root.root(UnderApprox(1, {}));
    CHECK(r.x[0] == 0.0);
    CHECK(r.objective == 0.0);
  }

  TEST_CASE("mixed-integer example: root argmin and backward step at x = 1") {
    const Instance inst = example_milp_discontinuous(1e-3, 5.0);
    GridOracle root(inst.tree->node(0).data, inst.tree->parent_space(0));
    const RootSolution r = root.root(UnderApprox(1, {}));
    CHECK(r.x[0] == 1.0);
    CHECK(r.objective == doctest::Approx(0.0));  // 1 - 2x + shift

    const int leaf = leaf_of(inst);
    const NodeData& data = inst.tree->node(leaf).data;
    GridOracle grid(data, inst.tree->parent_space(leaf));
    const BackwardSolution b = grid.backward(Vec{1.0}, zero_theta());
    CHECK(b.lambda[0] == 0.0);
    CHECK(b.rho == data.dual_bounds.l_rho);
    CHECK(b.z[0] == 1.0);
    CHECK(b.saddle_value == doctest::Approx(ref::cover_value(1.0)));

    IntegerCoverLeafOracle closed(data);
    for (double xp : {0.0, 0.1, 0.2, 0.5, 1.0}) {
      CHECK(closed.backward(Vec{xp}, zero_theta()).saddle_value ==
            doctest::Approx(ref::cover_regularized(xp, 5.0)));
      CHECK(grid.backward(Vec{xp}, zero_theta()).saddle_value ==
            doctest::Approx(ref::cover_regularized(xp, 5.0)).epsilon(1e-9));
    }
  }

  TEST_CASE("nonconvex dual pair and inner minimum") {
    const Instance inst = example_milp_discontinuous(0.05, 2.0);
    const int leaf = leaf_of(inst);
    const NodeData& data = inst.tree->node(leaf).data;
    GridOracle grid(data, inst.tree->parent_space(leaf));
    const PointSet& zs = inst.tree->parent_space(leaf).grid();
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const BackwardSolution b = grid.backward(zs[i], zero_theta());
      double inner = ref::kInf;
      for (std::size_t j = 0; j < zs.size(); ++j) {
        for (double y : {0.0, 1.0}) {
          if (auto f = data.cost->eval(zs[j], Vec{y}, Vec{})) {
            inner = std::min(inner, *f + data.dual_bounds.l_rho * std::abs(zs[i][0] - zs[j][0]));
          }
        }
      }
      CHECK(b.rho == data.dual_bounds.l_rho);
      CHECK(b.lambda[0] == 0.0);
      CHECK(b.saddle_value == doctest::Approx(inner).epsilon(1e-12));
    }
  }

  TEST_CASE("convex dual search recovers the slope of a linear value function") {
    // Q(z) = 2z on [0, 1]; the cut at 0.5 has lambda = +2 under C(x) = v - <lambda, xhat - x>.
    GridOracle oracle(linear_leaf(2.0, 3.0), StateSpace::box({0.0}, {1.0}, 0.01));
    const BackwardSolution b = oracle.backward(Vec{0.5}, zero_theta());
    CHECK(b.saddle_value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b.lambda[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(b.rho == 0.0);
    for (double x : {0.0, 0.25, 1.0}) {
      CHECK(b.saddle_value - b.lambda[0] * (0.5 - x) == doctest::Approx(2.0 * x).epsilon(1e-9));
    }
  }

  TEST_CASE("cut validity and tightness against the exact tables") {
    for (int branching : {1, 2}) {
      const Instance inst = finite_state_instance(3, 4, 17, branching);
      const ScenarioTree& tree = *inst.tree;
      const ValueTable table = brute_force_value_functions(tree);
      for (std::size_t n = 0; n < tree.nodes().size(); ++n) {
        const int node = static_cast<int>(n);
        if (node == tree.root()) continue;
        const NodeData& data = tree.node(node).data;
        const PointSet& own = data.state_space.grid();
        const PointSet& parent = tree.parent_space(node).grid();
        TableCostToGo theta(own, table.nodes[n].EQ);
        GridOracle oracle(data, tree.parent_space(node));
        for (std::size_t i = 0; i < parent.size(); ++i) {
          const BackwardSolution b = oracle.backward(parent[i], theta);
          CHECK(b.rho <= data.dual_bounds.l_rho + 1e-9);
          CHECK(b.saddle_value >= table.nodes[n].QR[i] - 1e-9);
          for (std::size_t j = 0; j < parent.size(); ++j) {
            const double c = b.saddle_value - dot(b.lambda, Vec{parent[i][0] - parent[j][0]}) -
                             b.rho * penalty_eval(data.penalty, Vec{parent[i][0] - parent[j][0]});
            CHECK(c <= table.nodes[n].Q[j] + 1e-9);
          }
        }
      }
    }
  }

  TEST_CASE("convex tightness on the convex example") {
    const Instance inst = example_convex_nonlipschitz(0.01, 4.0 / 3.0);
    const int leaf = leaf_of(inst);
    const ValueTable table = brute_force_value_functions(*inst.tree);
    const NodeData& data = inst.tree->node(leaf).data;
    GridOracle oracle(data, inst.tree->parent_space(leaf));
    const PointSet& parent = inst.tree->parent_space(leaf).grid();
    for (std::size_t i = 0; i < parent.size(); i += 5) {
      const BackwardSolution b = oracle.backward(parent[i], zero_theta());
      CHECK(b.rho == 0.0);
      CHECK(std::abs(b.lambda[0]) <= data.dual_bounds.l_lambda + 1e-9);
      CHECK(b.saddle_value >= table.nodes[leaf].QR[i] - 1e-6 * (1.0 + table.nodes[leaf].QR[i]));
      for (std::size_t j = 0; j < parent.size(); ++j) {
        const double c = b.saddle_value - b.lambda[0] * (parent[i][0] - parent[j][0]);
        CHECK(c <= table.nodes[leaf].Q[j] + 1e-9);
      }
    }
  }

  TEST_CASE("root ties go to the smallest grid point") {
    const Instance inst = example_milp_discontinuous(0.01, 5.0);
    GridOracle root(inst.tree->node(0).data, inst.tree->parent_space(0));
    // Theta(x) = 2x cancels the root's -2x slope.
    UnderApprox theta(1, {{1.0, {2.0, 0.0}, {NormKind::L1, 0.0}}});
    ConjugacyCut c;
    c.anchor = {0.0};
    c.lambda = {2.0};
    c.norm = NormKind::L1;
    theta.add_bundle({c});
    const RootSolution r = root.root(theta);
    CHECK(r.x[0] == 0.0);
    CHECK(r.objective == doctest::Approx(2.0));
  }

  TEST_CASE("adversarial ties pick the farthest point") {
    NodeData d;
    d.cost = make_cost("constant", {{"value", 1.0}});
    d.state_space = StateSpace::box({-1.0}, {1.0}, 0.25);
    d.penalty = {NormKind::L2, 1.0};
    d.dual_bounds = {0.0, 1.0};
    const StateSpace parent = StateSpace::box({-1.0}, {1.0}, 0.25);
    UnderApprox theta(1, {});

    GridOracle plain(d, parent);
    CHECK(plain.forward(Vec{0.0}, theta).x[0] == -1.0);
    CHECK(plain.forward(Vec{0.0}, theta).x[0] == -1.0);

    GridOracle adv(d, parent, {.adversarial = true});
    const Vec first = adv.forward(Vec{0.0}, theta).x;
    const Vec second = adv.forward(Vec{0.0}, theta).x;
    CHECK(first[0] == -1.0);
    CHECK(distance(NormKind::L2, first, second) >= d.state_space.diameter() / 2.0);
    CHECK(adv.history().size() == 2);
  }

  TEST_CASE("deterministic results") {
    const Instance inst = finite_state_instance(2, 5, 3, 2);
    const ScenarioTree& tree = *inst.tree;
    const int node = tree.stage_nodes(2).back();
    GridOracle a(tree.node(node).data, tree.parent_space(node));
    GridOracle b(tree.node(node).data, tree.parent_space(node));
    for (double xp : {0.0, 2.0, 4.0}) {
      const auto fa = a.forward(Vec{xp}, zero_theta());
      const auto fb = b.forward(Vec{xp}, zero_theta());
      CHECK(fa.objective == fb.objective);
      CHECK(fa.z == fb.z);
      const auto ba = a.backward(Vec{xp}, zero_theta());
      const auto bb = b.backward(Vec{xp}, zero_theta());
      CHECK(ba.saddle_value == bb.saddle_value);
      CHECK(ba.lambda == bb.lambda);
    }
  }

  TEST_CASE("errors") {
    NodeData d;
    d.cost = make_cost("table", {{"z", {{0.0}}}, {"x", {{0.0}}}, {"values", Json::array({Json::array({nullptr})})}});
    d.state_space = StateSpace::finite({{0.0}});
    d.penalty = {NormKind::L1, 1.0};
    d.dual_bounds = {0.0, 1.0};
    GridOracle oracle(d, StateSpace::finite({{0.0}}));
    UnderApprox theta(1, {});
    CHECK(code_of([&] { oracle.forward(Vec{0.0}, theta); }) == ErrorCode::InfeasibleNode);
    CHECK(code_of([&] { oracle.backward(Vec{0.0}, theta); }) == ErrorCode::InfeasibleNode);

    NodeData big = d;
    big.cost = make_cost("zero", Json::object());
    big.state_space = StateSpace::box({0.0, 0.0}, {1.0, 1.0}, 1e-4);
    CHECK(code_of([&] { GridOracle(big, StateSpace::finite({{0.0}})); }) == ErrorCode::GridTooLarge);

    const Instance inst = example_convex_nonlipschitz(1e-3);
    CHECK(code_of([&] { make_grid_oracles(*inst.tree, {.max_grid_points = 1000}); }) == ErrorCode::GridTooLarge);
    CHECK(code_of([&] { make_analytic_oracles(*inst.tree, "nope"); }) == ErrorCode::InvalidConfig);
    CHECK(make_analytic_oracles(*inst.tree, "convex_cap").nodes.size() == 2);
  }
}
