#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "msddp/algorithms.hpp"
#include "msddp/approx.hpp"
#include "msddp/error.hpp"
#include "msddp/instance_io.hpp"
#include "msddp/instances.hpp"
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

int leaf_of(const Instance& inst) { return inst.tree->stage_nodes(1).front(); }

// Lower bound on conv_{k != l}{v_k + L |x - w_k|} at w_l for anchors on the
// sphere of radius R: |w_l - c| >= <w_l / R, w_l - c> and the inner product is
// affine in the convex combination c.
double hull_lower_bound(const std::vector<Vec>& w, const Vec& v, double L, double R, std::size_t l) {
  double min_v = ref::kInf, min_proj = ref::kInf;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (k == l) continue;
    min_v = std::min(min_v, v[k]);
    Vec diff(w[l].size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = w[l][i] - w[k][i];
    min_proj = std::min(min_proj, dot(w[l], diff) / R);
  }
  return min_v + L * min_proj;
}

}  // namespace

TEST_SUITE("examples") {
  TEST_CASE("convex non-Lipschitz value functions") {
    const double h = 1e-3;
    const Instance inst = example_convex_nonlipschitz(h, 4.0 / 3.0);
    CHECK(inst.meta.convex);
    CHECK(inst.meta.known_optimum == 0.0);
    const int leaf = leaf_of(inst);
    const NodeData& data = inst.tree->node(leaf).data;
    CHECK(data.penalty.norm == NormKind::L2);
    CHECK(data.penalty.sigma == doctest::Approx(4.0 / 3.0));

    const ValueTable table = brute_force_value_functions(*inst.tree);
    const PointSet& xs = inst.tree->parent_space(leaf).grid();
    const NodeValues& nv = table.nodes[leaf];
    REQUIRE(nv.Q.size() == xs.size());
    CHECK(nv.Q.front() == 0.0);
    CHECK(nv.Q.back() == doctest::Approx(1.0));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double x = xs[i][0];
      CHECK(std::abs(nv.Q[i] - ref::cap_value(x)) <= 2 * h);
      CHECK(nv.QR[i] <= nv.Q[i] + 1e-12);
      if (x <= 0.8 + 1e-12) CHECK(std::abs(nv.QR[i] - nv.Q[i]) <= 1e-4);
    }
    CHECK(std::abs(nv.QR.back() - 2.0 / 3.0) <= 2 * h);
    // steepest grid slope sits at x = 1 and grows like h^(-1/2)
    const double last = (nv.Q.back() - nv.Q[xs.size() - 2]) / h;
    CHECK(last > 40.0);
    CHECK(table.v_prim == doctest::Approx(0.0));
  }

  TEST_CASE("mixed-integer discontinuous value functions") {
    const double h = 1e-3;
    const Instance inst = example_milp_discontinuous(h, 5.0);
    CHECK_FALSE(inst.meta.convex);
    CHECK(inst.meta.shift == 1.0);
    CHECK(inst.meta.known_optimum == 0.0);
    CHECK(inst.meta.extra.at("recommended_sigma") == 5.0);
    REQUIRE(inst.meta.certified_sigma.has_value());
    CHECK(*inst.meta.certified_sigma == doctest::Approx(2.0));

    const ValueTable table = brute_force_value_functions(*inst.tree);
    const int leaf = leaf_of(inst);
    const PointSet& xs = inst.tree->parent_space(leaf).grid();
    const NodeValues& nv = table.nodes[leaf];
    CHECK(nv.Q[*xs.find(Vec{0.0})] == 0.0);
    CHECK(nv.Q[*xs.find(Vec{0.5})] == 1.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double x = xs[i][0];
      CHECK(nv.Q[i] == ref::cover_value(x));
      CHECK(nv.QR[i] == doctest::Approx(ref::cover_regularized(x, 5.0)).epsilon(1e-12));
      if (x == 0.0 || x >= 0.2 - 1e-12) CHECK(std::abs(nv.QR[i] - nv.Q[i]) <= 1e-4);
    }
    CHECK(table.v_prim - inst.meta.shift == doctest::Approx(0.0));
    CHECK(table.v_reg - inst.meta.shift == doctest::Approx(0.0));
  }

  TEST_CASE("exact penalty factor of the mixed-integer example") {
    const Instance fin = example_milp_discontinuous(1e-3, 5.0, true);
    const auto sigmas = exact_sigma_finite(*fin.tree);
    CHECK(sigmas.at(leaf_of(fin)) == doctest::Approx(2.0));
    CHECK(code_of([] { exact_sigma_finite(*example_milp_discontinuous(0.1).tree); }) == ErrorCode::NotFiniteState);
  }

  TEST_CASE("exact penalty factor is 1 when coupling never binds") {
    NodeData root;
    root.cost = make_cost("zero", Json::object());
    root.state_space = StateSpace::finite({{0.0}, {1.0}});
    root.penalty = {NormKind::L1, 1.0};
    root.dual_bounds = {0.0, 1.0};
    NodeData child = root;
    child.cost = make_cost("constant", {{"value", 1.0}});
    NodeSpec r{"r", "", 1.0, "", root};
    NodeSpec c{"c", "r", 1.0, "", child};
    const ScenarioTree tree = build_tree({r, c});
    const auto sigmas = exact_sigma_finite(tree);
    CHECK(sigmas.at(1) == 1.0);
  }
}

TEST_SUITE("lipschitz chain") {
  TEST_CASE("constant costs and optimal value") {
    const int T = 3;
    const double eps = 0.3;
    const Instance inst = lipschitz_chain(T, 2, 1.0, 2.0, eps, 0.1);
    const double beta = eps / T;
    for (const TreeNode& n : inst.tree->nodes()) {
      if (n.stage == 0) continue;
      const PointSet& zs = inst.tree->parent_space(inst.tree->find(n.id)).grid();
      for (std::size_t i = 0; i < zs.size(); ++i) {
        CHECK(*n.data.cost->eval(zs[i], Vec{}, Vec{}) == doctest::Approx(1.5 * beta));
      }
      CHECK(n.data.penalty.sigma == 2.0);
      CHECK(n.data.dual_bounds.l_rho == 2.0);
      CHECK(n.data.dual_bounds.l_lambda == 0.0);
      CHECK(n.data.state_space.diameter() <= 1.0 + 1e-12);
    }
    CHECK(inst.meta.adversarial);
    CHECK(*inst.meta.known_optimum == doctest::Approx(1.5 * eps));
    const ValueTable table = brute_force_value_functions(*inst.tree);
    CHECK(table.v_prim == doctest::Approx(1.5 * eps));
  }

  TEST_CASE("regularization is exact when sigma reaches the Lipschitz constant") {
    const double h = 0.1;
    const Instance inst = lipschitz_chain(3, 1, 1.0, 1.0, 0.3, h);
    const ValueTable table = brute_force_value_functions(*inst.tree);
    for (std::size_t n = 1; n < inst.tree->nodes().size(); ++n) {
      const NodeValues& nv = table.nodes[n];
      for (std::size_t i = 0; i < nv.Q.size(); ++i) CHECK(std::abs(nv.QR[i] - nv.Q[i]) <= 2 * h * (1.0 + 1.0));
    }
  }

  TEST_CASE("parameter errors") {
    CHECK(code_of([] { lipschitz_chain(0, 1, 1.0, 1.0, 0.1, 0.1); }) == ErrorCode::BadParams);
    CHECK(code_of([] { lipschitz_chain(2, 1, -1.0, 1.0, 0.1, 0.1); }) == ErrorCode::BadParams);
    CHECK(code_of([] { lipschitz_chain(2, 1, 1.0, 1.0, 0.0, 0.1); }) == ErrorCode::BadParams);
  }

  TEST_CASE("few anchors leave a large envelope gap") {
    // K < (D L / 4 beta)^d anchors with values in (beta, 2 beta)
    const double D = 1.0, L = 1.0, beta = 0.05;
    const StateSpace ball = StateSpace::ball({0.0, 0.0}, D / 2.0, 0.01);
    const double limit = std::pow(D * L / (4.0 * beta), 2);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int K : {1, 5, static_cast<int>(limit) - 1}) {
      std::vector<Vec> anchors;
      Vec values;
      for (int k = 0; k < K; ++k) {
        const double a = 2.0 * M_PI * u(rng), r = 0.5 * std::sqrt(u(rng));
        anchors.push_back({r * std::cos(a), r * std::sin(a)});
        values.push_back(beta * (1.0 + 0.1 + 0.8 * u(rng)));
      }
      const EnvelopeMinima m = lipschitz_envelope_minima(anchors, values, L, ball.grid());
      CHECK(m.under_min == 0.0);
      CHECK(m.over_min > beta);
      double over = ref::kInf;
      for (std::size_t i = 0; i < ball.grid().size(); ++i) {
        double o = ref::kInf;
        for (int k = 0; k < K; ++k) o = std::min(o, values[k] + L * distance(NormKind::L2, ball.grid()[i], anchors[k]));
        over = std::min(over, o);
      }
      CHECK(m.over_min == doctest::Approx(over));
    }
  }
}

TEST_SUITE("spherical caps") {
  TEST_CASE("count bound and pairwise condition on the 2-sphere") {
    CHECK(spherical_cap_bound(2, 1.0, 0.02) == doctest::Approx(10.0));
    const SphericalCapSet caps = spherical_cap_points(2, 1.0, 0.02);
    CHECK(caps.points.size() >= 10);
    for (std::size_t j = 0; j < caps.points.size(); ++j) {
      CHECK(norm(NormKind::L2, caps.points[j]) == doctest::Approx(1.0).epsilon(1e-12));
      for (std::size_t k = 0; k < caps.points.size(); ++k) {
        if (j == k) continue;
        Vec diff(3);
        for (int i = 0; i < 3; ++i) diff[i] = caps.points[j][i] - caps.points[k][i];
        CHECK(dot(diff, caps.points[k]) < -0.02 * 1.0);
      }
    }
  }

  TEST_CASE("higher dimensions meet the bound") {
    const double beta = 0.1, R = 2.0;
    const SphericalCapSet caps = spherical_cap_points(3, R, beta, 20000, 5);
    CHECK(static_cast<double>(caps.points.size()) >= spherical_cap_bound(3, R, beta));
    CHECK(caps.points.front().size() == 4);
  }

  TEST_CASE("cap errors") {
    const double limit = 1.0 - std::sqrt(2.0) / 2.0;
    CHECK(code_of([&] { spherical_cap_points(2, 1.0, limit); }) == ErrorCode::BadDepth);
    CHECK(code_of([] { spherical_cap_points(2, 1.0, 0.0); }) == ErrorCode::BadDepth);
    CHECK(code_of([] { spherical_cap_points(1, 1.0, 0.1); }) == ErrorCode::BadParams);
    CHECK(code_of([] { spherical_cap_points(2, 1.0, 0.001, 20); }) == ErrorCode::CandidateSetTooSparse);
  }
}

TEST_SUITE("convex worst case") {
  TEST_CASE("stage functions interpolate, separate and leave a gap") {
    const int T = 3;
    const double D = 2.0, L = 1.0, eps = 0.2;
    const ConvexWorstCase cw = convex_worstcase(T, 3, D, L, eps, 7, 0.5, 20000);
    const double R = D / 2.0;
    const double stage_eps = eps / (T - 1);
    for (int t = 1; t <= T - 1; ++t) {
      const ConvexWorstCaseStage& st = cw.stages[static_cast<std::size_t>(t)];
      const double Lt1 = L * (1.0 - static_cast<double>(t) / (2.0 * (T - 1)));
      CHECK(st.lipschitz == doctest::Approx(Lt1));
      CHECK(st.caps.beta == doctest::Approx(stage_eps / Lt1));
      const auto& w = st.caps.points;
      REQUIRE(w.size() == st.values.size());
      for (std::size_t k = 0; k < w.size(); ++k) {
        CHECK(st.values[k] > stage_eps / 2.0);
        CHECK(st.values[k] < stage_eps);
        CHECK(cap_function(w, st.values, st.lipschitz, R, w[k]) == doctest::Approx(st.values[k]).epsilon(1e-12));
        for (std::size_t l = 0; l < w.size(); ++l) {
          if (l == k) continue;
          Vec diff(w[k].size());
          for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = w[l][i] - w[k][i];
          CHECK(st.values[k] + (st.lipschitz / R) * dot(w[k], diff) < 0.0);
        }
        CHECK(hull_lower_bound(w, st.values, st.lipschitz, R, k) > 1.5 * stage_eps);
      }
    }
    const ScenarioTree& tree = *cw.instance.tree;
    CHECK(tree.horizon() == T);
    CHECK(cw.instance.meta.convex);
    const RecombiningTree rt = recombine(cw.instance.tree);
    CHECK(rt.templates(1).size() == cw.stages[1].caps.points.size());
    CHECK(rt.templates(T).size() == 1);
  }

  TEST_CASE("hull evaluation agrees with the certificate") {
    const ConvexWorstCase cw = convex_worstcase(2, 3, 2.0, 1.0, 0.1, 3, 0.5, 20000);
    const ConvexWorstCaseStage& st = cw.stages[1];
    const auto& w = st.caps.points;
    for (std::size_t l = 0; l < w.size(); ++l) {
      std::vector<OverPoint> pts;
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (k != l) pts.push_back({w[k], st.values[k], st.lipschitz});
      }
      const double hull = convex_envelope_value(pts, NormKind::L2, w[l]);
      CHECK(hull >= hull_lower_bound(w, st.values, st.lipschitz, 1.0, l) - 1e-9);
      CHECK(hull > 1.5 * 0.1);
    }
  }

  TEST_CASE("parameter errors") {
    CHECK(code_of([] { convex_worstcase(1, 3, 2.0, 1.0, 0.1, 1); }) == ErrorCode::BadParams);
    CHECK(code_of([] { convex_worstcase(2, 2, 2.0, 1.0, 0.1, 1); }) == ErrorCode::BadParams);
  }
}

TEST_SUITE("finite state") {
  TEST_CASE("exhaustive enumeration matches the table value") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const Instance inst = finite_state_instance(4, 3, seed, 1);
      const ValueTable table = brute_force_value_functions(*inst.tree);
      CHECK(table.v_prim == ref::exhaustive_chain_value(*inst.tree));
      CHECK(table.v_reg <= table.v_prim + 1e-12);
      CHECK(table.v_reg == doctest::Approx(table.v_prim).epsilon(1e-12));
    }
  }

  TEST_CASE("deterministic sampling converges within T K iterations") {
    const Instance inst = finite_state_instance(3, 4, 11, 2);
    SolveConfig cfg;
    cfg.eps = 0.0;
    const SolveResult r = ddp_deterministic(recombine(inst.tree), make_grid_oracles(*inst.tree), cfg);
    CHECK(r.status == SolveStatus::Converged);
    CHECK(r.iterations <= 12);
  }

  TEST_CASE("generators are deterministic under a fixed seed") {
    CHECK(emit_instance(describe(finite_state_instance(3, 4, 5, 2))) ==
          emit_instance(describe(finite_state_instance(3, 4, 5, 2))));
    CHECK(emit_instance(describe(finite_state_instance(3, 4, 5, 2))) !=
          emit_instance(describe(finite_state_instance(3, 4, 6, 2))));
    CHECK(emit_instance(describe(convex_worstcase(2, 3, 2.0, 1.0, 0.1, 9, 0.5, 5000).instance)) ==
          emit_instance(describe(convex_worstcase(2, 3, 2.0, 1.0, 0.1, 9, 0.5, 5000).instance)));
  }

  TEST_CASE("regularized tables stay below the primal tables") {
    const Instance inst = finite_state_instance(3, 5, 2, 4);
    const ValueTable table = brute_force_value_functions(*inst.tree);
    for (const NodeValues& nv : table.nodes) {
      for (std::size_t i = 0; i < nv.Q.size(); ++i) CHECK(nv.QR[i] <= nv.Q[i] + 1e-12);
      for (std::size_t i = 0; i < nv.EQ.size(); ++i) CHECK(nv.EQR[i] <= nv.EQ[i] + 1e-12);
    }
  }

  TEST_CASE("grid budget") {
    const Instance inst = example_convex_nonlipschitz(1e-3);
    CHECK(code_of([&] { brute_force_value_functions(*inst.tree, 1000); }) == ErrorCode::GridTooLarge);
  }
}
