#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msddp/model.hpp"

namespace msddp {

struct InstanceMeta {
  std::string name;
  bool convex = false;
  std::optional<double> known_optimum;  // in unshifted units
  std::string optimum_source;
  double shift = 0.0;  // constant added to the root cost to keep it nonnegative
  /// Penalty factors certified to give exact penalization, if computed.
  std::optional<double> certified_sigma;
  bool adversarial = false;
  double grid_h = 0.0;
  Json extra = Json::object();
};

struct Instance {
  std::vector<NodeSpec> specs;
  std::shared_ptr<const ScenarioTree> tree;
  InstanceMeta meta;
};

/// Builds the tree from `specs` (keeps both).
Instance make_instance(std::vector<NodeSpec> specs, InstanceMeta meta);

/// Two-stage convex instance whose stage-2 value function is 1 - sqrt(1 - x^2)
/// on [0, 1]; root cost x. Grid resolution `h` for both stages.
Instance example_convex_nonlipschitz(double h = 1e-3, double sigma = 4.0 / 3.0);

/// Two-stage mixed-integer instance whose stage-2 value function jumps from 0
/// at x = 0 to 1 on (0, 1]; root cost 1 - 2x stored with shift +1.
/// `finite_root` restricts the root state to {0, 1}.
Instance example_milp_discontinuous(double h = 1e-3, double sigma = 5.0, bool finite_root = false);

/// Chain with ball state spaces of diameter D, constant stage costs 3 beta / 2
/// (beta = eps / T), sigma = l_rho = L, l_lambda = 0, l2 penalty.
Instance lipschitz_chain(int T, int d, double D, double L, double eps, double h);

struct SphericalCapSet {
  int d = 0;  // sphere S^d lives in R^(d+1)
  double R = 1.0;
  double beta = 0.0;
  std::vector<Vec> points;
};

/// Cap count lower bound ((d^2-1) sqrt(pi)/d) G(d/2+1)/G(d/2+3/2) (R/2beta)^((d-1)/2).
double spherical_cap_bound(int d, double R, double beta);

/// Greedy maximal packing over a quasi-uniform candidate set. Throws BadDepth,
/// BadParams, CandidateSetTooSparse.
SphericalCapSet spherical_cap_points(int d, double R, double beta, std::size_t candidates = 100000,
                                     std::uint64_t seed = 1);

/// F(x) = max(0, max_k v_k + (L/R) <w_k, x - w_k>).
double cap_function(const std::vector<Vec>& anchors, const Vec& values, double L, double R, ConstVecRef x);

struct ConvexWorstCaseStage {
  double lipschitz = 0.0;  // L_t
  SphericalCapSet caps;
  Vec values;
};

struct ConvexWorstCase {
  Instance instance;
  std::vector<ConvexWorstCaseStage> stages;  // index t = 1..T-1 (entry 0 unused)
};

/// Recombining convex family built from spherical caps (d >= 3, T >= 2).
/// Ball state spaces of radius D/2 gridded at `h`, with the cap anchors added
/// as explicit grid points.
ConvexWorstCase convex_worstcase(int T, int d, double D, double L, double eps, std::uint64_t seed, double h = 0.25,
                                 std::size_t candidates = 100000);

/// Chain (branching 1) or dyadic tree (branching 2 or 4) with integer states
/// {0..K-1}, random integer table costs in [0, 9] with some infeasible
/// entries, l1 penalty and the certified exact penalty factor.
Instance finite_state_instance(int T, int K, std::uint64_t seed, int branching = 1);

/// Per-node exact penalty factors 1 + (v_prim - c) / (p_n d_n). Throws
/// NotFiniteState.
std::vector<double> exact_sigma_finite(const ScenarioTree& tree);

/// Returns a copy of `specs` with every non-root node's sigma replaced (and
/// l_rho / l_lambda raised to match).
std::vector<NodeSpec> with_sigmas(const std::vector<NodeSpec>& specs, const ScenarioTree& tree,
                                  const std::vector<double>& sigmas);

struct NodeValues {
  // On the parent grid (the root has a single empty parent point).
  std::vector<double> Q, QR;
  // On the node's own grid (expected cost-to-go over children).
  std::vector<double> EQ, EQR;
};

struct ValueTable {
  std::vector<NodeValues> nodes;  // indexed like the tree
  double v_prim = 0.0;
  double v_reg = 0.0;
};

/// Backward grid DP for Q, Q^R and their expectations. Throws GridTooLarge
/// when a node needs more than `max_points` evaluations per sweep.
ValueTable brute_force_value_functions(const ScenarioTree& tree, std::size_t max_points = 100'000'000);

/// Envelopes built from K anchors w_k with values f_k:
/// under(x) = max(0, max_k f_k - L|x - w_k|), over(x) = min_k f_k + L|x - w_k|
/// (l2 norms), each minimized over `grid`.
struct EnvelopeMinima {
  double under_min = 0.0;
  double over_min = 0.0;
};
EnvelopeMinima lipschitz_envelope_minima(const std::vector<Vec>& anchors, const Vec& values, double L,
                                         const PointSet& grid);

}  // namespace msddp
