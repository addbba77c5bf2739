#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msddp/approx.hpp"
#include "msddp/model.hpp"
#include "msddp/oracles.hpp"

namespace msddp {

enum class SolveStatus { Converged, IterationCap, OracleError, Stopped };

std::string_view to_string(SolveStatus status);

struct TraceRow {
  int iter = 0;
  double lb = 0.0;
  double ub = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  std::size_t cuts = 0;
  double ms = 0.0;
  /// Largest forward-state gap per stage 1..T-1 observed in the forward pass
  /// (+inf while a stage over-approximation is empty). Empty for sampled runs.
  std::vector<double> stage_gaps;
  std::uint64_t oracle_calls = 0;
};

using BoundsTrace = std::vector<TraceRow>;

struct SolveResult {
  SolveStatus status = SolveStatus::IterationCap;
  Vec x_star, y_star;
  double lower_bound = 0.0;
  double upper_bound = std::numeric_limits<double>::infinity();
  /// Root objective f_r at the incumbent (the root part of the bound).
  double root_cost = 0.0;
  int iterations = 0;
  std::uint64_t oracle_calls = 0;
  std::string message;
  BoundsTrace trace;
};

/// Snapshot handed to observers after every iteration. For nested
/// decomposition the approximations are indexed by tree node, for the
/// sampling algorithms by stage (0..T).
struct IterationView {
  int iteration = 0;
  double lb = 0.0;
  double ub = std::numeric_limits<double>::infinity();
  bool per_stage = false;
  std::span<const UnderApprox> under;
  std::span<const OverApprox> over;  // empty for the stochastic algorithm
  /// Template chosen in each stage by the max-gap rule (deterministic sampling).
  std::vector<int> selected;
  /// Gaps of all templates per stage in that iteration (deterministic sampling).
  std::vector<std::vector<double>> template_gaps;
};

using IterationObserver = std::function<void(const IterationView&)>;

struct SolveConfig {
  double eps = 1e-3;
  int max_iters = 10000;
  IterationObserver observer;
  /// Row sink called after every iteration, in order.
  std::function<void(const TraceRow&)> trace_sink;
};

enum class StopRule { LbStall, FixedIterations };

struct StochasticConfig {
  int samples = 1;  // M
  std::uint64_t seed = 1;
  int max_iters = 10000;
  StopRule stop = StopRule::LbStall;
  int stall_window = 20;
  double stall_tol = 1e-6;
  int fixed_iterations = 100;
  IterationObserver observer;
  std::function<void(const TraceRow&)> trace_sink;
};

SolveResult nested_decomposition(const ScenarioTree& tree, const OracleSet& oracles, const SolveConfig& cfg);
SolveResult ddp_deterministic(const RecombiningTree& rtree, const OracleSet& oracles, const SolveConfig& cfg);
SolveResult ddp_stochastic(const RecombiningTree& rtree, const OracleSet& oracles, const StochasticConfig& cfg);

/// f(z^, y^, x^) + <lambda, xp - z^> + rho psi(xp - z^) + theta(x^).
double compute_cut_constants(const BackwardSolution& backward, ConstVecRef x_parent, const CostToGoModel& theta,
                             const NodeData& node);

/// f(z, y, x) + sigma psi(xp - z) + over_next(x). Throws EmptyOverApprox when
/// `over_next` is empty and not a leaf approximation.
double compute_over_value(const ForwardSolution& forward, ConstVecRef x_parent, const OverApprox& over_next,
                          const NodeData& node);

/// Index of the largest gap; the lowest index wins ties. +inf gaps count as
/// larger than any finite gap.
std::size_t select_max_gap(const std::vector<double>& gaps);

/// M paths, each a template index per stage 1..T (element 0 is the root, 0).
using ScenarioPath = std::vector<int>;
std::vector<ScenarioPath> sample_paths(const RecombiningTree& rtree, int M, std::mt19937_64& rng);

}  // namespace msddp
