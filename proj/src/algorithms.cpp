#include "msddp/algorithms.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "msddp/error.hpp"

namespace msddp {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::IterationCap: return "IterationCap";
    case SolveStatus::OracleError: return "OracleError";
    case SolveStatus::Stopped: return "Stopped";
  }
  return "Unknown";
}

double compute_cut_constants(const BackwardSolution& backward, ConstVecRef x_parent, const CostToGoModel& theta,
                             const NodeData& node) {
  const auto f = node.cost->eval(backward.z, backward.y, backward.x);
  if (!f) throw Error(ErrorCode::NonFiniteValue, "backward solution is infeasible");
  if (x_parent.size() != backward.z.size()) throw Error(ErrorCode::DimensionMismatch, "parent state dimension");
  Vec diff(x_parent.size());
  double inner = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = x_parent[i] - backward.z[i];
    if (!backward.lambda.empty()) inner += backward.lambda[i] * diff[i];
  }
  const double pen = backward.rho == 0.0 ? 0.0 : backward.rho * penalty_eval(node.penalty, diff);
  return *f + inner + pen + theta.eval(backward.x);
}

double compute_over_value(const ForwardSolution& forward, ConstVecRef x_parent, const OverApprox& over_next,
                          const NodeData& node) {
  const auto next = over_next.eval(forward.x);
  if (!next) throw Error(ErrorCode::EmptyOverApprox, "over-approximation of a non-leaf node is still empty");
  const auto f = node.cost->eval(forward.z, forward.y, forward.x);
  if (!f) throw Error(ErrorCode::NonFiniteValue, "forward solution is infeasible");
  if (x_parent.size() != forward.z.size()) throw Error(ErrorCode::DimensionMismatch, "parent state dimension");
  Vec diff(x_parent.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = x_parent[i] - forward.z[i];
  return *f + node.penalty.sigma * penalty_eval(node.penalty, diff) + *next;
}

std::size_t select_max_gap(const std::vector<double>& gaps) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < gaps.size(); ++k) {
    if (gaps[k] > gaps[best]) best = k;
  }
  return best;
}

std::vector<ScenarioPath> sample_paths(const RecombiningTree& rtree, int M, std::mt19937_64& rng) {
  if (M < 1) throw Error(ErrorCode::InvalidConfig, "number of sampled paths must be at least 1");
  std::vector<ScenarioPath> paths;
  paths.reserve(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) {
    ScenarioPath path(static_cast<std::size_t>(rtree.horizon()) + 1, 0);
    for (int t = 1; t <= rtree.horizon(); ++t) {
      const auto& templates = rtree.templates(t);
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      double acc = 0.0;
      std::size_t pick = templates.size() - 1;
      for (std::size_t m = 0; m < templates.size(); ++m) {
        acc += templates[m].prob;
        if (u < acc) {
          pick = m;
          break;
        }
      }
      path[static_cast<std::size_t>(t)] = static_cast<int>(pick);
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

namespace {

using Clock = std::chrono::steady_clock;

double gap_of(const OverApprox& over, const UnderApprox& under, ConstVecRef x) {
  const auto upper = over.eval(x);
  if (!upper) return std::numeric_limits<double>::infinity();
  return *upper - under.eval(x);
}

struct Owner {
  std::vector<ChildInfo> children;
  double sigma_eff = 0.0;
  OverMode mode = OverMode::PointwiseMin;
  NormKind norm = NormKind::L2;
};

Owner make_owner(const ScenarioTree& tree, const std::vector<std::pair<int, double>>& children) {
  Owner owner;
  bool all_convex = !children.empty();
  for (const auto& [node, weight] : children) {
    const NodeData& data = tree.node(node).data;
    owner.children.push_back({weight, data.dual_bounds, data.penalty});
    owner.sigma_eff += weight * data.penalty.sigma;
    all_convex = all_convex && data.convex;
    owner.norm = data.penalty.norm;
  }
  owner.mode = all_convex ? OverMode::ConvexHull : OverMode::PointwiseMin;
  return owner;
}

double root_cost(const ScenarioTree& tree, const RootSolution& rs) {
  const StateSpace& ps = tree.parent_space(tree.root());
  const auto f = tree.node(tree.root()).data.cost->eval(ps.grid()[0], rs.y, rs.x);
  if (!f) throw Error(ErrorCode::InfeasibleNode, "root solution is infeasible");
  return *f;
}

void check_config(double eps, int max_iters) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::InvalidConfig, "eps must be finite and >= 0");
  if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "iteration cap must be positive");
}

std::size_t total_bundles(const std::vector<UnderApprox>& under) {
  std::size_t n = 0;
  for (const auto& u : under) n += u.bundle_count();
  return n;
}

class Recorder {
 public:
  explicit Recorder(SolveResult& result, const std::function<void(const TraceRow&)>& sink)
      : result_(result), sink_(sink), start_(Clock::now()) {}

  void record(TraceRow row) {
    row.ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    row.oracle_calls = result_.oracle_calls;
    if (sink_) sink_(row);
    result_.trace.push_back(std::move(row));
  }

 private:
  SolveResult& result_;
  const std::function<void(const TraceRow&)>& sink_;
  Clock::time_point start_;
};

// Root update shared by the deterministic algorithms.
void update_root(const ScenarioTree& tree, NodeOracle& oracle, const UnderApprox& under, const OverApprox& over,
                 SolveResult& result, Vec& x_root, Vec& y_root) {
  const RootSolution rs = oracle.root(under);
  ++result.oracle_calls;
  x_root = rs.x;
  y_root = rs.y;
  const double fr = root_cost(tree, rs);
  result.lower_bound = fr + under.eval(rs.x);
  if (const auto upper = over.eval(rs.x)) {
    const double candidate = fr + *upper;
    if (result.upper_bound > candidate) {
      result.upper_bound = candidate;
      result.x_star = rs.x;
      result.y_star = rs.y;
      result.root_cost = fr;
    }
  }
}

}  // namespace

SolveResult nested_decomposition(const ScenarioTree& tree, const OracleSet& oracles, const SolveConfig& cfg) {
  check_config(cfg.eps, cfg.max_iters);
  const std::size_t count = tree.nodes().size();
  if (oracles.nodes.size() != count) throw Error(ErrorCode::InvalidConfig, "one oracle per tree node is required");

  std::vector<UnderApprox> under;
  std::vector<OverApprox> over;
  under.reserve(count);
  over.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const TreeNode& node = tree.nodes()[n];
    std::vector<std::pair<int, double>> children;
    for (int c : node.children) children.emplace_back(c, tree.node(c).cond_prob);
    Owner owner = make_owner(tree, children);
    const std::size_t dim = node.data.state_space.dim();
    under.emplace_back(dim, owner.children);
    over.emplace_back(dim, owner.mode, owner.norm, node.is_leaf());
  }
  auto sigma_eff = [&](int n) {
    double s = 0.0;
    for (int c : tree.node(n).children) s += tree.node(c).cond_prob * tree.node(c).data.penalty.sigma;
    return s;
  };

  SolveResult result;
  Recorder recorder(result, cfg.trace_sink);
  const int root = tree.root();
  std::vector<Vec> xs(count);
  std::vector<ForwardSolution> fwd(count);
  std::vector<ConjugacyCut> cuts(count);
  std::vector<double> vbar(count, 0.0);
  Vec y_root;

  try {
    const RootSolution rs = oracles.at(root).root(under[static_cast<std::size_t>(root)]);
    ++result.oracle_calls;
    xs[static_cast<std::size_t>(root)] = rs.x;
    y_root = rs.y;
    result.lower_bound = root_cost(tree, rs);

    while (!(result.upper_bound - result.lower_bound <= cfg.eps)) {
      if (result.iterations >= cfg.max_iters) break;
      ++result.iterations;
      TraceRow row;
      row.iter = result.iterations;
      row.stage_gaps.assign(static_cast<std::size_t>(std::max(0, tree.horizon() - 1)), 0.0);

      for (int t = 1; t <= tree.horizon(); ++t) {
        for (int n : tree.stage_nodes(t)) {
          const auto un = static_cast<std::size_t>(n);
          const Vec& xp = xs[static_cast<std::size_t>(tree.node(n).parent)];
          fwd[un] = oracles.at(n).forward(xp, under[un]);
          ++result.oracle_calls;
          xs[un] = fwd[un].x;
          if (t < tree.horizon()) {
            double& g = row.stage_gaps[static_cast<std::size_t>(t - 1)];
            g = std::max(g, gap_of(over[un], under[un], xs[un]));
          }
        }
      }
      for (int t = tree.horizon(); t >= 1; --t) {
        for (int n : tree.stage_nodes(t)) {
          const auto un = static_cast<std::size_t>(n);
          const TreeNode& node = tree.node(n);
          if (!node.is_leaf()) {
            std::vector<ConjugacyCut> bundle;
            double value = 0.0;
            for (int c : node.children) {
              bundle.push_back(cuts[static_cast<std::size_t>(c)]);
              value += tree.node(c).cond_prob * vbar[static_cast<std::size_t>(c)];
            }
            under[un].add_bundle(std::move(bundle));
            over[un].add({xs[un], value, sigma_eff(n)});
          }
          const Vec& xp = xs[static_cast<std::size_t>(node.parent)];
          const BackwardSolution bwd = oracles.at(n).backward(xp, under[un]);
          ++result.oracle_calls;
          const double vlow = compute_cut_constants(bwd, xp, under[un], node.data);
          cuts[un] = ConjugacyCut{xp, bwd.lambda, bwd.rho, vlow, node.data.penalty.norm};
          vbar[un] = compute_over_value(fwd[un], xp, over[un], node.data);
        }
      }
      const auto ur = static_cast<std::size_t>(root);
      if (!tree.node(root).is_leaf()) {
        std::vector<ConjugacyCut> bundle;
        double value = 0.0;
        for (int c : tree.node(root).children) {
          bundle.push_back(cuts[static_cast<std::size_t>(c)]);
          value += tree.node(c).cond_prob * vbar[static_cast<std::size_t>(c)];
        }
        under[ur].add_bundle(std::move(bundle));
        over[ur].add({xs[ur], value, sigma_eff(root)});
      }
      update_root(tree, oracles.at(root), under[ur], over[ur], result, xs[ur], y_root);

      row.lb = result.lower_bound;
      row.ub = result.upper_bound;
      row.gap = result.upper_bound - result.lower_bound;
      row.cuts = total_bundles(under);
      recorder.record(std::move(row));
      if (cfg.observer) {
        IterationView view;
        view.iteration = result.iterations;
        view.lb = result.lower_bound;
        view.ub = result.upper_bound;
        view.per_stage = false;
        view.under = under;
        view.over = over;
        cfg.observer(view);
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InfeasibleNode) throw;
    result.status = SolveStatus::OracleError;
    result.message = e.what();
    return result;
  }
  result.status = result.upper_bound - result.lower_bound <= cfg.eps ? SolveStatus::Converged : SolveStatus::IterationCap;
  return result;
}

namespace {

struct StageModels {
  std::vector<UnderApprox> under;
  std::vector<OverApprox> over;
  std::vector<double> sigma_eff;
};

StageModels make_stage_models(const RecombiningTree& rtree) {
  const ScenarioTree& tree = *rtree.tree;
  StageModels models;
  const int T = rtree.horizon();
  models.under.reserve(static_cast<std::size_t>(T) + 1);
  models.over.reserve(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    std::vector<std::pair<int, double>> children;
    if (t < T) {
      for (const auto& m : rtree.templates(t + 1)) children.emplace_back(m.node, m.prob);
    }
    Owner owner = make_owner(tree, children);
    const std::size_t dim = tree.node(rtree.templates(t).front().node).data.state_space.dim();
    models.under.emplace_back(dim, owner.children);
    models.over.emplace_back(dim, owner.mode, owner.norm, t == T);
    models.sigma_eff.push_back(owner.sigma_eff);
  }
  return models;
}

}  // namespace

SolveResult ddp_deterministic(const RecombiningTree& rtree, const OracleSet& oracles, const SolveConfig& cfg) {
  check_config(cfg.eps, cfg.max_iters);
  const ScenarioTree& tree = *rtree.tree;
  const int T = rtree.horizon();
  const int root = tree.root();
  StageModels models = make_stage_models(rtree);
  auto& under = models.under;
  auto& over = models.over;

  SolveResult result;
  Recorder recorder(result, cfg.trace_sink);
  std::vector<Vec> xs(static_cast<std::size_t>(T) + 1);
  std::vector<std::vector<ForwardSolution>> fwd(static_cast<std::size_t>(T) + 1);
  std::vector<std::vector<ConjugacyCut>> cuts(static_cast<std::size_t>(T) + 2);
  std::vector<std::vector<double>> vbar(static_cast<std::size_t>(T) + 2);
  Vec y_root;

  try {
    const RootSolution rs = oracles.at(root).root(under[0]);
    ++result.oracle_calls;
    xs[0] = rs.x;
    y_root = rs.y;
    result.lower_bound = root_cost(tree, rs);

    while (!(result.upper_bound - result.lower_bound <= cfg.eps)) {
      if (result.iterations >= cfg.max_iters) break;
      ++result.iterations;
      TraceRow row;
      row.iter = result.iterations;
      std::vector<int> selected(static_cast<std::size_t>(T) + 1, 0);
      std::vector<std::vector<double>> all_gaps(static_cast<std::size_t>(T) + 1);

      for (int t = 1; t <= T; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const auto& templates = rtree.templates(t);
        fwd[ut].resize(templates.size());
        std::vector<double> gaps(templates.size());
        for (std::size_t m = 0; m < templates.size(); ++m) {
          fwd[ut][m] = oracles.at(templates[m].node).forward(xs[ut - 1], under[ut]);
          ++result.oracle_calls;
          gaps[m] = gap_of(over[ut], under[ut], fwd[ut][m].x);
        }
        const std::size_t pick = select_max_gap(gaps);
        selected[ut] = static_cast<int>(pick);
        xs[ut] = fwd[ut][pick].x;
        if (t < T) row.stage_gaps.push_back(gaps[pick]);
        all_gaps[ut] = std::move(gaps);
      }
      for (int t = T; t >= 1; --t) {
        const auto ut = static_cast<std::size_t>(t);
        const auto& templates = rtree.templates(t);
        if (t < T) {
          double value = 0.0;
          const auto& next = rtree.templates(t + 1);
          for (std::size_t m = 0; m < next.size(); ++m) value += next[m].prob * vbar[ut + 1][m];
          under[ut].add_bundle(cuts[ut + 1]);
          over[ut].add({xs[ut], value, models.sigma_eff[ut]});
        }
        cuts[ut].assign(templates.size(), {});
        vbar[ut].assign(templates.size(), 0.0);
        for (std::size_t m = 0; m < templates.size(); ++m) {
          const NodeData& data = tree.node(templates[m].node).data;
          const BackwardSolution bwd = oracles.at(templates[m].node).backward(xs[ut - 1], under[ut]);
          ++result.oracle_calls;
          const double vlow = compute_cut_constants(bwd, xs[ut - 1], under[ut], data);
          cuts[ut][m] = ConjugacyCut{xs[ut - 1], bwd.lambda, bwd.rho, vlow, data.penalty.norm};
          vbar[ut][m] = compute_over_value(fwd[ut][m], xs[ut - 1], over[ut], data);
        }
      }
      if (T >= 1) {
        double value = 0.0;
        const auto& first = rtree.templates(1);
        for (std::size_t m = 0; m < first.size(); ++m) value += first[m].prob * vbar[1][m];
        under[0].add_bundle(cuts[1]);
        over[0].add({xs[0], value, models.sigma_eff[0]});
      }
      update_root(tree, oracles.at(root), under[0], over[0], result, xs[0], y_root);

      row.lb = result.lower_bound;
      row.ub = result.upper_bound;
      row.gap = result.upper_bound - result.lower_bound;
      row.cuts = total_bundles(under);
      recorder.record(std::move(row));
      if (cfg.observer) {
        IterationView view;
        view.iteration = result.iterations;
        view.lb = result.lower_bound;
        view.ub = result.upper_bound;
        view.per_stage = true;
        view.under = under;
        view.over = over;
        view.selected = selected;
        view.template_gaps = all_gaps;
        cfg.observer(view);
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InfeasibleNode) throw;
    result.status = SolveStatus::OracleError;
    result.message = e.what();
    return result;
  }
  result.status = result.upper_bound - result.lower_bound <= cfg.eps ? SolveStatus::Converged : SolveStatus::IterationCap;
  return result;
}

SolveResult ddp_stochastic(const RecombiningTree& rtree, const OracleSet& oracles, const StochasticConfig& cfg) {
  if (cfg.samples < 1) throw Error(ErrorCode::InvalidConfig, "number of sampled paths must be at least 1");
  if (cfg.max_iters < 1) throw Error(ErrorCode::InvalidConfig, "iteration cap must be positive");
  if (cfg.stop == StopRule::LbStall && cfg.stall_window < 1) {
    throw Error(ErrorCode::InvalidConfig, "stall window must be positive");
  }
  const ScenarioTree& tree = *rtree.tree;
  const int T = rtree.horizon();
  const int root = tree.root();
  const auto M = static_cast<std::size_t>(cfg.samples);
  StageModels models = make_stage_models(rtree);
  auto& under = models.under;
  std::mt19937_64 rng(cfg.seed);

  SolveResult result;
  Recorder recorder(result, cfg.trace_sink);
  std::vector<double> lb_history;
  Vec x_root, y_root;
  bool stopped = false;

  try {
    RootSolution rs = oracles.at(root).root(under[0]);
    ++result.oracle_calls;
    x_root = rs.x;
    y_root = rs.y;
    result.lower_bound = root_cost(tree, rs);
    lb_history.push_back(result.lower_bound);

    while (result.iterations < cfg.max_iters) {
      ++result.iterations;
      const auto paths = sample_paths(rtree, cfg.samples, rng);
      // states[j][t] is the stage-t state of path j.
      std::vector<std::vector<Vec>> states(M, std::vector<Vec>(static_cast<std::size_t>(T) + 1));
      for (std::size_t j = 0; j < M; ++j) {
        states[j][0] = x_root;
        for (int t = 1; t <= T - 1; ++t) {
          const auto ut = static_cast<std::size_t>(t);
          const int node = rtree.templates(t)[static_cast<std::size_t>(paths[j][ut])].node;
          states[j][ut] = oracles.at(node).forward(states[j][ut - 1], under[ut]).x;
          ++result.oracle_calls;
        }
      }
      std::vector<std::vector<ConjugacyCut>> next_cuts(M);
      for (int t = T; t >= 1; --t) {
        const auto ut = static_cast<std::size_t>(t);
        if (t < T) {
          for (std::size_t j = 0; j < M; ++j) under[ut].add_bundle(next_cuts[j]);
        }
        const auto& templates = rtree.templates(t);
        std::vector<std::vector<ConjugacyCut>> stage_cuts(M);
        for (std::size_t j = 0; j < M; ++j) {
          const Vec& xp = states[j][ut - 1];
          for (const auto& tpl : templates) {
            const NodeData& data = tree.node(tpl.node).data;
            const BackwardSolution bwd = oracles.at(tpl.node).backward(xp, under[ut]);
            ++result.oracle_calls;
            const double vlow = compute_cut_constants(bwd, xp, under[ut], data);
            stage_cuts[j].push_back(ConjugacyCut{xp, bwd.lambda, bwd.rho, vlow, data.penalty.norm});
          }
        }
        next_cuts = std::move(stage_cuts);
      }
      if (T >= 1) {
        for (std::size_t j = 0; j < M; ++j) under[0].add_bundle(next_cuts[j]);
      }
      rs = oracles.at(root).root(under[0]);
      ++result.oracle_calls;
      x_root = rs.x;
      y_root = rs.y;
      const double fr = root_cost(tree, rs);
      result.lower_bound = fr + under[0].eval(rs.x);
      result.x_star = rs.x;
      result.y_star = rs.y;
      result.root_cost = fr;
      lb_history.push_back(result.lower_bound);

      TraceRow row;
      row.iter = result.iterations;
      row.lb = result.lower_bound;
      row.cuts = total_bundles(under);
      recorder.record(std::move(row));
      if (cfg.observer) {
        IterationView view;
        view.iteration = result.iterations;
        view.lb = result.lower_bound;
        view.per_stage = true;
        view.under = under;
        cfg.observer(view);
      }
      if (cfg.stop == StopRule::FixedIterations && result.iterations >= cfg.fixed_iterations) {
        stopped = true;
        break;
      }
      if (cfg.stop == StopRule::LbStall && result.iterations >= cfg.stall_window) {
        const double before = lb_history[lb_history.size() - 1 - static_cast<std::size_t>(cfg.stall_window)];
        if (result.lower_bound - before <= cfg.stall_tol) {
          stopped = true;
          break;
        }
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InfeasibleNode) throw;
    result.status = SolveStatus::OracleError;
    result.message = e.what();
    return result;
  }
  result.status = stopped ? SolveStatus::Stopped : SolveStatus::IterationCap;
  return result;
}

}  // namespace msddp
