#include "msddp/instances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "msddp/error.hpp"

namespace msddp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

NodeSpec make_spec(std::string id, std::string parent, double prob, std::string eq_class, NodeData data) {
  NodeSpec spec;
  spec.id = std::move(id);
  spec.parent = std::move(parent);
  spec.prob = prob;
  spec.eq_class = std::move(eq_class);
  spec.data = std::move(data);
  return spec;
}

NodeData node_data(CostPtr cost, StateSpace state, NormKind norm, double sigma, DualBounds bounds, bool convex,
                   StateSpace internal = StateSpace::none()) {
  NodeData data;
  data.cost = std::move(cost);
  data.state_space = std::move(state);
  data.internal = std::move(internal);
  data.penalty = {norm, sigma};
  data.dual_bounds = bounds;
  data.convex = convex;
  return data;
}

Json points_json(const std::vector<Vec>& points) {
  Json out = Json::array();
  for (const auto& p : points) out.push_back(p);
  return out;
}

double opt(const std::optional<double>& v) { return v ? *v : kInf; }

}  // namespace

Instance make_instance(std::vector<NodeSpec> specs, InstanceMeta meta) {
  Instance inst;
  inst.tree = std::make_shared<const ScenarioTree>(build_tree(specs));
  inst.specs = std::move(specs);
  inst.meta = std::move(meta);
  return inst;
}

Instance example_convex_nonlipschitz(double h, double sigma) {
  if (!(h > 0.0) || !(sigma > 0.0)) throw Error(ErrorCode::BadParams, "h and sigma must be positive");
  std::vector<NodeSpec> specs;
  specs.push_back(make_spec("root", "", 1.0, "root",
                            node_data(make_cost("linear", {{"x", {1.0}}}), StateSpace::box({0.0}, {1.0}, h),
                                      NormKind::L2, sigma, {sigma, 0.0}, true)));
  specs.push_back(make_spec("leaf", "root", 1.0, "leaf",
                            node_data(make_cost("quadratic_cap", {{"offset", 1.0}, {"radius", 1.0}}),
                                      StateSpace::none(), NormKind::L2, sigma, {sigma, 0.0}, true)));
  InstanceMeta meta;
  meta.name = "convex_nonlipschitz";
  meta.convex = true;
  meta.known_optimum = 0.0;
  meta.optimum_source = "closed form: root cost x plus 1 - sqrt(1 - x^2), minimized at x = 0";
  meta.grid_h = h;
  meta.extra = {{"recommended_sigma", 4.0 / 3.0}, {"analytic_oracle", "convex_cap"}};
  return make_instance(std::move(specs), std::move(meta));
}

Instance example_milp_discontinuous(double h, double sigma, bool finite_root) {
  if (!(h > 0.0) || !(sigma > 0.0)) throw Error(ErrorCode::BadParams, "h and sigma must be positive");
  const StateSpace root_space = finite_root ? StateSpace::finite({{0.0}, {1.0}}) : StateSpace::box({0.0}, {1.0}, h);
  std::vector<NodeSpec> specs;
  specs.push_back(make_spec("root", "", 1.0, "root",
                            node_data(make_cost("linear", {{"constant", 2.0}, {"x", {-2.0}}}), root_space,
                                      NormKind::L1, sigma, {0.0, sigma}, false)));
  specs.push_back(make_spec("leaf", "root", 1.0, "leaf",
                            node_data(make_cost("integer_cover", Json::object()), StateSpace::none(), NormKind::L1,
                                      sigma, {0.0, sigma}, false, StateSpace::finite({{0.0}, {1.0}}))));
  InstanceMeta meta;
  meta.name = finite_root ? "milp_discontinuous_finite" : "milp_discontinuous";
  meta.convex = false;
  meta.known_optimum = 0.0;
  meta.optimum_source = "closed form: unique optimum x = z = 1";
  meta.shift = 1.0;
  meta.grid_h = h;
  meta.extra = {{"recommended_sigma", 5.0}, {"analytic_oracle", "integer_cover"}};

  Instance inst = make_instance(std::move(specs), std::move(meta));
  if (finite_root) {
    inst.meta.certified_sigma = exact_sigma_finite(*inst.tree).at(1);
  } else {
    inst.meta.certified_sigma = example_milp_discontinuous(h, sigma, true).meta.certified_sigma;
  }
  return inst;
}

Instance lipschitz_chain(int T, int d, double D, double L, double eps, double h) {
  if (T < 1 || d < 1 || !(D > 0.0) || !(L > 0.0) || !(eps > 0.0) || !(h > 0.0)) {
    throw Error(ErrorCode::BadParams, "lipschitz_chain needs T, d >= 1 and positive D, L, eps, h");
  }
  const double beta = eps / T;
  const StateSpace ball = StateSpace::ball(Vec(static_cast<std::size_t>(d), 0.0), D / 2.0, h);
  const CostPtr stage_cost = make_cost("constant", {{"value", 1.5 * beta}});
  std::vector<NodeSpec> specs;
  specs.push_back(make_spec("s0", "", 1.0, "s0",
                            node_data(make_cost("zero", Json::object()), ball, NormKind::L2, L, {0.0, L}, false)));
  for (int t = 1; t <= T; ++t) {
    const std::string id = "s" + std::to_string(t);
    specs.push_back(make_spec(id, "s" + std::to_string(t - 1), 1.0, id,
                              node_data(stage_cost, t < T ? ball : StateSpace::none(), NormKind::L2, L, {0.0, L},
                                        false)));
  }
  InstanceMeta meta;
  meta.name = "lipschitz_chain";
  meta.convex = false;
  meta.known_optimum = 1.5 * eps;
  meta.optimum_source = "sum of constant stage costs";
  meta.adversarial = true;
  meta.grid_h = h;
  meta.extra = {{"T", T}, {"d", d}, {"D", D}, {"L", L}, {"eps", eps}, {"beta", beta}};
  return make_instance(std::move(specs), std::move(meta));
}

double spherical_cap_bound(int d, double R, double beta) {
  const double dd = d;
  return ((dd * dd - 1.0) * std::sqrt(std::numbers::pi) / dd) *
         std::exp(std::lgamma(dd / 2.0 + 1.0) - std::lgamma(dd / 2.0 + 1.5)) *
         std::pow(R / (2.0 * beta), (dd - 1.0) / 2.0);
}

SphericalCapSet spherical_cap_points(int d, double R, double beta, std::size_t candidates, std::uint64_t seed) {
  if (d < 2 || !(R > 0.0) || candidates == 0) throw Error(ErrorCode::BadParams, "need d >= 2, R > 0, candidates > 0");
  if (!(beta > 0.0) || beta >= (1.0 - std::numbers::sqrt2 / 2.0) * R) {
    throw Error(ErrorCode::BadDepth, "cap depth must lie in (0, (1 - sqrt(2)/2) R)");
  }
  const std::size_t dim = static_cast<std::size_t>(d) + 1;
  std::vector<Vec> cand;
  cand.reserve(candidates);
  if (d == 2) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double n = static_cast<double>(candidates);
    for (std::size_t i = 0; i < candidates; ++i) {
      const double zc = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / n;
      const double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      const double phi = golden * static_cast<double>(i);
      cand.push_back({R * r * std::cos(phi), R * r * std::sin(phi), R * zc});
    }
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    while (cand.size() < candidates) {
      Vec p(dim);
      for (auto& c : p) c = gauss(rng);
      const double n = norm(NormKind::L2, p);
      if (n < 1e-12) continue;
      for (auto& c : p) c *= R / n;
      cand.push_back(std::move(p));
    }
  }

  SphericalCapSet set;
  set.d = d;
  set.R = R;
  set.beta = beta;
  const double limit = -beta * R;
  auto outside = [&](const Vec& a, const Vec& b) {
    // a not in the cap at b, and b not in the cap at a
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    return ab - bb < limit && ab - aa < limit;
  };
  for (const auto& c : cand) {
    bool ok = true;
    for (const auto& w : set.points) {
      if (!outside(c, w)) {
        ok = false;
        break;
      }
    }
    if (ok) set.points.push_back(c);
  }
  if (static_cast<double>(set.points.size()) < spherical_cap_bound(d, R, beta)) {
    throw Error(ErrorCode::CandidateSetTooSparse,
                "packing found " + std::to_string(set.points.size()) + " caps, below the volume bound");
  }
  return set;
}

double cap_function(const std::vector<Vec>& anchors, const Vec& values, double L, double R, ConstVecRef x) {
  double best = 0.0;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const Vec& w = anchors[k];
    double inner = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) inner += w[i] * (x[i] - w[i]);
    best = std::max(best, values[k] + L / R * inner);
  }
  return best;
}

ConvexWorstCase convex_worstcase(int T, int d, double D, double L, double eps, std::uint64_t seed, double h,
                                 std::size_t candidates) {
  if (T < 2 || d < 3 || !(D > 0.0) || !(L > 0.0) || !(eps > 0.0) || !(h > 0.0)) {
    throw Error(ErrorCode::BadParams, "convex_worstcase needs T >= 2, d >= 3 and positive D, L, eps, h");
  }
  const double R = D / 2.0;
  const double stage_eps = eps / (T - 1);
  auto lip = [&](int t) { return L * (1.0 - static_cast<double>(t - 1) / (2.0 * (T - 1))); };

  ConvexWorstCase out;
  out.stages.resize(static_cast<std::size_t>(T));
  std::mt19937_64 rng(seed);
  const double lo = stage_eps / 2.0 + 1e-9, hi = stage_eps - 1e-9;
  double node_count = 1.0;
  for (int t = 1; t <= T - 1; ++t) {
    ConvexWorstCaseStage& st = out.stages[static_cast<std::size_t>(t)];
    st.lipschitz = lip(t + 1);
    st.caps = spherical_cap_points(d - 1, R, stage_eps / lip(t + 1), candidates, seed + static_cast<std::uint64_t>(t));
    for (std::size_t k = 0; k < st.caps.points.size(); ++k) st.values.push_back(lo + (hi - lo) * uniform01(rng));
    node_count *= static_cast<double>(st.caps.points.size());
    if (node_count > 1e6) throw Error(ErrorCode::BadParams, "convex_worstcase tree exceeds 10^6 nodes");
  }

  auto prev_json = [&](int t) -> Json {
    if (t < 1) return nullptr;
    const ConvexWorstCaseStage& st = out.stages[static_cast<std::size_t>(t)];
    return {{"lipschitz", st.lipschitz}, {"radius", R}, {"anchors", points_json(st.caps.points)},
            {"values", st.values}};
  };

  std::vector<NodeSpec> specs;
  specs.push_back(make_spec("r", "", 1.0, "r",
                            node_data(make_cost("zero", Json::object()), StateSpace::none(), NormKind::L2, L,
                                      {L, 0.0}, true)));
  std::vector<std::string> frontier{"r"};
  for (int t = 1; t <= T; ++t) {
    const double Lt = lip(t);
    std::vector<std::string> next;
    if (t < T) {
      const auto& caps = out.stages[static_cast<std::size_t>(t)].caps.points;
      const StateSpace space = StateSpace::ball(Vec(static_cast<std::size_t>(d), 0.0), R, h, caps);
      std::vector<CostPtr> costs;
      for (const auto& w : caps) {
        costs.push_back(make_cost("cap_stage", {{"prev", prev_json(t - 1)}, {"slope", Lt}, {"target", w}}));
      }
      const double prob = 1.0 / static_cast<double>(caps.size());
      for (const auto& parent : frontier) {
        for (std::size_t k = 0; k < caps.size(); ++k) {
          const std::string id = parent + "." + std::to_string(k);
          specs.push_back(make_spec(id, parent, prob, "t" + std::to_string(t) + "k" + std::to_string(k),
                                    node_data(costs[k], space, NormKind::L2, Lt, {Lt, 0.0}, true)));
          next.push_back(id);
        }
      }
    } else {
      const CostPtr cost = make_cost("cap_stage", {{"prev", prev_json(T - 1)}});
      for (const auto& parent : frontier) {
        specs.push_back(make_spec(parent + ".leaf", parent, 1.0, "leaf",
                                  node_data(cost, StateSpace::none(), NormKind::L2, Lt, {Lt, 0.0}, true)));
      }
    }
    frontier = std::move(next);
  }

  InstanceMeta meta;
  meta.name = "convex_worstcase";
  meta.convex = true;
  meta.grid_h = h;
  meta.extra = {{"T", T}, {"d", d}, {"D", D}, {"L", L}, {"eps", eps}, {"seed", seed}};
  out.instance = make_instance(std::move(specs), std::move(meta));
  return out;
}

Instance finite_state_instance(int T, int K, std::uint64_t seed, int branching) {
  if (T < 1 || K < 1) throw Error(ErrorCode::BadParams, "finite_state_instance needs T, K >= 1");
  if (branching != 1 && branching != 2 && branching != 4) {
    throw Error(ErrorCode::BadParams, "branching must be 1, 2 or 4");
  }
  std::mt19937_64 rng(seed);
  std::vector<Vec> states;
  for (int k = 0; k < K; ++k) states.push_back({static_cast<double>(k)});
  const StateSpace space = StateSpace::finite(states);
  const std::vector<Vec> empty_point{Vec{}};

  auto random_table = [&](const std::vector<Vec>& zs, const std::vector<Vec>& xs) {
    Json values = Json::array();
    for (std::size_t i = 0; i < zs.size(); ++i) {
      Json row = Json::array();
      bool any = false;
      for (std::size_t j = 0; j < xs.size(); ++j) {
        const bool infeasible = rng() % 5 == 0;
        const double v = static_cast<double>(rng() % 10);
        if (infeasible) {
          row.push_back(nullptr);
        } else {
          row.push_back(v);
          any = true;
        }
      }
      if (!any) row[rng() % xs.size()] = static_cast<double>(rng() % 10);
      values.push_back(std::move(row));
    }
    return make_cost("table", {{"z", points_json(zs)}, {"x", points_json(xs)}, {"values", std::move(values)}});
  };

  // One cost per (stage, child slot), shared by every node in that class.
  std::vector<std::vector<CostPtr>> costs(static_cast<std::size_t>(T) + 1);
  costs[0].push_back(random_table(empty_point, states));
  for (int t = 1; t <= T; ++t) {
    for (int j = 0; j < branching; ++j) costs[static_cast<std::size_t>(t)].push_back(random_table(states, t < T ? states : empty_point));
  }

  const DualBounds bounds{0.0, 1.0};
  std::vector<NodeSpec> specs;
  specs.push_back(make_spec("n", "", 1.0, "t0", node_data(costs[0][0], space, NormKind::L1, 1.0, bounds, false)));
  std::vector<std::string> frontier{"n"};
  const double prob = 1.0 / branching;
  for (int t = 1; t <= T; ++t) {
    std::vector<std::string> next;
    for (const auto& parent : frontier) {
      for (int j = 0; j < branching; ++j) {
        const std::string id = parent + std::to_string(j);
        specs.push_back(make_spec(id, parent, prob, "t" + std::to_string(t) + "c" + std::to_string(j),
                                  node_data(costs[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)],
                                            t < T ? space : StateSpace::none(), NormKind::L1, 1.0, bounds, false)));
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }

  const ScenarioTree draft = build_tree(specs);
  const std::vector<double> sigmas = exact_sigma_finite(draft);
  InstanceMeta meta;
  meta.name = "finite_state";
  meta.convex = false;
  meta.certified_sigma = *std::max_element(sigmas.begin(), sigmas.end());
  meta.extra = {{"T", T}, {"K", K}, {"seed", seed}, {"branching", branching}};
  return make_instance(with_sigmas(specs, draft, sigmas), std::move(meta));
}

std::vector<NodeSpec> with_sigmas(const std::vector<NodeSpec>& specs, const ScenarioTree& tree,
                                  const std::vector<double>& sigmas) {
  std::vector<NodeSpec> out = specs;
  for (auto& spec : out) {
    const int i = tree.find(spec.id);
    if (i <= 0) continue;
    const double s = sigmas.at(static_cast<std::size_t>(i));
    spec.data.penalty.sigma = s;
    if (spec.data.convex) {
      spec.data.dual_bounds.l_lambda = std::max(spec.data.dual_bounds.l_lambda, s);
    } else {
      spec.data.dual_bounds.l_rho = std::max(spec.data.dual_bounds.l_rho, s);
    }
  }
  return out;
}

std::vector<double> exact_sigma_finite(const ScenarioTree& tree) {
  for (const auto& node : tree.nodes()) {
    if (!node.data.state_space.is_finite() || !node.data.internal.is_finite()) {
      throw Error(ErrorCode::NotFiniteState, "node '" + node.id + "' has a continuous state or internal set");
    }
  }
  const ValueTable table = brute_force_value_functions(tree);

  // Relaxed problem: every node minimized independently over its copy variable.
  double relaxed = 0.0;
  for (std::size_t n = 0; n < tree.nodes().size(); ++n) {
    const TreeNode& node = tree.nodes()[n];
    const PointSet& zs = tree.parent_space(static_cast<int>(n)).grid();
    const PointSet& xs = node.data.state_space.grid();
    const PointSet& ys = node.data.internal.grid();
    double best = kInf;
    for (std::size_t iz = 0; iz < zs.size(); ++iz) {
      for (std::size_t iy = 0; iy < ys.size(); ++iy) {
        for (std::size_t ix = 0; ix < xs.size(); ++ix) best = std::min(best, opt(node.data.cost->eval(zs[iz], ys[iy], xs[ix])));
      }
    }
    relaxed += node.prob * best;
  }

  std::vector<double> sigmas(tree.nodes().size(), 1.0);
  for (std::size_t n = 1; n < tree.nodes().size(); ++n) {
    const TreeNode& node = tree.nodes()[n];
    const PointSet& zs = tree.parent_space(static_cast<int>(n)).grid();
    double dmin = kInf;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      for (std::size_t j = i + 1; j < zs.size(); ++j) {
        Vec diff(zs.dim());
        for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = zs[i][c] - zs[j][c];
        dmin = std::min(dmin, penalty_eval(node.data.penalty, diff));
      }
    }
    if (std::isfinite(dmin) && dmin > 0.0) sigmas[n] = 1.0 + (table.v_prim - relaxed) / (node.prob * dmin);
  }
  return sigmas;
}

ValueTable brute_force_value_functions(const ScenarioTree& tree, std::size_t max_points) {
  const std::size_t count = tree.nodes().size();
  ValueTable table;
  table.nodes.resize(count);
  for (std::size_t step = count; step-- > 0;) {
    const TreeNode& node = tree.nodes()[step];
    const PointSet& ps = tree.parent_space(static_cast<int>(step)).grid();
    const PointSet& xs = node.data.state_space.grid();
    const PointSet& ys = node.data.internal.grid();
    const NodalCost& cost = *node.data.cost;
    const bool sep = cost.separable();
    const double work = (sep ? static_cast<double>(ps.size()) + static_cast<double>(xs.size()) * ys.size()
                             : static_cast<double>(ps.size()) * xs.size() * ys.size()) +
                        static_cast<double>(ps.size()) * ps.size();
    if (work > static_cast<double>(max_points)) {
      throw Error(ErrorCode::GridTooLarge, "brute force at node '" + node.id + "' needs too many evaluations");
    }

    NodeValues& nv = table.nodes[step];
    nv.EQ.assign(xs.size(), 0.0);
    nv.EQR.assign(xs.size(), 0.0);
    for (int c : node.children) {
      const NodeValues& cv = table.nodes[static_cast<std::size_t>(c)];
      const double w = tree.node(c).cond_prob;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        nv.EQ[i] += w * cv.Q[i];
        nv.EQR[i] += w * cv.QR[i];
      }
    }

    std::vector<double> g(ps.size()), gr(ps.size());
    if (sep) {
      double best = kInf, best_r = kInf;
      for (std::size_t iy = 0; iy < ys.size(); ++iy) {
        for (std::size_t ix = 0; ix < xs.size(); ++ix) {
          const double v = opt(cost.yx_part(ys[iy], xs[ix]));
          best = std::min(best, v + nv.EQ[ix]);
          best_r = std::min(best_r, v + nv.EQR[ix]);
        }
      }
      for (std::size_t iz = 0; iz < ps.size(); ++iz) {
        const double zp = opt(cost.z_part(ps[iz]));
        g[iz] = zp + best;
        gr[iz] = zp + best_r;
      }
    } else {
      for (std::size_t iz = 0; iz < ps.size(); ++iz) {
        double best = kInf, best_r = kInf;
        for (std::size_t iy = 0; iy < ys.size(); ++iy) {
          for (std::size_t ix = 0; ix < xs.size(); ++ix) {
            const double v = opt(cost.eval(ps[iz], ys[iy], xs[ix]));
            best = std::min(best, v + nv.EQ[ix]);
            best_r = std::min(best_r, v + nv.EQR[ix]);
          }
        }
        g[iz] = best;
        gr[iz] = best_r;
      }
    }

    nv.Q = g;
    nv.QR.assign(ps.size(), kInf);
    const double sigma = node.data.penalty.sigma;
    Vec diff(ps.dim());
    for (std::size_t ip = 0; ip < ps.size(); ++ip) {
      double best = kInf;
      for (std::size_t iz = 0; iz < ps.size(); ++iz) {
        if (!std::isfinite(gr[iz])) continue;
        for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = ps[ip][c] - ps[iz][c];
        best = std::min(best, gr[iz] + sigma * penalty_eval(node.data.penalty, diff));
      }
      nv.QR[ip] = best;
    }
  }
  table.v_prim = table.nodes[0].Q.at(0);
  table.v_reg = table.nodes[0].QR.at(0);
  return table;
}

EnvelopeMinima lipschitz_envelope_minima(const std::vector<Vec>& anchors, const Vec& values, double L,
                                         const PointSet& grid) {
  if (anchors.size() != values.size()) throw Error(ErrorCode::DimensionMismatch, "one value per anchor");
  EnvelopeMinima out{kInf, kInf};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double under = 0.0, over = kInf;
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      const double dist = distance(NormKind::L2, grid[i], anchors[k]);
      under = std::max(under, values[k] - L * dist);
      over = std::min(over, values[k] + L * dist);
    }
    out.under_min = std::min(out.under_min, under);
    out.over_min = std::min(out.over_min, over);
  }
  return out;
}

}  // namespace msddp
