#pragma once

// Reference computations used only by the tests. They are written
// independently of the library's DP and LP code: closed forms, exhaustive
// enumeration and plain sampling.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "msddp/model.hpp"

namespace ref {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// 1 - sqrt(1 - x^2) on [0, 1].
inline double cap_value(double x) { return 1.0 - std::sqrt(std::max(0.0, 1.0 - x * x)); }

/// min over z in [0, 1] of cap_value(z) + sigma |x - z|, by dense sampling.
inline double cap_regularized(double x, double sigma, int samples = 200000) {
  double best = kInf;
  for (int i = 0; i <= samples; ++i) {
    const double z = static_cast<double>(i) / samples;
    best = std::min(best, cap_value(z) + sigma * std::abs(x - z));
  }
  return best;
}

/// 0 at x = 0 and 1 on (0, 1].
inline double cover_value(double x) { return x > 0.0 ? 1.0 : 0.0; }

/// min over z in [0, 1] of cover_value(z) + sigma |x - z|.
inline double cover_regularized(double x, double sigma) { return x > 0.0 ? std::min(1.0, sigma * x) : 0.0; }

/// Optimal value of a chain with finite state sets by enumerating every
/// state sequence (no dynamic programming).
inline double exhaustive_chain_value(const msddp::ScenarioTree& tree) {
  const int T = tree.horizon();
  std::vector<int> chain;
  for (int t = 0; t <= T; ++t) {
    if (tree.stage_nodes(t).size() != 1) throw std::runtime_error("not a chain");
    chain.push_back(tree.stage_nodes(t).front());
  }
  std::vector<const msddp::PointSet*> grids;
  for (int n : chain) grids.push_back(&tree.node(n).data.state_space.grid());
  const msddp::PointSet& root_parent = tree.parent_space(0).grid();

  std::vector<std::size_t> idx(chain.size(), 0);
  double best = kInf;
  while (true) {
    double total = 0.0;
    for (std::size_t t = 0; t < chain.size() && std::isfinite(total); ++t) {
      const auto z = t == 0 ? root_parent[0] : (*grids[t - 1])[idx[t - 1]];
      const auto x = (*grids[t])[idx[t]];
      const auto& data = tree.node(chain[t]).data;
      const msddp::PointSet& ys = data.internal.grid();
      double stage = kInf;
      for (std::size_t iy = 0; iy < ys.size(); ++iy) {
        if (auto v = data.cost->eval(z, ys[iy], x)) stage = std::min(stage, *v);
      }
      total += stage;
    }
    best = std::min(best, total);
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == grids[k]->size()) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  return best;
}

/// min over mu in [0, 1] and pairs (i, j) of mu v_i + (1 - mu) v_j + sigma |x - mu x_i - (1 - mu) x_j|
/// for one-dimensional anchors (two points suffice on the line).
inline double envelope_1d(const std::vector<double>& xs, const std::vector<double>& vs, double sigma, double x,
                          int steps = 2000) {
  double best = kInf;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xs.size(); ++j) {
      for (int k = 0; k <= steps; ++k) {
        const double mu = static_cast<double>(k) / steps;
        const double c = mu * xs[i] + (1.0 - mu) * xs[j];
        best = std::min(best, mu * vs[i] + (1.0 - mu) * vs[j] + sigma * std::abs(x - c));
      }
    }
  }
  return best;
}

/// Largest ratio |f(a) - f(b)| / |a - b| over random pairs drawn from `points`.
inline double max_slope(const std::vector<msddp::Vec>& points, const std::function<double(const msddp::Vec&)>& f,
                        msddp::NormKind norm, int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const auto& a = points[rng() % points.size()];
    const auto& b = points[rng() % points.size()];
    const double dist = msddp::distance(norm, a, b);
    if (dist <= 0.0) continue;
    worst = std::max(worst, std::abs(f(a) - f(b)) / dist);
  }
  return worst;
}

}  // namespace ref
