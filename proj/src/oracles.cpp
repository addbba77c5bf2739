#include "msddp/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msddp/error.hpp"

namespace msddp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double tie_tolerance(double best) { return 1e-12 * std::max(1.0, std::abs(best)); }

Vec to_vec(ConstVecRef v) { return Vec(v.begin(), v.end()); }

double inner_shift(const Vec& lambda, ConstVecRef xp, ConstVecRef z) {
  double acc = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) acc += lambda[i] * (xp[i] - z[i]);
  return acc;
}

double penalty_between(NormKind kind, ConstVecRef xp, ConstVecRef z) { return distance(kind, xp, z); }

void clamp_to_dual_ball(Vec& lambda, NormKind kind, double radius) {
  const double len = dual_norm(kind, lambda);
  if (len > radius && len > 0.0) {
    for (double& c : lambda) c *= radius / len;
  }
}

}  // namespace

GridOracle::GridOracle(NodeData data, StateSpace parent_space, GridOracleOptions options)
    : data_(std::move(data)), parent_space_(std::move(parent_space)), options_(options) {
  if (!data_.cost) throw Error(ErrorCode::InvalidConfig, "oracle needs a cost");
  const double nz = static_cast<double>(parent_space_.grid_size_estimate());
  const double nx = static_cast<double>(data_.state_space.grid_size_estimate());
  const double ny = static_cast<double>(data_.internal.grid_size_estimate());
  const double limit = static_cast<double>(options_.max_grid_points);
  const bool too_large = data_.cost->separable() ? (nz > limit || nx * ny > limit) : (nz * nx * ny > limit);
  if (too_large) {
    throw Error(ErrorCode::GridTooLarge, "node enumeration exceeds " + std::to_string(options_.max_grid_points) +
                                             " grid points");
  }
  zs_ = &parent_space_.grid();
  ys_ = &data_.internal.grid();
  xs_ = &data_.state_space.grid();
  if (data_.cost->separable()) prepare_separable();
}

void GridOracle::prepare_separable() {
  z_part_.assign(zs_->size(), kInf);
  for (std::size_t k = 0; k < zs_->size(); ++k) {
    if (const auto v = data_.cost->z_part((*zs_)[k])) z_part_[k] = *v;
  }
  x_part_.assign(xs_->size(), kInf);
  x_part_arg_.assign(xs_->size(), 0);
  for (std::size_t k = 0; k < xs_->size(); ++k) {
    for (std::size_t j = 0; j < ys_->size(); ++j) {
      const auto v = data_.cost->yx_part((*ys_)[j], (*xs_)[k]);
      if (v && *v < x_part_[k]) {
        x_part_[k] = *v;
        x_part_arg_[k] = j;
      }
    }
  }
}

GridOracle::Choice GridOracle::minimize(ConstVecRef x_parent, const Vec& lambda, double weight,
                                        const std::vector<double>& theta, bool adversarial) {
  if (x_parent.size() != zs_->dim()) throw Error(ErrorCode::DimensionMismatch, "parent state has wrong dimension");
  const NormKind kind = data_.penalty.norm;
  auto coupling = [&](std::size_t iz) {
    const auto z = (*zs_)[iz];
    double v = inner_shift(lambda, x_parent, z);
    if (weight != 0.0) v += weight * penalty_between(kind, x_parent, z);
    return v;
  };
  auto score = [&](std::size_t ix) {
    double best = kInf;
    for (const auto& a : history_) best = std::min(best, distance(NormKind::L2, (*xs_)[ix], a));
    return best;
  };

  Choice choice;
  if (data_.cost->separable()) {
    std::vector<double> a(zs_->size());
    double best_a = kInf;
    for (std::size_t k = 0; k < zs_->size(); ++k) {
      a[k] = z_part_[k] == kInf ? kInf : z_part_[k] + coupling(k);
      best_a = std::min(best_a, a[k]);
    }
    std::vector<double> b(xs_->size());
    double best_b = kInf;
    for (std::size_t k = 0; k < xs_->size(); ++k) {
      b[k] = x_part_[k] == kInf ? kInf : x_part_[k] + theta[k];
      best_b = std::min(best_b, b[k]);
    }
    if (best_a == kInf || best_b == kInf) throw Error(ErrorCode::InfeasibleNode, "every grid point is infeasible");
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k] <= best_a + tie_tolerance(best_a)) {
        choice.z = k;
        break;
      }
    }
    double best_score = -1.0;
    bool found = false;
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (b[k] > best_b + tie_tolerance(best_b)) continue;
      if (!adversarial) {
        choice.x = k;
        found = true;
        break;
      }
      const double s = score(k);
      if (!found || s > best_score) {
        best_score = s;
        choice.x = k;
        found = true;
      }
    }
    choice.y = x_part_arg_[choice.x];
    choice.value = a[choice.z] + b[choice.x];
    return choice;
  }

  // Non-separable: enumerate (z, x), minimizing over y inside.
  auto pair_value = [&](std::size_t iz, std::size_t ix, std::size_t& arg_y) {
    double best = kInf;
    for (std::size_t j = 0; j < ys_->size(); ++j) {
      const auto v = data_.cost->eval((*zs_)[iz], (*ys_)[j], (*xs_)[ix]);
      if (v && *v < best) {
        best = *v;
        arg_y = j;
      }
    }
    return best;
  };
  const std::size_t nz = zs_->size(), nx = xs_->size();
  std::vector<double> values(nz * nx, kInf);
  std::vector<std::size_t> args(nz * nx, 0);
  double best = kInf;
  for (std::size_t iz = 0; iz < nz; ++iz) {
    const double c = coupling(iz);
    for (std::size_t ix = 0; ix < nx; ++ix) {
      std::size_t arg = 0;
      const double f = pair_value(iz, ix, arg);
      if (f == kInf) continue;
      const double v = f + c + theta[ix];
      values[iz * nx + ix] = v;
      args[iz * nx + ix] = arg;
      best = std::min(best, v);
    }
  }
  if (best == kInf) throw Error(ErrorCode::InfeasibleNode, "every grid point is infeasible");
  double best_score = -1.0;
  bool found = false;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] > best + tie_tolerance(best)) continue;
    if (!adversarial) {
      choice.z = k / nx;
      choice.x = k % nx;
      found = true;
      break;
    }
    const double s = score(k % nx);
    if (!found || s > best_score) {
      best_score = s;
      choice.z = k / nx;
      choice.x = k % nx;
      found = true;
    }
  }
  choice.y = args[choice.z * nx + choice.x];
  choice.value = values[choice.z * nx + choice.x];
  return choice;
}

std::vector<double> GridOracle::reduced(const std::vector<double>& theta) {
  std::vector<double> r(zs_->size(), kInf);
  if (data_.cost->separable()) {
    double best_b = kInf;
    for (std::size_t k = 0; k < xs_->size(); ++k) {
      if (x_part_[k] != kInf) best_b = std::min(best_b, x_part_[k] + theta[k]);
    }
    for (std::size_t k = 0; k < zs_->size(); ++k) {
      if (z_part_[k] != kInf && best_b != kInf) r[k] = z_part_[k] + best_b;
    }
    return r;
  }
  for (std::size_t iz = 0; iz < zs_->size(); ++iz) {
    for (std::size_t ix = 0; ix < xs_->size(); ++ix) {
      for (std::size_t j = 0; j < ys_->size(); ++j) {
        const auto v = data_.cost->eval((*zs_)[iz], (*ys_)[j], (*xs_)[ix]);
        if (v) r[iz] = std::min(r[iz], *v + theta[ix]);
      }
    }
  }
  return r;
}

double GridOracle::grid_error(const CostToGoModel& theta) const {
  const double h = std::max(parent_space_.resolution(), data_.state_space.resolution());
  if (h == 0.0) return 0.0;
  return h * (data_.cost->lipschitz_z() + data_.penalty.sigma + theta.lipschitz_bound());
}

ForwardSolution GridOracle::forward(ConstVecRef x_parent, const CostToGoModel& theta) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto& th = theta.eval_grid(*xs_);
  const Vec zero(zs_->dim(), 0.0);
  const Choice c = minimize(x_parent, zero, data_.penalty.sigma, th, options_.adversarial);
  ForwardSolution out;
  out.z = to_vec((*zs_)[c.z]);
  out.x = to_vec((*xs_)[c.x]);
  out.y = to_vec((*ys_)[c.y]);
  out.objective = c.value;
  out.grid_error = grid_error(theta);
  history_.push_back(out.x);
  return out;
}

BackwardSolution GridOracle::backward(ConstVecRef x_parent, const CostToGoModel& theta) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto& th = theta.eval_grid(*xs_);
  const std::size_t d = zs_->dim();
  BackwardSolution out;
  out.grid_error = grid_error(theta);

  auto fill = [&](const Choice& c) {
    out.z = to_vec((*zs_)[c.z]);
    out.x = to_vec((*xs_)[c.x]);
    out.y = to_vec((*ys_)[c.y]);
    out.saddle_value = c.value;
  };

  if (!data_.convex) {
    out.lambda.assign(d, 0.0);
    out.rho = data_.dual_bounds.l_rho;
    fill(minimize(x_parent, out.lambda, out.rho, th, false));
    return out;
  }

  // Convex mode: rho = 0, lambda from a finite candidate set.
  const double l_lambda = data_.dual_bounds.l_lambda;
  const NormKind kind = data_.penalty.norm;
  std::vector<Vec> candidates{Vec(d, 0.0)};
  if (d > 0 && l_lambda > 0.0) {
    const std::vector<double> r = reduced(th);
    auto phi = [&](const Vec& u) {
      double best = kInf;
      for (std::size_t k = 0; k < zs_->size(); ++k) {
        if (r[k] != kInf) best = std::min(best, r[k] + l_lambda * distance(kind, u, (*zs_)[k]));
      }
      return best;
    };
    const double step = parent_space_.resolution() > 0.0 ? parent_space_.resolution() : 1e-3;
    const Vec base = to_vec(x_parent);
    const double phi0 = phi(base);
    Vec central(d), forward_diff(d), backward_diff(d);
    for (std::size_t i = 0; i < d; ++i) {
      Vec up = base, down = base;
      up[i] += step;
      down[i] -= step;
      const double fu = phi(up), fd = phi(down);
      central[i] = (fu - fd) / (2.0 * step);
      forward_diff[i] = (fu - phi0) / step;
      backward_diff[i] = (phi0 - fd) / step;
    }
    for (Vec* g : {&central, &forward_diff, &backward_diff}) {
      bool finite = true;
      for (double c : *g) finite = finite && std::isfinite(c);
      if (!finite) continue;
      clamp_to_dual_ball(*g, kind, l_lambda);
      candidates.push_back(*g);
    }
    const int q = std::max(1, options_.dual_axis_candidates);
    for (std::size_t i = 0; i < d; ++i) {
      for (int k = 1; k <= q; ++k) {
        for (double sign : {1.0, -1.0}) {
          Vec v(d, 0.0);
          v[i] = sign * l_lambda * k / q;
          candidates.push_back(std::move(v));
        }
      }
    }
  }
  bool have = false;
  Choice best;
  for (const Vec& lambda : candidates) {
    const Choice c = minimize(x_parent, lambda, 0.0, th, false);
    if (!have || c.value > best.value) {
      best = c;
      out.lambda = lambda;
      have = true;
    }
  }
  out.rho = 0.0;
  fill(best);
  return out;
}

RootSolution GridOracle::root(const CostToGoModel& theta) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto& th = theta.eval_grid(*xs_);
  if (zs_->size() != 1) throw Error(ErrorCode::InvalidConfig, "root oracle needs a single parent point");
  const Vec xp = to_vec((*zs_)[0]);
  const Choice c = minimize(xp, Vec(xp.size(), 0.0), 0.0, th, options_.adversarial);
  RootSolution out;
  out.x = to_vec((*xs_)[c.x]);
  out.y = to_vec((*ys_)[c.y]);
  out.objective = c.value;
  history_.push_back(out.x);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct CapShape {
  double offset, radius;
};

CapShape cap_shape(const NodeData& data) {
  if (!data.cost || data.cost->family() != "quadratic_cap") {
    throw Error(ErrorCode::InvalidConfig, "analytic cap oracle needs a quadratic_cap cost");
  }
  return {data.cost->params().at("offset").get<double>(), data.cost->params().at("radius").get<double>()};
}

void require_scalar(ConstVecRef x_parent) {
  if (x_parent.size() != 1) throw Error(ErrorCode::DimensionMismatch, "analytic leaf oracles take a scalar state");
}

}  // namespace

ConvexCapLeafOracle::ConvexCapLeafOracle(NodeData data) : data_(std::move(data)) { cap_shape(data_); }

ForwardSolution ConvexCapLeafOracle::forward(ConstVecRef x_parent, const CostToGoModel&) {
  require_scalar(x_parent);
  const auto [c, r] = cap_shape(data_);
  const double sigma = data_.penalty.sigma;
  const double xp = x_parent[0];
  const double kink = sigma * r / std::sqrt(1.0 + sigma * sigma);
  const double z = std::min(xp, kink);
  ForwardSolution out;
  out.z = {z};
  out.objective = c - std::sqrt(std::max(0.0, r * r - z * z)) + sigma * std::abs(xp - z);
  return out;
}

BackwardSolution ConvexCapLeafOracle::backward(ConstVecRef x_parent, const CostToGoModel& theta) {
  require_scalar(x_parent);
  const auto [c, r] = cap_shape(data_);
  const double xp = x_parent[0];
  BackwardSolution out;
  if (!data_.convex) {
    const double rho = data_.dual_bounds.l_rho;
    const double kink = rho * r / std::sqrt(1.0 + rho * rho);
    const double z = std::min(xp, kink);
    out.z = {z};
    out.lambda = {0.0};
    out.rho = rho;
    out.saddle_value = c - std::sqrt(std::max(0.0, r * r - z * z)) + rho * std::abs(xp - z);
    return out;
  }
  (void)theta;
  const double sigma = data_.penalty.sigma;
  const double kink = sigma * r / std::sqrt(1.0 + sigma * sigma);
  double lambda = xp < kink ? xp / std::sqrt(r * r - xp * xp) : sigma;
  lambda = std::clamp(lambda, -data_.dual_bounds.l_lambda, data_.dual_bounds.l_lambda);
  // Inner minimizer of Q(z) - lambda z: Q'(z) = lambda.
  const double z = std::clamp(lambda * r / std::sqrt(1.0 + lambda * lambda), 0.0, r);
  out.z = {z};
  out.lambda = {lambda};
  out.rho = 0.0;
  out.saddle_value = c - std::sqrt(std::max(0.0, r * r - z * z)) + lambda * (xp - z);
  return out;
}

RootSolution ConvexCapLeafOracle::root(const CostToGoModel&) {
  throw Error(ErrorCode::InvalidConfig, "analytic leaf oracle has no root problem");
}

IntegerCoverLeafOracle::IntegerCoverLeafOracle(NodeData data) : data_(std::move(data)) {
  if (!data_.cost || data_.cost->family() != "integer_cover") {
    throw Error(ErrorCode::InvalidConfig, "analytic cover oracle needs an integer_cover cost");
  }
}

namespace {

// min over z in [0, 1] of Q(z) + w |xp - z| with Q = 0 at 0 and 1 elsewhere.
std::pair<double, double> cover_min(double xp, double w) {
  const double at_zero = w * std::abs(xp);
  const double at_xp = xp > 1e-12 ? 1.0 : 0.0;
  if (at_zero <= at_xp + 1e-12) return {0.0, at_zero};
  return {xp, at_xp};
}

}  // namespace

ForwardSolution IntegerCoverLeafOracle::forward(ConstVecRef x_parent, const CostToGoModel&) {
  require_scalar(x_parent);
  const auto [z, value] = cover_min(x_parent[0], data_.penalty.sigma);
  ForwardSolution out;
  out.z = {z};
  out.y = {z > 1e-12 ? 1.0 : 0.0};
  out.objective = value;
  return out;
}

BackwardSolution IntegerCoverLeafOracle::backward(ConstVecRef x_parent, const CostToGoModel&) {
  require_scalar(x_parent);
  const double rho = data_.dual_bounds.l_rho;
  const auto [z, value] = cover_min(x_parent[0], rho);
  BackwardSolution out;
  out.z = {z};
  out.y = {z > 1e-12 ? 1.0 : 0.0};
  out.lambda = {0.0};
  out.rho = rho;
  out.saddle_value = value;
  return out;
}

RootSolution IntegerCoverLeafOracle::root(const CostToGoModel&) {
  throw Error(ErrorCode::InvalidConfig, "analytic leaf oracle has no root problem");
}

// ---------------------------------------------------------------------------

OracleSet make_grid_oracles(const ScenarioTree& tree, GridOracleOptions options) {
  OracleSet set;
  set.adversarial = options.adversarial;
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    set.nodes.push_back(
        std::make_shared<GridOracle>(tree.nodes()[i].data, tree.parent_space(static_cast<int>(i)), options));
  }
  return set;
}

OracleSet make_analytic_oracles(const ScenarioTree& tree, const std::string& name, GridOracleOptions options) {
  if (name != "convex_cap" && name != "integer_cover") {
    throw Error(ErrorCode::InvalidConfig, "unknown analytic oracle '" + name + "'");
  }
  OracleSet set;
  set.adversarial = options.adversarial;
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const TreeNode& node = tree.nodes()[i];
    if (node.is_leaf() && node.parent >= 0) {
      if (name == "convex_cap") {
        set.nodes.push_back(std::make_shared<ConvexCapLeafOracle>(node.data));
      } else {
        set.nodes.push_back(std::make_shared<IntegerCoverLeafOracle>(node.data));
      }
    } else {
      set.nodes.push_back(std::make_shared<GridOracle>(node.data, tree.parent_space(static_cast<int>(i)), options));
    }
  }
  return set;
}

}  // namespace msddp
