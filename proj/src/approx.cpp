#include "msddp/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msddp/error.hpp"
#include "msddp/lp.hpp"

namespace msddp {

double ConjugacyCut::eval(ConstVecRef x) const {
  if (x.size() != anchor.size()) throw Error(ErrorCode::DimensionMismatch, "cut evaluated at wrong dimension");
  double inner = 0.0, pen = 0.0;
  Vec diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    diff[i] = anchor[i] - x[i];
    if (!lambda.empty()) inner += lambda[i] * diff[i];
  }
  if (rho != 0.0) pen = rho * msddp::norm(this->norm, diff);
  return constant - inner - pen;
}

const std::vector<double>& CostToGoModel::eval_grid(const PointSet& grid) const {
  std::lock_guard<std::mutex> lock(plain_->mutex);
  auto it = plain_->values.find(&grid);
  if (it != plain_->values.end() && it->second.size() == grid.size()) return it->second;
  std::vector<double> values(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) values[k] = eval(grid[k]);
  return plain_->values[&grid] = std::move(values);
}

// ---------------------------------------------------------------------------

TableCostToGo::TableCostToGo(const PointSet& grid, std::vector<double> values, double lipschitz)
    : grid_(&grid), values_(std::move(values)), lipschitz_(lipschitz) {
  if (values_.size() != grid.size()) throw Error(ErrorCode::DimensionMismatch, "table size differs from grid size");
}

double TableCostToGo::eval(ConstVecRef x) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid_->size(); ++k) {
    const double d = distance(NormKind::L2, (*grid_)[k], x);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return values_[best];
}

const std::vector<double>& TableCostToGo::eval_grid(const PointSet& grid) const {
  if (&grid == grid_) return values_;
  return CostToGoModel::eval_grid(grid);
}

// ---------------------------------------------------------------------------

UnderApprox::UnderApprox(std::size_t dim, std::vector<ChildInfo> children)
    : dim_(dim), children_(std::move(children)) {}

double UnderApprox::bundle_value(std::size_t b, ConstVecRef x) const {
  double total = 0.0;
  const auto& bundle = bundles_[b];
  for (std::size_t m = 0; m < bundle.size(); ++m) total += children_[m].weight * bundle[m].eval(x);
  return total;
}

double UnderApprox::eval(ConstVecRef x) const {
  if (x.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "under-approximation evaluated at wrong dimension");
  double best = 0.0;
  for (std::size_t b = 0; b < bundles_.size(); ++b) best = std::max(best, bundle_value(b, x));
  return best;
}

const std::vector<double>& UnderApprox::eval_grid(const PointSet& grid) const {
  if (grid.dim() != dim_) throw Error(ErrorCode::DimensionMismatch, "under-approximation grid has wrong dimension");
  std::lock_guard<std::mutex> lock(caches_->mutex);
  GridCache& cache = caches_->grids[&grid];
  if (cache.values.size() != grid.size()) {
    cache.values.assign(grid.size(), 0.0);
    cache.applied = 0;
  }
  for (; cache.applied < bundles_.size(); ++cache.applied) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      cache.values[k] = std::max(cache.values[k], bundle_value(cache.applied, grid[k]));
    }
  }
  return cache.values;
}

double UnderApprox::lipschitz_bound() const {
  double total = 0.0;
  for (const auto& c : children_) total += c.weight * (c.bounds.l_lambda + c.bounds.l_rho);
  return total;
}

void UnderApprox::add_bundle(std::vector<ConjugacyCut> cuts, const std::vector<double>& weights) {
  if (weights.size() != children_.size()) {
    throw Error(ErrorCode::WeightMismatch, "bundle has " + std::to_string(weights.size()) + " weights for " +
                                               std::to_string(children_.size()) + " children");
  }
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (std::abs(weights[m] - children_[m].weight) > 1e-12) {
      throw Error(ErrorCode::WeightMismatch, "bundle weight differs from the child transition probability");
    }
  }
  add_bundle(std::move(cuts));
}

void UnderApprox::add_bundle(std::vector<ConjugacyCut> cuts) {
  if (cuts.size() != children_.size()) {
    throw Error(ErrorCode::WeightMismatch, "bundle must hold one cut per child");
  }
  for (std::size_t m = 0; m < cuts.size(); ++m) {
    ConjugacyCut& cut = cuts[m];
    const ChildInfo& child = children_[m];
    if (cut.anchor.size() != dim_ || (!cut.lambda.empty() && cut.lambda.size() != dim_)) {
      throw Error(ErrorCode::DimensionMismatch, "cut dimension differs from the state dimension");
    }
    if (cut.lambda.empty()) cut.lambda.assign(dim_, 0.0);
    cut.norm = child.penalty.norm;
    if (dual_norm(cut.norm, cut.lambda) > child.bounds.l_lambda + 1e-9) {
      throw Error(ErrorCode::DualBoundViolation, "cut multiplier exceeds its dual-norm bound");
    }
    if (cut.rho < -1e-9 || cut.rho > child.bounds.l_rho + 1e-9) {
      throw Error(ErrorCode::DualBoundViolation, "cut penalty weight outside [0, l_rho]");
    }
    if (!std::isfinite(cut.constant)) throw Error(ErrorCode::NonFiniteValue, "cut constant is not finite");
  }
  std::lock_guard<std::mutex> lock(caches_->mutex);
  bundles_.push_back(std::move(cuts));
}

// ---------------------------------------------------------------------------

OverApprox::OverApprox(std::size_t dim, OverMode mode, NormKind norm, bool leaf)
    : dim_(dim), mode_(mode), norm_(norm), leaf_(leaf) {}

double OverApprox::eval_pointwise(ConstVecRef x) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points_) best = std::min(best, p.value + p.sigma_eff * distance(norm_, x, p.anchor));
  return best;
}

std::optional<double> OverApprox::eval(ConstVecRef x) const {
  if (x.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "over-approximation evaluated at wrong dimension");
  if (points_.empty()) {
    if (leaf_) return 0.0;
    return std::nullopt;
  }
  const double pointwise = eval_pointwise(x);
  if (mode_ == OverMode::PointwiseMin || points_.size() == 1) return pointwise;
  return std::min(pointwise, convex_envelope_value(points_, norm_, x));
}

void OverApprox::add(OverPoint point) {
  if (leaf_) throw Error(ErrorCode::InvalidConfig, "leaf over-approximations are identically zero");
  if (!std::isfinite(point.value)) throw Error(ErrorCode::NonFiniteValue, "over-approximation value is not finite");
  if (point.anchor.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "over point has wrong dimension");
  if (!points_.empty() && std::abs(point.sigma_eff - points_.front().sigma_eff) > 1e-12) {
    throw Error(ErrorCode::InvalidConfig, "over points of one approximation must share the slope");
  }
  points_.push_back(std::move(point));
}

// ---------------------------------------------------------------------------

double convex_envelope_value(const std::vector<OverPoint>& points, NormKind norm_kind, ConstVecRef x) {
  if (points.empty()) return std::numeric_limits<double>::infinity();
  const std::size_t d = x.size();
  const double sigma = points.front().sigma_eff;
  double min_value = std::numeric_limits<double>::infinity();
  for (const auto& p : points) min_value = std::min(min_value, p.value);
  if (d == 0 || sigma == 0.0) return min_value;

  // Dual form: max s  s.t.  s + <lambda, x_j - x> <= v_j,  |lambda|_* <= sigma.
  // Variables: lambda+ (d), lambda- (d), s+, s-.
  const std::size_t n = 2 * d + 2;
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (const auto& p : points) {
    std::vector<double> row(n, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double c = p.anchor[i] - x[i];
      row[i] = c;
      row[d + i] = -c;
    }
    row[2 * d] = 1.0;
    row[2 * d + 1] = -1.0;
    A.push_back(std::move(row));
    b.push_back(p.value);
  }
  const bool polyhedral_l1_dual = norm_kind == NormKind::Linf;
  if (polyhedral_l1_dual) {
    std::vector<double> row(n, 0.0);
    for (std::size_t i = 0; i < 2 * d; ++i) row[i] = 1.0;
    A.push_back(std::move(row));
    b.push_back(sigma);
  } else {
    for (std::size_t i = 0; i < 2 * d; ++i) {
      std::vector<double> row(n, 0.0);
      row[i] = 1.0;
      A.push_back(std::move(row));
      b.push_back(sigma);
    }
  }
  std::vector<double> c(n, 0.0);
  c[2 * d] = 1.0;
  c[2 * d + 1] = -1.0;

  const bool exact = norm_kind != NormKind::L2 || d == 1;
  constexpr int kMaxRounds = 400;
  double upper = std::numeric_limits<double>::infinity();
  for (int round = 0; round < kMaxRounds; ++round) {
    const LpResult res = solve_lp(A, b, c);
    if (res.status != LpStatus::Optimal) return std::numeric_limits<double>::infinity();
    upper = res.objective;
    if (exact) return upper;
    Vec lambda(d);
    for (std::size_t i = 0; i < d; ++i) lambda[i] = res.x[i] - res.x[d + i];
    const double len = norm(NormKind::L2, lambda);
    if (len <= sigma * (1.0 + 1e-12)) return upper;
    // Feasible dual point gives a lower bound; stop once the bracket is tight.
    Vec scaled(d);
    for (std::size_t i = 0; i < d; ++i) scaled[i] = lambda[i] * sigma / len;
    double lower = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
      double inner = 0.0;
      for (std::size_t i = 0; i < d; ++i) inner += scaled[i] * (p.anchor[i] - x[i]);
      lower = std::min(lower, p.value - inner);
    }
    if (upper - lower <= 1e-10 * (1.0 + std::abs(upper))) return upper;
    std::vector<double> row(n, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      row[i] = lambda[i] / len;
      row[d + i] = -lambda[i] / len;
    }
    A.push_back(std::move(row));
    b.push_back(sigma);
  }
  return upper;
}

}  // namespace msddp
