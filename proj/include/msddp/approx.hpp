#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "msddp/geometry.hpp"
#include "msddp/model.hpp"

namespace msddp {

/// C(x) = constant - <lambda, anchor - x> - rho * psi(anchor - x)
struct ConjugacyCut {
  Vec anchor;
  Vec lambda;
  double rho = 0.0;
  double constant = 0.0;
  NormKind norm = NormKind::L2;

  double eval(ConstVecRef x) const;
};

/// A function of the state of one node (or stage) that the oracles can use as
/// the cost-to-go term Theta.
class CostToGoModel {
 public:
  CostToGoModel() = default;
  CostToGoModel(CostToGoModel&&) = default;
  CostToGoModel& operator=(CostToGoModel&&) = default;
  virtual ~CostToGoModel() = default;
  virtual std::size_t dim() const = 0;
  virtual double eval(ConstVecRef x) const = 0;
  /// Values at every point of `grid`. The reference stays valid until the
  /// model is next modified.
  virtual const std::vector<double>& eval_grid(const PointSet& grid) const;
  /// Lipschitz constant used in grid-error bounds.
  virtual double lipschitz_bound() const = 0;

 private:
  struct PlainCache {
    std::mutex mutex;
    std::map<const PointSet*, std::vector<double>> values;
  };
  mutable std::unique_ptr<PlainCache> plain_ = std::make_unique<PlainCache>();
};

/// Theta given by an explicit table on a fixed grid (test oracles, exact
/// cost-to-go tables). Off-grid queries use the nearest grid point.
class TableCostToGo final : public CostToGoModel {
 public:
  TableCostToGo(const PointSet& grid, std::vector<double> values, double lipschitz = 0.0);
  std::size_t dim() const override { return grid_->dim(); }
  double eval(ConstVecRef x) const override;
  const std::vector<double>& eval_grid(const PointSet& grid) const override;
  double lipschitz_bound() const override { return lipschitz_; }

 private:
  const PointSet* grid_;
  std::vector<double> values_;
  double lipschitz_;
};

/// Weight, dual bounds and penalty of one child node m of the owner.
struct ChildInfo {
  double weight = 1.0;  // p_{nm}
  DualBounds bounds;
  PenaltySpec penalty;
};

/// Q_(x) = max(0, max over bundles of sum_m p_nm C_m(x)).
class UnderApprox final : public CostToGoModel {
 public:
  UnderApprox(std::size_t dim, std::vector<ChildInfo> children);

  std::size_t dim() const override { return dim_; }
  double eval(ConstVecRef x) const override;
  const std::vector<double>& eval_grid(const PointSet& grid) const override;
  double lipschitz_bound() const override;

  /// One cut per child, in child order. Throws DualBoundViolation,
  /// WeightMismatch (when `weights` differ from the child probabilities) or
  /// DimensionMismatch.
  void add_bundle(std::vector<ConjugacyCut> cuts, const std::vector<double>& weights);
  void add_bundle(std::vector<ConjugacyCut> cuts);

  std::size_t bundle_count() const { return bundles_.size(); }
  const std::vector<std::vector<ConjugacyCut>>& bundles() const { return bundles_; }
  const std::vector<ChildInfo>& children() const { return children_; }

 private:
  double bundle_value(std::size_t b, ConstVecRef x) const;

  struct GridCache {
    std::vector<double> values;
    std::size_t applied = 0;
  };

  std::size_t dim_;
  std::vector<ChildInfo> children_;
  std::vector<std::vector<ConjugacyCut>> bundles_;
  struct Caches {
    std::mutex mutex;
    std::map<const PointSet*, GridCache> grids;
  };
  mutable std::unique_ptr<Caches> caches_ = std::make_unique<Caches>();
};

enum class OverMode { PointwiseMin, ConvexHull };

struct OverPoint {
  Vec anchor;
  double value = 0.0;
  double sigma_eff = 0.0;
};

/// Lipschitz upper envelope of the regularized cost-to-go. Empty means +inf
/// for non-leaf owners and 0 for leaves (which never receive points).
class OverApprox {
 public:
  OverApprox(std::size_t dim, OverMode mode, NormKind norm, bool leaf);

  /// `std::nullopt` stands for +inf.
  std::optional<double> eval(ConstVecRef x) const;
  double eval_pointwise(ConstVecRef x) const;

  /// Throws NonFiniteValue, DimensionMismatch, InvalidConfig (slope differs
  /// from earlier points).
  void add(OverPoint point);

  bool empty() const { return points_.empty(); }
  bool leaf() const { return leaf_; }
  std::size_t dim() const { return dim_; }
  OverMode mode() const { return mode_; }
  NormKind norm() const { return norm_; }
  const std::vector<OverPoint>& points() const { return points_; }
  double lipschitz_bound() const { return points_.empty() ? 0.0 : points_.front().sigma_eff; }

 private:
  std::size_t dim_;
  OverMode mode_;
  NormKind norm_;
  bool leaf_;
  std::vector<OverPoint> points_;
};

/// min over mu in the simplex of sum_j mu_j v_j + sigma |x - sum_j mu_j x_j|,
/// the convex envelope of the cones v_j + sigma |x - x_j| at x. Returns an
/// upper bound within 1e-10 relative of the exact value.
double convex_envelope_value(const std::vector<OverPoint>& points, NormKind norm, ConstVecRef x);

}  // namespace msddp
