#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace msddp {

using Vec = std::vector<double>;
using ConstVecRef = std::span<const double>;

enum class NormKind { L1, L2, Linf };

std::string_view to_string(NormKind kind);
NormKind norm_from_string(std::string_view name);

double norm(NormKind kind, ConstVecRef v);
/// Norm of the dual space: l1 <-> linf, l2 <-> l2.
double dual_norm(NormKind kind, ConstVecRef v);
double distance(NormKind kind, ConstVecRef a, ConstVecRef b);
double dot(ConstVecRef a, ConstVecRef b);

/// A dense, immutable-after-build list of points of a common dimension.
/// Dimension zero is allowed and holds "empty" points (used for the dummy
/// parent of the root and for stateless leaves).
class PointSet {
 public:
  explicit PointSet(std::size_t dim = 0) : dim_(dim) {}

  void push_back(ConstVecRef point);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }

  ConstVecRef operator[](std::size_t i) const {
    return ConstVecRef(data_.data() + i * dim_, dim_);
  }

  /// Index of the first point within `tol` (linf) of `point`.
  std::optional<std::size_t> find(ConstVecRef point, double tol = 1e-12) const;

  /// Sorts lexicographically and drops exact duplicates.
  void sort_unique();

 private:
  std::size_t dim_;
  std::size_t count_ = 0;
  std::vector<double> data_;
};

enum class SetKind { Box, Ball, Finite, None };

std::string_view to_string(SetKind kind);

/// Compact state space with a uniform evaluation grid.
///
/// Box grids are tensor grids with spacing `h` (the upper end is always
/// included); ball grids are the bounding-box grid intersected with the ball,
/// plus any explicitly supplied extra points; finite sets are their own grid.
/// `None` is the zero-dimensional singleton used where no state is carried.
/// Grid points are kept in lexicographic order, which is the default
/// tie-breaking order of the grid oracles.
class StateSpace {
 public:
  static StateSpace box(Vec lo, Vec hi, double h);
  static StateSpace ball(Vec center, double radius, double h, std::vector<Vec> extra = {});
  static StateSpace finite(std::vector<Vec> points);
  static StateSpace none();

  SetKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  double resolution() const noexcept { return h_; }
  bool is_finite() const noexcept { return kind_ == SetKind::Finite || kind_ == SetKind::None; }

  const Vec& lo() const noexcept { return lo_; }
  const Vec& hi() const noexcept { return hi_; }
  const Vec& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }
  const std::vector<Vec>& points() const noexcept { return points_; }

  /// Number of grid points, computed without materializing the grid (for ball
  /// spaces this is the bounding-box count, an upper bound).
  std::size_t grid_size_estimate() const;
  const PointSet& grid() const;
  /// Euclidean diameter of the set.
  double diameter() const;
  bool contains(ConstVecRef x, double tol = 1e-9) const;

  friend bool operator==(const StateSpace& a, const StateSpace& b);

 private:
  StateSpace() = default;
  void build_grid() const;

  SetKind kind_ = SetKind::None;
  std::size_t dim_ = 0;
  double h_ = 0.0;
  Vec lo_, hi_, center_;
  double radius_ = 0.0;
  std::vector<Vec> points_;  // finite points, or extra points of a ball

  struct GridCache;
  std::shared_ptr<GridCache> cache_;
};

}  // namespace msddp
