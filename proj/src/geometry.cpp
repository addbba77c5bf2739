#include "msddp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include "msddp/error.hpp"

namespace msddp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
    case ErrorCode::OrphanNode: return "OrphanNode";
    case ErrorCode::BadProbability: return "BadProbability";
    case ErrorCode::NegativeCost: return "NegativeCost";
    case ErrorCode::BadTree: return "BadTree";
    case ErrorCode::NotStagewiseIndependent: return "NotStagewiseIndependent";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DualBoundViolation: return "DualBoundViolation";
    case ErrorCode::WeightMismatch: return "WeightMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptyOverApprox: return "EmptyOverApprox";
    case ErrorCode::InfeasibleNode: return "InfeasibleNode";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::BadDepth: return "BadDepth";
    case ErrorCode::CandidateSetTooSparse: return "CandidateSetTooSparse";
    case ErrorCode::NotFiniteState: return "NotFiniteState";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownCostFamily: return "UnknownCostFamily";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(NormKind kind) {
  switch (kind) {
    case NormKind::L1: return "l1";
    case NormKind::L2: return "l2";
    case NormKind::Linf: return "linf";
  }
  return "l2";
}

NormKind norm_from_string(std::string_view name) {
  if (name == "l1") return NormKind::L1;
  if (name == "l2") return NormKind::L2;
  if (name == "linf") return NormKind::Linf;
  throw Error(ErrorCode::SchemaError, "unknown norm '" + std::string(name) + "'");
}

double norm(NormKind kind, ConstVecRef v) {
  double acc = 0.0;
  switch (kind) {
    case NormKind::L1:
      for (double c : v) acc += std::abs(c);
      return acc;
    case NormKind::L2:
      for (double c : v) acc += c * c;
      return std::sqrt(acc);
    case NormKind::Linf:
      for (double c : v) acc = std::max(acc, std::abs(c));
      return acc;
  }
  return acc;
}

double dual_norm(NormKind kind, ConstVecRef v) {
  switch (kind) {
    case NormKind::L1: return norm(NormKind::Linf, v);
    case NormKind::Linf: return norm(NormKind::L1, v);
    case NormKind::L2: return norm(NormKind::L2, v);
  }
  return 0.0;
}

double distance(NormKind kind, ConstVecRef a, ConstVecRef b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "distance between vectors of different size");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    switch (kind) {
      case NormKind::L1: acc += std::abs(d); break;
      case NormKind::L2: acc += d * d; break;
      case NormKind::Linf: acc = std::max(acc, std::abs(d)); break;
    }
  }
  return kind == NormKind::L2 ? std::sqrt(acc) : acc;
}

double dot(ConstVecRef a, ConstVecRef b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "inner product of vectors of different size");
  }
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// ---------------------------------------------------------------------------

void PointSet::push_back(ConstVecRef point) {
  if (point.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "point dimension does not match point set");
  }
  data_.insert(data_.end(), point.begin(), point.end());
  ++count_;
}

std::optional<std::size_t> PointSet::find(ConstVecRef point, double tol) const {
  if (point.size() != dim_) return std::nullopt;
  for (std::size_t i = 0; i < count_; ++i) {
    const auto p = (*this)[i];
    bool same = true;
    for (std::size_t k = 0; k < dim_ && same; ++k) same = std::abs(p[k] - point[k]) <= tol;
    if (same) return i;
  }
  return std::nullopt;
}

void PointSet::sort_unique() {
  if (dim_ == 0) {
    count_ = std::min<std::size_t>(count_, 1);
    return;
  }
  std::vector<std::size_t> order(count_);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(data_.begin() + a * dim_, data_.begin() + (a + 1) * dim_,
                                        data_.begin() + b * dim_, data_.begin() + (b + 1) * dim_);
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<double> sorted;
  sorted.reserve(data_.size());
  std::size_t kept = 0;
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    const std::size_t i = order[idx];
    if (kept > 0 &&
        std::equal(data_.begin() + i * dim_, data_.begin() + (i + 1) * dim_, sorted.end() - dim_)) {
      continue;
    }
    sorted.insert(sorted.end(), data_.begin() + i * dim_, data_.begin() + (i + 1) * dim_);
    ++kept;
  }
  data_ = std::move(sorted);
  count_ = kept;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SetKind kind) {
  switch (kind) {
    case SetKind::Box: return "box";
    case SetKind::Ball: return "ball";
    case SetKind::Finite: return "finite";
    case SetKind::None: return "none";
  }
  return "none";
}

struct StateSpace::GridCache {
  std::once_flag once;
  PointSet grid;
};

namespace {

std::size_t axis_count(double lo, double hi, double h) {
  if (hi <= lo) return 1;
  return static_cast<std::size_t>(std::llround(std::ceil((hi - lo) / h - 1e-9))) + 1;
}

double axis_point(double lo, double hi, std::size_t k, std::size_t n) {
  if (n == 1) return lo;
  if (k + 1 == n) return hi;
  // The last interval may be shorter than h when (hi - lo) / h is fractional.
  return lo + static_cast<double>(k) * ((hi - lo) / static_cast<double>(n - 1));
}

}  // namespace

StateSpace StateSpace::box(Vec lo, Vec hi, double h) {
  if (lo.size() != hi.size() || lo.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "box bounds must be nonempty and of equal size");
  }
  if (!(h > 0.0)) throw Error(ErrorCode::BadParams, "grid resolution must be positive");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= hi[i])) throw Error(ErrorCode::BadParams, "box with lo > hi");
  }
  StateSpace s;
  s.kind_ = SetKind::Box;
  s.dim_ = lo.size();
  s.h_ = h;
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  s.cache_ = std::make_shared<GridCache>();
  return s;
}

StateSpace StateSpace::ball(Vec center, double radius, double h, std::vector<Vec> extra) {
  if (center.empty()) throw Error(ErrorCode::DimensionMismatch, "ball center must be nonempty");
  if (!(radius > 0.0) || !(h > 0.0)) {
    throw Error(ErrorCode::BadParams, "ball radius and resolution must be positive");
  }
  StateSpace s;
  s.kind_ = SetKind::Ball;
  s.dim_ = center.size();
  s.h_ = h;
  s.center_ = std::move(center);
  s.radius_ = radius;
  for (auto& p : extra) {
    if (p.size() != s.dim_) throw Error(ErrorCode::DimensionMismatch, "extra ball point dimension");
    if (!s.contains(p, 1e-9)) throw Error(ErrorCode::BadParams, "extra ball point outside the ball");
  }
  s.points_ = std::move(extra);
  s.cache_ = std::make_shared<GridCache>();
  return s;
}

StateSpace StateSpace::finite(std::vector<Vec> points) {
  if (points.empty()) throw Error(ErrorCode::BadParams, "finite state space must be nonempty");
  StateSpace s;
  s.kind_ = SetKind::Finite;
  s.dim_ = points.front().size();
  for (const auto& p : points) {
    if (p.size() != s.dim_) throw Error(ErrorCode::DimensionMismatch, "finite point dimension");
  }
  s.points_ = std::move(points);
  s.cache_ = std::make_shared<GridCache>();
  return s;
}

StateSpace StateSpace::none() {
  StateSpace s;
  s.kind_ = SetKind::None;
  s.dim_ = 0;
  s.cache_ = std::make_shared<GridCache>();
  return s;
}

std::size_t StateSpace::grid_size_estimate() const {
  switch (kind_) {
    case SetKind::None: return 1;
    case SetKind::Finite: return points_.size();
    case SetKind::Box: {
      double total = 1.0;
      for (std::size_t i = 0; i < dim_; ++i) total *= static_cast<double>(axis_count(lo_[i], hi_[i], h_));
      return total > 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(total);
    }
    case SetKind::Ball: {
      const double per_axis = static_cast<double>(axis_count(-radius_, radius_, h_));
      const double total = std::pow(per_axis, static_cast<double>(dim_)) + static_cast<double>(points_.size());
      return total > 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(total);
    }
  }
  return 0;
}

void StateSpace::build_grid() const {
  PointSet grid(dim_);
  switch (kind_) {
    case SetKind::None:
      grid.push_back(Vec{});
      break;
    case SetKind::Finite:
      for (const auto& p : points_) grid.push_back(p);
      grid.sort_unique();
      break;
    case SetKind::Box:
    case SetKind::Ball: {
      Vec lo = lo_, hi = hi_;
      if (kind_ == SetKind::Ball) {
        lo.assign(dim_, 0.0);
        hi.assign(dim_, 0.0);
        for (std::size_t i = 0; i < dim_; ++i) {
          lo[i] = center_[i] - radius_;
          hi[i] = center_[i] + radius_;
        }
      }
      std::vector<std::size_t> counts(dim_);
      for (std::size_t i = 0; i < dim_; ++i) counts[i] = axis_count(lo[i], hi[i], h_);
      std::vector<std::size_t> idx(dim_, 0);
      Vec point(dim_);
      while (true) {
        for (std::size_t i = 0; i < dim_; ++i) point[i] = axis_point(lo[i], hi[i], idx[i], counts[i]);
        if (kind_ == SetKind::Box || contains(point, 1e-12)) grid.push_back(point);
        std::size_t axis = dim_;
        while (axis > 0) {
          --axis;
          if (++idx[axis] < counts[axis]) break;
          idx[axis] = 0;
          if (axis == 0) {
            axis = dim_ + 1;
            break;
          }
        }
        if (axis == dim_ + 1 || dim_ == 0) break;
      }
      for (const auto& p : points_) grid.push_back(p);
      if (!points_.empty()) grid.sort_unique();
      break;
    }
  }
  cache_->grid = std::move(grid);
}

const PointSet& StateSpace::grid() const {
  std::call_once(cache_->once, [this] { build_grid(); });
  return cache_->grid;
}

double StateSpace::diameter() const {
  switch (kind_) {
    case SetKind::None: return 0.0;
    case SetKind::Box: return distance(NormKind::L2, lo_, hi_);
    case SetKind::Ball: return 2.0 * radius_;
    case SetKind::Finite: {
      double best = 0.0;
      for (std::size_t i = 0; i < points_.size(); ++i) {
        for (std::size_t j = i + 1; j < points_.size(); ++j) {
          best = std::max(best, distance(NormKind::L2, points_[i], points_[j]));
        }
      }
      return best;
    }
  }
  return 0.0;
}

bool StateSpace::contains(ConstVecRef x, double tol) const {
  if (x.size() != dim_) return false;
  switch (kind_) {
    case SetKind::None: return true;
    case SetKind::Box:
      for (std::size_t i = 0; i < dim_; ++i) {
        if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
      }
      return true;
    case SetKind::Ball: return distance(NormKind::L2, x, center_) <= radius_ + tol;
    case SetKind::Finite:
      for (const auto& p : points_) {
        if (distance(NormKind::Linf, p, x) <= tol) return true;
      }
      return false;
  }
  return false;
}

bool operator==(const StateSpace& a, const StateSpace& b) {
  return a.kind_ == b.kind_ && a.dim_ == b.dim_ && a.h_ == b.h_ && a.lo_ == b.lo_ && a.hi_ == b.hi_ &&
         a.center_ == b.center_ && a.radius_ == b.radius_ && a.points_ == b.points_;
}

}  // namespace msddp
