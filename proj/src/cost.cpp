#include "msddp/cost.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "msddp/error.hpp"

namespace msddp {

namespace {

const std::string kPath = "cost.params";

void check_keys(const Json& params, std::initializer_list<std::string_view> allowed) {
  if (!params.is_object()) throw Error(ErrorCode::SchemaError, kPath + ": expected an object");
  for (const auto& [key, value] : params.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::SchemaError, kPath + "." + key + ": unknown field");
    }
  }
}

double get_number(const Json& params, const std::string& key, std::optional<double> fallback = {}) {
  if (!params.contains(key)) {
    if (fallback) return *fallback;
    throw Error(ErrorCode::SchemaError, kPath + "." + key + ": missing");
  }
  const Json& v = params.at(key);
  if (!v.is_number()) throw Error(ErrorCode::SchemaError, kPath + "." + key + ": expected a number");
  return v.get<double>();
}

Vec to_vec(const Json& v, const std::string& path) {
  if (!v.is_array()) throw Error(ErrorCode::SchemaError, path + ": expected an array");
  Vec out;
  for (const auto& c : v) {
    if (!c.is_number()) throw Error(ErrorCode::SchemaError, path + ": expected numbers");
    out.push_back(c.get<double>());
  }
  return out;
}

std::vector<Vec> to_points(const Json& v, const std::string& path) {
  if (!v.is_array()) throw Error(ErrorCode::SchemaError, path + ": expected an array of points");
  std::vector<Vec> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_vec(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

double affine_dot(const Vec& coef, ConstVecRef v) {
  if (coef.empty()) return 0.0;
  return dot(coef, v);
}

class CostBase : public NodalCost {
 public:
  explicit CostBase(Json params) : params_(std::move(params)) {}
  const Json& params() const override { return params_; }

 private:
  Json params_;
};

class ZeroCost final : public CostBase {
 public:
  explicit ZeroCost(const Json& p) : CostBase(p) { check_keys(p, {}); }
  std::string_view family() const override { return "zero"; }
  std::optional<double> eval(ConstVecRef, ConstVecRef, ConstVecRef) const override { return 0.0; }
  bool separable() const override { return true; }
  double lipschitz_z() const override { return 0.0; }
};

class ConstantCost final : public CostBase {
 public:
  explicit ConstantCost(const Json& p) : CostBase(p) {
    check_keys(p, {"value"});
    value_ = get_number(p, "value");
  }
  std::string_view family() const override { return "constant"; }
  std::optional<double> eval(ConstVecRef, ConstVecRef, ConstVecRef) const override { return value_; }
  bool separable() const override { return true; }
  std::optional<double> z_part(ConstVecRef) const override { return value_; }
  double lipschitz_z() const override { return 0.0; }

 private:
  double value_;
};

/// c + <a, z> + <b, x>
class LinearCost final : public CostBase {
 public:
  explicit LinearCost(const Json& p) : CostBase(p) {
    check_keys(p, {"constant", "z", "x"});
    constant_ = get_number(p, "constant", 0.0);
    if (p.contains("z")) a_ = to_vec(p.at("z"), kPath + ".z");
    if (p.contains("x")) b_ = to_vec(p.at("x"), kPath + ".x");
  }
  std::string_view family() const override { return "linear"; }
  std::optional<double> eval(ConstVecRef z, ConstVecRef, ConstVecRef x) const override {
    return constant_ + affine_dot(a_, z) + affine_dot(b_, x);
  }
  bool separable() const override { return true; }
  std::optional<double> z_part(ConstVecRef z) const override { return constant_ + affine_dot(a_, z); }
  std::optional<double> yx_part(ConstVecRef, ConstVecRef x) const override { return affine_dot(b_, x); }
  double lipschitz_z() const override { return norm(NormKind::L2, a_); }

 private:
  double constant_ = 0.0;
  Vec a_, b_;
};

/// offset - sqrt(radius^2 - |z|^2), infeasible outside the ball.
class QuadraticCapCost final : public CostBase {
 public:
  explicit QuadraticCapCost(const Json& p) : CostBase(p) {
    check_keys(p, {"offset", "radius"});
    offset_ = get_number(p, "offset");
    radius_ = get_number(p, "radius");
    if (!(radius_ > 0.0)) throw Error(ErrorCode::SchemaError, kPath + ".radius: must be positive");
  }
  std::string_view family() const override { return "quadratic_cap"; }
  std::optional<double> eval(ConstVecRef z, ConstVecRef, ConstVecRef) const override { return z_part(z); }
  bool separable() const override { return true; }
  std::optional<double> z_part(ConstVecRef z) const override {
    double sq = 0.0;
    for (double c : z) sq += c * c;
    const double slack = radius_ * radius_ - sq;
    if (slack < -1e-12) return std::nullopt;
    return offset_ - std::sqrt(std::max(0.0, slack));
  }

 private:
  double offset_, radius_;
};

/// sum(y) subject to y >= z componentwise; y ranges over the internal set.
class IntegerCoverCost final : public CostBase {
 public:
  explicit IntegerCoverCost(const Json& p) : CostBase(p) { check_keys(p, {}); }
  std::string_view family() const override { return "integer_cover"; }
  std::optional<double> eval(ConstVecRef z, ConstVecRef y, ConstVecRef) const override {
    if (y.size() != z.size()) throw Error(ErrorCode::DimensionMismatch, "integer_cover needs dim y = dim z");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] < z[i] - 1e-12) return std::nullopt;
      total += y[i];
    }
    return total;
  }
};

/// Explicit table over finite (z, x) point lists; null entries are infeasible.
class TableCost final : public CostBase {
 public:
  explicit TableCost(const Json& p) : CostBase(p) {
    check_keys(p, {"z", "x", "values"});
    if (!p.contains("z") || !p.contains("x") || !p.contains("values")) {
      throw Error(ErrorCode::SchemaError, kPath + ": table needs z, x and values");
    }
    z_ = to_points(p.at("z"), kPath + ".z");
    x_ = to_points(p.at("x"), kPath + ".x");
    const Json& values = p.at("values");
    if (!values.is_array() || values.size() != z_.size()) {
      throw Error(ErrorCode::SchemaError, kPath + ".values: expected one row per z point");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Json& row = values[i];
      const std::string path = kPath + ".values[" + std::to_string(i) + "]";
      if (!row.is_array() || row.size() != x_.size()) {
        throw Error(ErrorCode::SchemaError, path + ": expected one entry per x point");
      }
      for (const auto& v : row) {
        if (v.is_null()) {
          values_.push_back(std::nullopt);
        } else if (v.is_number()) {
          values_.push_back(v.get<double>());
        } else {
          throw Error(ErrorCode::SchemaError, path + ": expected number or null");
        }
      }
    }
  }
  std::string_view family() const override { return "table"; }
  std::optional<double> eval(ConstVecRef z, ConstVecRef, ConstVecRef x) const override {
    const auto iz = lookup(z_, z);
    const auto ix = lookup(x_, x);
    if (!iz || !ix) return std::nullopt;
    return values_[*iz * x_.size() + *ix];
  }

 private:
  static std::optional<std::size_t> lookup(const std::vector<Vec>& points, ConstVecRef p) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() == p.size() && distance(NormKind::Linf, points[i], p) <= 1e-9) return i;
    }
    return std::nullopt;
  }

  std::vector<Vec> z_, x_;
  std::vector<std::optional<double>> values_;
};

/// F(z) + slope * |x - target|_2 with
/// F(z) = max(0, max_k v_k + (L/R) <w_k, z - w_k>)  (F = 0 when `prev` is null).
class CapStageCost final : public CostBase {
 public:
  explicit CapStageCost(const Json& p) : CostBase(p) {
    check_keys(p, {"prev", "slope", "target"});
    if (p.contains("prev") && !p.at("prev").is_null()) {
      const Json& prev = p.at("prev");
      if (!prev.is_object()) throw Error(ErrorCode::SchemaError, kPath + ".prev: expected an object");
      for (const auto& [key, value] : prev.items()) {
        if (key != "lipschitz" && key != "radius" && key != "anchors" && key != "values") {
          throw Error(ErrorCode::SchemaError, kPath + ".prev." + key + ": unknown field");
        }
      }
      if (!prev.contains("lipschitz") || !prev.contains("radius") || !prev.contains("anchors") ||
          !prev.contains("values")) {
        throw Error(ErrorCode::SchemaError, kPath + ".prev: needs lipschitz, radius, anchors, values");
      }
      lipschitz_ = prev.at("lipschitz").get<double>();
      radius_ = prev.at("radius").get<double>();
      anchors_ = to_points(prev.at("anchors"), kPath + ".prev.anchors");
      values_ = to_vec(prev.at("values"), kPath + ".prev.values");
      if (anchors_.size() != values_.size()) {
        throw Error(ErrorCode::SchemaError, kPath + ".prev.values: one value per anchor");
      }
    }
    slope_ = get_number(p, "slope", 0.0);
    if (p.contains("target")) target_ = to_vec(p.at("target"), kPath + ".target");
  }
  std::string_view family() const override { return "cap_stage"; }
  std::optional<double> eval(ConstVecRef z, ConstVecRef y, ConstVecRef x) const override {
    return *z_part(z) + *yx_part(y, x);
  }
  bool separable() const override { return true; }
  std::optional<double> z_part(ConstVecRef z) const override {
    double best = 0.0;
    for (std::size_t k = 0; k < anchors_.size(); ++k) {
      const auto& w = anchors_[k];
      double inner = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) inner += w[i] * (z[i] - w[i]);
      best = std::max(best, values_[k] + lipschitz_ / radius_ * inner);
    }
    return best;
  }
  std::optional<double> yx_part(ConstVecRef, ConstVecRef x) const override {
    if (target_.empty() || slope_ == 0.0) return 0.0;
    return slope_ * distance(NormKind::L2, x, target_);
  }
  double lipschitz_z() const override { return anchors_.empty() ? 0.0 : lipschitz_; }

 private:
  double lipschitz_ = 0.0, radius_ = 1.0, slope_ = 0.0;
  std::vector<Vec> anchors_;
  Vec values_, target_;
};

}  // namespace

CostPtr make_cost(std::string_view family, const Json& params) {
  const Json p = params.is_null() ? Json::object() : params;
  if (family == "zero") return std::make_shared<ZeroCost>(p);
  if (family == "constant") return std::make_shared<ConstantCost>(p);
  if (family == "linear") return std::make_shared<LinearCost>(p);
  if (family == "quadratic_cap") return std::make_shared<QuadraticCapCost>(p);
  if (family == "integer_cover") return std::make_shared<IntegerCoverCost>(p);
  if (family == "table") return std::make_shared<TableCost>(p);
  if (family == "cap_stage") return std::make_shared<CapStageCost>(p);
  throw Error(ErrorCode::UnknownCostFamily, "cost family '" + std::string(family) + "'");
}

bool same_cost(const NodalCost& a, const NodalCost& b) {
  return a.family() == b.family() && a.params() == b.params();
}

}  // namespace msddp
