#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "msddp/geometry.hpp"

namespace msddp {

using Json = nlohmann::json;

/// Nodal cost f_n(z, y, x): z is the local copy of the parent state, y the
/// internal decision, x the outgoing state. `std::nullopt` marks an
/// infeasible combination (the extended value +inf); finite values are >= 0
/// for valid instances.
///
/// Costs that split as g(z) + h(y, x) report `separable()`; the grid oracles
/// and the brute-force DP then minimize the two parts independently.
class NodalCost {
 public:
  virtual ~NodalCost() = default;

  virtual std::string_view family() const = 0;
  /// Parameters in the instance-file encoding; together with `family()` this
  /// is the structural identity of the cost.
  virtual const Json& params() const = 0;

  virtual std::optional<double> eval(ConstVecRef z, ConstVecRef y, ConstVecRef x) const = 0;

  virtual bool separable() const { return false; }
  virtual std::optional<double> z_part(ConstVecRef /*z*/) const { return 0.0; }
  virtual std::optional<double> yx_part(ConstVecRef /*y*/, ConstVecRef /*x*/) const { return 0.0; }

  /// Lipschitz constant in z where known (+inf otherwise). Used only for the
  /// documented grid-model error bound.
  virtual double lipschitz_z() const { return std::numeric_limits<double>::infinity(); }
};

using CostPtr = std::shared_ptr<const NodalCost>;

/// Builds a cost from its family name and parameters.
/// Families: zero, constant, linear, quadratic_cap, integer_cover, table,
/// cap_stage. Throws UnknownCostFamily or SchemaError.
CostPtr make_cost(std::string_view family, const Json& params);

bool same_cost(const NodalCost& a, const NodalCost& b);

}  // namespace msddp
