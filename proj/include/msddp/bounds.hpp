#pragma once

#include <optional>
#include <vector>

#include "msddp/cost.hpp"

namespace msddp {

struct BoundParams {
  double eps = 0.1;
  int T = 1;
  int d = 1;
  double D = 1.0;
  double L = 1.0;
  std::optional<int> K;       // largest finite state set
  int M = 1;                  // sampled paths per iteration
  int N = 1;                  // largest number of templates per stage
  double kappa = 2.0;
  /// Per-stage accuracies delta_t (size T); defaults to eps / T each.
  std::vector<double> delta;
};

/// A formula value carried in log10 as well, so huge magnitudes stay usable.
struct FormulaValue {
  bool available = false;
  long double plain = 0.0L;  // +inf when out of range
  long double log10 = 0.0L;

  long double value() const;
  /// Plain number up to 1e15, {"log10": x} above, null when unavailable.
  Json to_json() const;
  static FormulaValue from_value(long double v);
  static FormulaValue from_log10(long double l);
  /// scale * base^exponent.
  static FormulaValue power(long double scale, long double base, long double exponent);
};

struct BoundReport {
  BoundParams params;
  double nu = 0.0;                       // per-iteration probability of useful sampling
  FormulaValue cover_bound;              // sum_t (1 + 2 L D / delta_t)^d
  FormulaValue horizon_bound;            // T (1 + 2 L D T / eps)^d
  FormulaValue stage_eps_bound;          // T (1 + 2 L D / eps)^d, reached with gap T eps
  FormulaValue finite_bound;             // T K
  FormulaValue stochastic_threshold;     // 1 + kappa I / nu with I = cover_bound
  FormulaValue stochastic_tail;          // nu^-I exp(-2 I nu (kappa - 1)^2 / kappa)
  FormulaValue lipschitz_lower_bound;    // (D L T / (4 eps))^d
  FormulaValue convex_lower_bound;       // spherical-cap construction, d >= 3

  Json to_json() const;
};

/// Throws BadParams for nonpositive inputs or kappa <= 1.
BoundReport evaluate_bounds(const BoundParams& params);

}  // namespace msddp
