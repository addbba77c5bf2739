#include "msddp/bounds.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "msddp/error.hpp"

namespace msddp {

namespace {

constexpr long double kLn10 = 2.302585092994045684017991454684364208L;

}  // namespace

long double FormulaValue::value() const { return std::isfinite(plain) ? plain : std::pow(10.0L, log10); }

FormulaValue FormulaValue::from_value(long double v) {
  FormulaValue f;
  f.available = true;
  f.plain = v;
  f.log10 = std::log10(v);
  return f;
}

FormulaValue FormulaValue::from_log10(long double l) {
  FormulaValue f;
  f.available = true;
  f.log10 = l;
  f.plain = l < 4000.0L ? std::pow(10.0L, l) : std::numeric_limits<long double>::infinity();
  return f;
}

FormulaValue FormulaValue::power(long double scale, long double base, long double exponent) {
  FormulaValue f;
  f.available = true;
  f.log10 = std::log10(scale) + exponent * std::log10(base);
  f.plain = f.log10 < 4000.0L ? scale * std::pow(base, exponent) : std::numeric_limits<long double>::infinity();
  return f;
}

Json FormulaValue::to_json() const {
  if (!available) return nullptr;
  if (log10 > 15.0L) return {{"log10", static_cast<double>(log10)}};
  return static_cast<double>(value());
}

BoundReport evaluate_bounds(const BoundParams& p) {
  if (!(p.eps > 0.0) || p.T < 1 || p.d < 1 || !(p.D > 0.0) || !(p.L > 0.0) || p.M < 1 || p.N < 1 ||
      !(p.kappa > 1.0) || (p.K && *p.K < 1)) {
    throw Error(ErrorCode::BadParams, "bound parameters must be positive (kappa > 1)");
  }
  if (!p.delta.empty() && p.delta.size() != static_cast<std::size_t>(p.T)) {
    throw Error(ErrorCode::BadParams, "delta needs one entry per stage");
  }
  for (double v : p.delta) {
    if (!(v > 0.0)) throw Error(ErrorCode::BadParams, "delta entries must be positive");
  }

  const long double eps = p.eps, T = p.T, d = p.d, D = p.D, L = p.L;
  BoundReport r;
  r.params = p;

  // Sum of per-stage terms, accumulated relative to the largest to stay finite.
  std::vector<long double> bases, logs;
  for (int t = 0; t < p.T; ++t) {
    const long double delta = p.delta.empty() ? eps / T : static_cast<long double>(p.delta[static_cast<std::size_t>(t)]);
    bases.push_back(1.0L + 2.0L * L * D / delta);
    logs.push_back(d * std::log10(bases.back()));
  }
  long double top = logs.front();
  for (auto l : logs) top = std::max(top, l);
  long double acc = 0.0L;
  for (auto l : logs) acc += std::pow(10.0L, l - top);
  r.cover_bound = FormulaValue::from_log10(top + std::log10(acc));
  if (top < 4000.0L) {
    r.cover_bound.plain = 0.0L;
    for (auto b : bases) r.cover_bound.plain += std::pow(b, d);
  }

  r.horizon_bound = FormulaValue::power(T, 1.0L + 2.0L * L * D * T / eps, d);
  r.stage_eps_bound = FormulaValue::power(T, 1.0L + 2.0L * L * D / eps, d);
  if (p.K) r.finite_bound = FormulaValue::from_value(T * static_cast<long double>(*p.K));

  const long double nu = -std::expm1(static_cast<long double>(p.M) * std::log1p(-1.0L / p.N));
  r.nu = static_cast<double>(nu);
  const long double I = r.cover_bound.value();
  const long double kappa = p.kappa;
  if (std::isfinite(I)) {
    r.stochastic_threshold = FormulaValue::from_value(1.0L + kappa * I / nu);
    r.stochastic_tail =
        FormulaValue::from_log10(-I * std::log10(nu) - 2.0L * I * nu * (kappa - 1.0L) * (kappa - 1.0L) / kappa / kLn10);
  } else {
    r.stochastic_threshold = FormulaValue::from_log10(std::log10(kappa / nu) + r.cover_bound.log10);
  }

  r.lipschitz_lower_bound = FormulaValue::power(1.0L, D * L * T / (4.0L * eps), d);
  if (p.d >= 3) {
    const long double front = (1.0L / 3.0L) * (d * (d - 2.0L) * std::sqrt(std::numbers::pi_v<long double>) / (d - 1.0L)) *
                              std::exp(std::lgamma(d / 2.0L + 0.5L) - std::lgamma(d / 2.0L + 1.0L));
    if (p.T >= 2) {
      r.convex_lower_bound = FormulaValue::power(front, D * L * (T - 1.0L) / (8.0L * eps), (d - 2.0L) / 2.0L);
    }
  }
  return r;
}

Json BoundReport::to_json() const {
  Json params_json = {{"eps", params.eps}, {"T", params.T}, {"d", params.d}, {"D", params.D}, {"L", params.L},
                      {"M", params.M},     {"N", params.N}, {"kappa", params.kappa}};
  params_json["K"] = params.K ? Json(*params.K) : Json(nullptr);
  if (!params.delta.empty()) params_json["delta"] = params.delta;
  return {{"params", params_json},
          {"nu", nu},
          {"cover_bound", cover_bound.to_json()},
          {"horizon_bound", horizon_bound.to_json()},
          {"stage_eps_bound", stage_eps_bound.to_json()},
          {"finite_bound", finite_bound.to_json()},
          {"stochastic_threshold", stochastic_threshold.to_json()},
          {"stochastic_tail", stochastic_tail.to_json()},
          {"lipschitz_lower_bound", lipschitz_lower_bound.to_json()},
          {"convex_lower_bound", convex_lower_bound.to_json()}};
}

}  // namespace msddp
