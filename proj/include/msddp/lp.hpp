#pragma once

#include <vector>

namespace msddp {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
};

/// Dense two-phase tableau simplex for
///   maximize c^T x  subject to  A x <= b,  x >= 0
/// with Bland-style tie breaking. Intended for the small programs that
/// arise when evaluating over-approximations; no sparsity is exploited.
LpResult solve_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                  const std::vector<double>& c);

}  // namespace msddp
