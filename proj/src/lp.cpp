#include "msddp/lp.hpp"

#include <cstddef>
#include <limits>

#include "msddp/error.hpp"

namespace msddp {

namespace {

constexpr double kEps = 1e-11;

class Tableau {
 public:
  Tableau(const std::vector<std::vector<double>>& A, const std::vector<double>& b, const std::vector<double>& c)
      : m_(b.size()), n_(c.size()), D_(m_ + 2, std::vector<double>(n_ + 2, 0.0)), B_(m_), N_(n_ + 1) {
    for (std::size_t i = 0; i < m_; ++i) {
      if (A[i].size() != n_) throw Error(ErrorCode::DimensionMismatch, "LP row has wrong length");
      for (std::size_t j = 0; j < n_; ++j) D_[i][j] = A[i][j];
      D_[i][n_] = -1.0;
      D_[i][n_ + 1] = b[i];
      B_[i] = static_cast<long>(n_ + i);
    }
    for (std::size_t j = 0; j < n_; ++j) {
      N_[j] = static_cast<long>(j);
      D_[m_][j] = -c[j];
    }
    N_[n_] = -1;
    D_[m_ + 1][n_] = 1.0;
  }

  LpResult solve() {
    LpResult out;
    std::size_t r = 0;
    for (std::size_t i = 1; i < m_; ++i) {
      if (D_[i][n_ + 1] < D_[r][n_ + 1]) r = i;
    }
    if (m_ > 0 && D_[r][n_ + 1] < -kEps) {
      pivot(r, n_);
      if (!simplex(1) || D_[m_ + 1][n_ + 1] < -kEps) {
        out.status = LpStatus::Infeasible;
        return out;
      }
      for (std::size_t i = 0; i < m_; ++i) {
        if (B_[i] != -1) continue;
        std::size_t s = 0;
        for (std::size_t j = 1; j <= n_; ++j) {
          if (D_[i][j] < D_[i][s] || (D_[i][j] == D_[i][s] && N_[j] < N_[s])) s = j;
        }
        pivot(i, s);
      }
    }
    if (!simplex(2)) {
      out.status = LpStatus::Unbounded;
      out.objective = std::numeric_limits<double>::infinity();
      return out;
    }
    out.status = LpStatus::Optimal;
    out.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (B_[i] >= 0 && static_cast<std::size_t>(B_[i]) < n_) out.x[static_cast<std::size_t>(B_[i])] = D_[i][n_ + 1];
    }
    out.objective = D_[m_][n_ + 1];
    return out;
  }

 private:
  void pivot(std::size_t r, std::size_t s) {
    const double inv = 1.0 / D_[r][s];
    for (std::size_t i = 0; i < m_ + 2; ++i) {
      if (i == r || D_[i][s] == 0.0) continue;
      const double factor = D_[i][s] * inv;
      for (std::size_t j = 0; j < n_ + 2; ++j) {
        if (j != s) D_[i][j] -= D_[r][j] * factor;
      }
    }
    for (std::size_t j = 0; j < n_ + 2; ++j) {
      if (j != s) D_[r][j] *= inv;
    }
    for (std::size_t i = 0; i < m_ + 2; ++i) {
      if (i != r) D_[i][s] *= -inv;
    }
    D_[r][s] = inv;
    std::swap(B_[r], N_[s]);
  }

  bool simplex(int phase) {
    const std::size_t x = phase == 1 ? m_ + 1 : m_;
    for (std::size_t guard = 0; guard < 100000; ++guard) {
      long s = -1;
      for (std::size_t j = 0; j <= n_; ++j) {
        if (phase == 2 && N_[j] == -1) continue;
        if (s == -1 || D_[x][j] < D_[x][static_cast<std::size_t>(s)] - kEps ||
            (D_[x][j] <= D_[x][static_cast<std::size_t>(s)] + kEps && N_[j] < N_[static_cast<std::size_t>(s)])) {
          s = static_cast<long>(j);
        }
      }
      const std::size_t sc = static_cast<std::size_t>(s);
      if (D_[x][sc] > -kEps) return true;
      long r = -1;
      for (std::size_t i = 0; i < m_; ++i) {
        if (D_[i][sc] < kEps) continue;
        if (r == -1) {
          r = static_cast<long>(i);
          continue;
        }
        const std::size_t rc = static_cast<std::size_t>(r);
        const double lhs = D_[i][n_ + 1] / D_[i][sc];
        const double rhs = D_[rc][n_ + 1] / D_[rc][sc];
        if (lhs < rhs - kEps || (lhs <= rhs + kEps && B_[i] < B_[rc])) r = static_cast<long>(i);
      }
      if (r == -1) return false;
      pivot(static_cast<std::size_t>(r), sc);
    }
    return true;
  }

  std::size_t m_, n_;
  std::vector<std::vector<double>> D_;
  std::vector<long> B_, N_;
};

}  // namespace

LpResult solve_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                  const std::vector<double>& c) {
  if (A.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "LP rows and right-hand side differ");
  Tableau tableau(A, b, c);
  return tableau.solve();
}

}  // namespace msddp
