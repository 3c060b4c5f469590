#include "ope/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "ope/errors.hpp"

namespace ope {

namespace {

constexpr double kPivotTol = 1e-11;

// Tableau rows 0..m-1 are constraints, row m is the objective (reduced costs);
// the last column is the right-hand side.
struct Tableau {
  Matrix t;
  std::vector<int> basis;
  int pivots = 0;

  int rows() const { return static_cast<int>(t.rows()) - 1; }
  int rhs() const { return static_cast<int>(t.cols()) - 1; }

  void pivot(int r, int c) {
    t.row(r) /= t(r, c);
    for (int i = 0; i < t.rows(); ++i) {
      if (i == r) continue;
      const double f = t(i, c);
      if (f != 0.0) t.row(i) -= f * t.row(r);
    }
    basis[static_cast<std::size_t>(r)] = c;
    ++pivots;
  }

  // Runs Bland's rule over columns [0, n_cols). Returns false if unbounded.
  bool optimize(int n_cols, int max_pivots) {
    const int m = rows();
    while (true) {
      if (pivots > max_pivots) throw NumericalError("solve_lp: pivot limit exceeded");
      int enter = -1;
      for (int j = 0; j < n_cols; ++j) {
        if (t(m, j) < -kPivotTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        const double a = t(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = t(i, rhs()) / a;
        if (ratio < best - kPivotTol ||
            (std::abs(ratio - best) <= kPivotTol && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }

  void price(const Vector& cost) {
    const int m = rows();
    t.row(m).setZero();
    t.row(m).head(cost.size()) = cost.transpose();
    for (int i = 0; i < m; ++i) {
      const int b = basis[static_cast<std::size_t>(i)];
      if (b < cost.size() && cost(b) != 0.0) t.row(m) -= cost(b) * t.row(i);
    }
  }
};

}  // namespace

LpResult solve_lp(const Vector& c, const Matrix& a_ub, const Vector& b_ub) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(a_ub.rows());
  if (a_ub.cols() != n || b_ub.size() != m) throw DimensionError("solve_lp: inconsistent shapes");

  int n_art = 0;
  for (int i = 0; i < m; ++i) n_art += b_ub(i) < 0.0 ? 1 : 0;
  const int n_total = n + m + n_art;

  Tableau tab;
  tab.t = Matrix::Zero(m + 1, n_total + 1);
  tab.basis.assign(static_cast<std::size_t>(m), -1);
  int art = n + m;
  for (int i = 0; i < m; ++i) {
    const double sign = b_ub(i) < 0.0 ? -1.0 : 1.0;
    tab.t.row(i).head(n) = sign * a_ub.row(i);
    tab.t(i, n + i) = sign;
    tab.t(i, n_total) = sign * b_ub(i);
    if (sign < 0.0) {
      tab.t(i, art) = 1.0;
      tab.basis[static_cast<std::size_t>(i)] = art++;
    } else {
      tab.basis[static_cast<std::size_t>(i)] = n + i;
    }
  }
  const int max_pivots = 50 * (m + n_total + 10);

  LpResult out;
  if (n_art > 0) {
    Vector phase1 = Vector::Zero(n_total);
    phase1.tail(n_art).setOnes();
    tab.price(phase1);
    tab.optimize(n_total, max_pivots);
    const double infeas = -tab.t(m, n_total);
    if (infeas > 1e-9 * (1.0 + b_ub.cwiseAbs().maxCoeff())) {
      out.status = LpStatus::infeasible;
      out.pivots = tab.pivots;
      return out;
    }
    // Drive remaining zero-level artificials out of the basis.
    for (int i = 0; i < m; ++i) {
      if (tab.basis[static_cast<std::size_t>(i)] < n + m) continue;
      for (int j = 0; j < n + m; ++j) {
        if (std::abs(tab.t(i, j)) > kPivotTol) {
          tab.pivot(i, j);
          break;
        }
      }
    }
    tab.t.middleCols(n + m, n_art).setZero();
  }

  Vector phase2 = Vector::Zero(n + m);
  phase2.head(n) = c;
  tab.price(phase2);
  const bool bounded = tab.optimize(n + m, max_pivots);
  out.pivots = tab.pivots;
  if (!bounded) {
    out.status = LpStatus::unbounded;
    return out;
  }
  out.status = LpStatus::optimal;
  out.x = Vector::Zero(n);
  for (int i = 0; i < m; ++i) {
    const int b = tab.basis[static_cast<std::size_t>(i)];
    if (b < n) out.x(b) = tab.t(i, n_total);
  }
  out.objective = c.dot(out.x);
  return out;
}

}  // namespace ope
