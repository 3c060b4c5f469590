#pragma once

#include "ope/linalg.hpp"

namespace ope {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Vector x;
  double objective = 0.0;
  int pivots = 0;
};

/// minimize c^T x subject to A_ub x <= b_ub, x >= 0.
/// Dense two-phase tableau simplex with Bland's anti-cycling rule.
LpResult solve_lp(const Vector& c, const Matrix& a_ub, const Vector& b_ub);

}  // namespace ope
