#pragma once

// Two discs of radius D centred at (0, 1) and (0, -1) with nominal control (1, 0):
// the unreshaped filter is non-Lipschitz as D -> 1, the reshaped one is not.

#include "csc/certificates.hpp"
#include "csc/qcqp_safety.hpp"
#include "csc/qp_solver.hpp"
#include "csc/reshaping.hpp"

#include <cmath>
#include <functional>

namespace csc::two_disc {

inline Vec nominal() {
  Vec u(2);
  u << 1.0, 0.0;
  return u;
}

inline ConstraintSet constraints(const Vec& x, double d) {
  ConstraintSet cs{Mat(2, 2), Vec(2), Vec::Zero(2)};
  Vec o(2);
  for (int j = 0; j < 2; ++j) {
    o << 0.0, j == 0 ? 1.0 : -1.0;
    const auto r = disc_constraint_row(o, d, x);
    cs.a_c.row(j) = r.row;
    cs.b_c(j) = r.bound;
  }
  return cs;
}

/// Projection of the nominal onto {A_c u <= b_c}.
inline Vec rho_c(const Vec& x, double d) {
  const auto cs = constraints(x, d);
  return solve_projection_qp(nominal(), {cs.a_c, cs.b_c}).point;
}

/// First component of rho_c on the x-axis.
inline double rho_c_axis_closed_form(double x1, double d) {
  if (x1 > -d - 1 && x1 < d - 1) return (d * d - x1 * x1 - 1) / (2 * x1);
  return 1.0;
}

inline Vec rho_l(const Vec& x, double d, const PositiveBasis& basis, double k_phi) {
  const auto cs = constraints(x, d);
  return reshaped_filter(nominal(), cs, basis, k_phi, lipschitz_selection(cs));
}

/// First component of rho_L on the x-axis wherever the constraint along (1, 0) binds.
inline double rho_l_axis_closed_form(double x1, double d, double c_a) {
  const double r = std::sqrt(x1 * x1 + 1);
  return std::max(-x1 / r, c_a) * (1 + x1 * x1 - d * d) / (2 * r);
}

/// Largest |f(x_{i+1}) - f(x_i)| / step over n uniform steps of [lo, hi].
inline double max_secant_slope(const std::function<double(double)>& f, double lo, double hi, int n) {
  if (n < 1 || !(hi > lo)) throw std::invalid_argument("max_secant_slope: bad grid");
  const double h = (hi - lo) / n;
  double worst = 0, prev = f(lo);
  for (int i = 1; i <= n; ++i) {
    const double cur = f(lo + h * i);
    worst = std::max(worst, std::abs(cur - prev) / h);
    prev = cur;
  }
  return worst;
}

}  // namespace csc::two_disc
