#pragma once

// Norm-augmented linear constraints  a_c u + c_c |u| <= b_c  on the control input,
// with the closed-form feasible points used by the safety filter.

#include "csc/certificates.hpp"
#include "csc/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace csc {

struct ConstraintSet {
  Mat a_c;  ///< n_c x n_u, unit rows
  Vec b_c;
  Vec c_c;  ///< entries in [0, 1)

  int size() const { return static_cast<int>(b_c.size()); }
};

struct PlantBounds {
  double g_lower = 1.0;      ///< g_lower: smallest gain of the input matrix
  double g_upper = 1.0;
  double delta_upper = 0.0;  ///< bound on the input-matrix uncertainty
  ScalarFn f_z;              ///< envelope of the z-coupling; empty means zero
  ScalarFn f_x;              ///< envelope of the drift; empty means zero

  double norm_coefficient() const { return delta_upper / g_lower; }
  double ratio() const { return (g_lower + delta_upper) / (g_lower - delta_upper); }
  void validate() const {
    if (!(g_lower > delta_upper && delta_upper >= 0 && g_upper >= g_lower && g_lower > 0))
      throw std::invalid_argument("PlantBounds: need g_upper >= g_lower > delta_upper >= 0");
  }
};

inline double eval_or_zero(const ScalarFn& f, double s) { return f ? f(s) : 0.0; }

/// alpha_j = alpha o alpha_bar_j^{-1}. The base alpha is k s unless `base` is set.
struct RateSpec {
  double base_slope = 1.0;
  ScalarFn base;
  std::vector<ScalarFn> alpha_bar_inverse;  ///< per certificate; empty means derived from mu

  double alpha(double s) const { return base ? base(s) : base_slope * s; }

  /// Linear on s >= 0, slope scaled by (g+d)/(g-d) on s < 0, so that
  /// alpha(s) + (g+d)/(g-d) alpha(-s) <= 0 holds for s <= 0. Equals k s when d = 0.
  static RateSpec ratio_compliant(double k, const PlantBounds& bounds) {
    RateSpec r;
    r.base_slope = k;
    const double q = bounds.ratio();
    r.base = [k, q](double s) { return s >= 0 ? k * s : q * k * s; };
    return r;
  }
};

/// Worst value of alpha(s) + (g+d)/(g-d) alpha(-s) over s in [-s_max, 0]; <= 0 means the
/// feasibility rate condition holds on the sampled range.
inline double feasibility_rate_residual(const RateSpec& rates, const PlantBounds& bounds, double s_max = 10.0,
                                        int samples = 1001) {
  double worst = -std::numeric_limits<double>::infinity();
  const double q = bounds.ratio();
  for (int i = 0; i < samples; ++i) {
    const double s = -s_max * i / (samples - 1);
    worst = std::max(worst, rates.alpha(s) + q * rates.alpha(-s));
  }
  return worst;
}

inline ScalarFn alpha_bar_inverse_for(const RateSpec& rates, const std::vector<CertificateSpec>& certs, std::size_t j) {
  if (j < rates.alpha_bar_inverse.size() && rates.alpha_bar_inverse[j]) return rates.alpha_bar_inverse[j];
  const auto& c = certs[j];
  if (c.mu.name == "exponential" && c.level == 1.0) return mu_exponential_alpha_bar().second;
  throw std::invalid_argument("no alpha_bar inverse known for certificate " + std::to_string(j));
}

inline ScalarFn alpha_j(const RateSpec& rates, const std::vector<CertificateSpec>& certs, std::size_t j) {
  auto inv = alpha_bar_inverse_for(rates, certs, j);
  return [rates, inv](double s) { return rates.alpha(inv(s)); };
}

/// Rows from the certificates at x: normalized dV_j/dx g, bound -alpha_j(V_j - v_j),
/// norm coefficient d/g_lower.
inline ConstraintSet build_constraint_set(const Vec& x, const std::vector<CertificateSpec>& certs, const Mat& g,
                                          const PlantBounds& bounds, const RateSpec& rates, double grad_tol = 1e-12) {
  bounds.validate();
  const int nc = static_cast<int>(certs.size());
  ConstraintSet cs{Mat(nc, g.cols()), Vec(nc), Vec::Constant(nc, bounds.norm_coefficient())};
  for (int j = 0; j < nc; ++j) {
    const auto e = evaluate(certs[static_cast<std::size_t>(j)], x);
    const RowVec row = e.grad_v * g;
    const double n = row.norm();
    if (!(n > grad_tol)) throw Error(Errc::ZeroGradient, "dV/dx g vanishes for certificate " + std::to_string(j));
    cs.a_c.row(j) = row / n;
    cs.b_c(j) = -alpha_j(rates, certs, static_cast<std::size_t>(j))(e.v - certs[static_cast<std::size_t>(j)].level);
  }
  return cs;
}

/// Largest row residual a_c u + c_c |u| - b_c (<= 0 means u is feasible).
inline double max_violation(const ConstraintSet& cs, const Vec& u) {
  if (cs.size() == 0) return -std::numeric_limits<double>::infinity();
  return (cs.a_c * u + cs.c_c * u.norm() - cs.b_c).maxCoeff();
}

inline bool in_feasible_set(const ConstraintSet& cs, const Vec& u, double tol = 1e-9) {
  return max_violation(cs, u) <= tol;
}

namespace detail {

inline int smallest_min_index(const Vec& b) {
  int j = 0;
  for (int i = 1; i < b.size(); ++i)
    if (b(i) < b(j)) j = i;
  return j;
}

}  // namespace detail

/// Zero when every bound is nonnegative, else a_c[j]^T b_c[j] / (1 - c_c[j]) for the
/// smallest index j attaining min b_c.
inline Vec feasibility_witness(const ConstraintSet& cs, double tol = 1e-9) {
  const Eigen::Index nu = cs.a_c.cols();
  if (cs.size() == 0 || cs.b_c.minCoeff() >= 0) return Vec::Zero(nu);
  const int j = detail::smallest_min_index(cs.b_c);
  const Vec u = cs.a_c.row(j).transpose() * (cs.b_c(j) / (1.0 - cs.c_c(j)));
  if (!in_feasible_set(cs, u, tol))
    throw Error(Errc::WitnessInfeasible,
                "witness violates a row by " + std::to_string(max_violation(cs, u)) +
                    "; certificates overlap or the rate condition fails");
  return u;
}

/// Lipschitz selection of the feasible-set map. Requires
/// b_j/(1+sgn(b_j)c_j) + b_k/(1+sgn(b_k)c_k) >= 0 for every pair j != k.
inline Vec lipschitz_selection(const ConstraintSet& cs, double tol = 1e-12) {
  const Eigen::Index nu = cs.a_c.cols();
  const int nc = cs.size();
  auto scaled = [&](int j) {
    const double b = cs.b_c(j);
    const double sg = (b > 0) - (b < 0);
    return b / (1.0 + sg * cs.c_c(j));
  };
  for (int j = 0; j < nc; ++j)
    for (int k = j + 1; k < nc; ++k)
      if (scaled(j) + scaled(k) < -tol)
        throw SelectionConditionError(j, k, "pair (" + std::to_string(j) + "," + std::to_string(k) +
                                                ") violates the selection condition");
  if (nc == 0 || cs.b_c.minCoeff() >= 0) return Vec::Zero(nu);
  const int j = detail::smallest_min_index(cs.b_c);
  return cs.a_c.row(j).transpose() * (cs.b_c(j) / (1.0 - cs.c_c(j)));
}

struct DisturbanceCaps {
  double z = 0.0;  ///< bound on |z|
  double w = 0.0;  ///< bound on |w|
};

/// Per-row decay margin  alpha_j(V_j - v_j) - f_z(|z|)/g - f_x(|x|)/g - (1 + d/g)|w|,
/// where alpha_j(V_j - v_j) = -b_c[j].
inline Vec dissipation_audit(const ConstraintSet& cs, const Vec& u, const PlantBounds& bounds,
                             const DisturbanceCaps& caps, double x_norm = 0.0, double tol = 1e-9) {
  if (!in_feasible_set(cs, u, tol)) throw Error(Errc::NotInFeasibleSet, "u violates the constraint set");
  const double g = bounds.g_lower;
  const double common = eval_or_zero(bounds.f_z, caps.z) / g + eval_or_zero(bounds.f_x, x_norm) / g +
                        (1.0 + bounds.norm_coefficient()) * caps.w;
  return (-cs.b_c).array() - common;
}

struct SuperlevelRateInput {
  double c_j = 1.4;
  double v_j = 1.0;
  double v_max = 1.5;  ///< largest V_j on the domain; sampled range is [c_j, v_max]
  double theta = 1e-3;
  ScalarFn gamma_w_inv;  ///< empty means zero
  ScalarFn gamma_z_inv;  ///< empty means zero
  double f_x_sup = 0.0;  ///< sup of the drift envelope on the superlevel set; may be +inf
  int grid = 200;
};

struct SuperlevelRateReport {
  double min_margin = std::numeric_limits<double>::infinity();
  double worst_v = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
};

/// Samples alpha_j((c-v)/c V) - [theta V + f_z(gamma_z^-1(V))/g + (1+d/g) gamma_w^-1(V) + f_x/g]
/// over V in [c_j, v_max].
inline SuperlevelRateReport superlevel_rate_audit(const ScalarFn& alpha_jfn, const PlantBounds& bounds,
                                                  const SuperlevelRateInput& in) {
  SuperlevelRateReport rep;
  if (in.v_max < in.c_j) return rep;
  const double g = bounds.g_lower;
  const int n = std::max(2, in.grid);
  for (int i = 0; i < n; ++i) {
    const double v = in.c_j + (in.v_max - in.c_j) * i / (n - 1);
    const double lhs = alpha_jfn((in.c_j - in.v_j) / in.c_j * v);
    const double rhs = in.theta * v + eval_or_zero(bounds.f_z, eval_or_zero(in.gamma_z_inv, v)) / g +
                       (1.0 + bounds.norm_coefficient()) * eval_or_zero(in.gamma_w_inv, v) + in.f_x_sup / g;
    const double margin = lhs - rhs;
    if (!(margin >= rep.min_margin)) {
      rep.min_margin = margin;
      rep.worst_v = v;
    }
  }
  rep.pass = rep.min_margin >= 0;
  return rep;
}

}  // namespace csc
