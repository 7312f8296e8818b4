#pragma once

// Cascade controller for chains of m subsystems: a reshaped safety filter on the first
// level, closed-form tracking laws on the rest, and the gain bookkeeping that goes with them.

#include "csc/common.hpp"
#include "csc/qcqp_safety.hpp"
#include "csc/reshaping.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace csc {

struct CascadeGains {
  int m = 4;
  std::vector<double> tracking_slopes;  ///< K_2..K_m, 1/s
  double k1 = 3.49;                     ///< Lipschitz constant of rho_1
  double tau = 1.001;
  double theta = 1e-3;
  double k_alpha = 1.0;
  double gamma_12_slope = 4.0;
  double gamma_x2v_slope = 0.25;
  double rho0_bound = 0.0;

  double big_k(int i) const { return tracking_slopes.at(static_cast<std::size_t>(i - 2)); }
  /// k_1 is estimated; k_i = 2 K_i for integrator chains.
  double small_k(int i) const { return i == 1 ? k1 : 2.0 * big_k(i); }

  void validate() const {
    if (m < 1) throw std::invalid_argument("CascadeGains: m must be at least 1");
    if (static_cast<int>(tracking_slopes.size()) != m - 1)
      throw std::invalid_argument("CascadeGains: need m - 1 tracking slopes");
    if (!(theta > 0)) throw std::invalid_argument("CascadeGains: theta must be positive");
    for (double k : tracking_slopes)
      if (!(k > 0)) throw std::invalid_argument("CascadeGains: tracking slopes must be positive");
  }
};

/// -(g^T x / |g^T x|) g_lower/(g_lower - d) K |x|, zero at the origin.
inline Vec tracking_law(const Vec& x_tilde, const Mat& g, const PlantBounds& bounds, double k_slope) {
  bounds.validate();
  const Vec gx = g.transpose() * x_tilde;
  const double n = gx.norm();
  if (n == 0.0 || x_tilde.norm() == 0.0) return Vec::Zero(g.cols());
  const double gain = bounds.g_lower / (bounds.g_lower - bounds.delta_upper) * k_slope * x_tilde.norm();
  return -gx / n * gain;
}

/// Ledger for integrator chains, 1-based: kbar(p, i) = prod_{j=p}^{i} k_j with k_j = 2 K_j
/// (kbar(1, i) = k_1 kbar(2, i)), zero for p > i; kbreve(p, i) = 1 + sum_{j=p}^{i} kbar(j, i).
struct GainLedger {
  int m = 0;
  Mat kbar_table;  ///< (m+1) x (m+1), row p, column i

  double kbar(int p, int i) const {
    if (p > i || p < 1 || i < 1 || i > m) return 0.0;
    return kbar_table(p, i);
  }
  double kbreve(int p, int i) const {
    double s = 1.0;
    for (int j = p; j <= i; ++j) s += kbar(j, i);
    return s;
  }

  /// Slopes of the linear gains alpha_{i,.} at level i (2 <= i <= m).
  struct Level {
    int i = 0;
    double x1 = 0;
    double rho0 = 0;
    double v = 0;              ///< alpha_{i,1}
    std::vector<double> mid;   ///< alpha_{i,j}, j = 2..i-1
    double self = 0;           ///< alpha_{i,i}
  };
  std::vector<Level> levels;
};

inline GainLedger gain_ledger(const CascadeGains& gains) {
  gains.validate();
  GainLedger l;
  l.m = gains.m;
  l.kbar_table = Mat::Zero(gains.m + 1, gains.m + 1);
  for (int i = 1; i <= gains.m; ++i) {
    double prod = 1.0;
    for (int p = i; p >= 2; --p) {
      prod *= gains.small_k(p);
      l.kbar_table(p, i) = prod;
    }
    l.kbar_table(1, i) = i == 1 ? gains.k1 : gains.k1 * l.kbar_table(2, i);
  }
  for (int i = 2; i <= gains.m; ++i) {
    GainLedger::Level lv;
    lv.i = i;
    lv.rho0 = l.kbar(1, i - 1);
    lv.v = l.kbar(1, i - 1) * gains.gamma_x2v_slope;
    for (int j = 2; j <= i - 1; ++j) lv.mid.push_back(l.kbar(j, i - 1) * gains.big_k(j) + l.kbar(j - 1, i - 1));
    lv.self = gains.small_k(i - 1);
    l.levels.push_back(lv);
  }
  return l;
}

struct LevelMargin {
  int level = 0;
  double k = 0;    ///< K_i
  double rhs = 0;  ///< slope the selection inequality asks for
  double margin() const { return k - rhs; }
};

/// Per-level K_i - [theta + tau + kbar_{1,i-1} tau + kbar_{1,i-1} g_x2v tau / g_12
///   + sum_{j=2}^{i-1} (kbar_{j,i-1} K_j + kbar_{j-1,i-1}) tau + k_{i-1}].
/// The last term uses k_{i-1}, which is the estimated k_1 at level 2 and 2 K_{i-1} above it.
inline std::vector<LevelMargin> k_selection_audit(const CascadeGains& gains) {
  const auto l = gain_ledger(gains);
  std::vector<LevelMargin> out;
  const double tau = gains.tau;
  for (const auto& lv : l.levels) {
    const int i = lv.i;
    const double k1i = l.kbar(1, i - 1);
    double rhs = gains.theta + tau + k1i * tau + k1i * gains.gamma_x2v_slope * tau / gains.gamma_12_slope;
    for (double a : lv.mid) rhs += a * tau;
    rhs += lv.self;
    out.push_back({i, gains.big_k(i), rhs});
  }
  return out;
}

struct GainCheck {
  std::string name;
  double slope = 0;  ///< slope, or slope product for loop checks
  bool pass = false;
};

struct SmallGainReport {
  std::vector<GainCheck> checks;
  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const GainCheck& c) { return c.pass; });
  }
};

/// Linear instantiation gamma_{i,j}(s) = s/tau for j = 2..i-1 and j = i+1, and
/// gamma_{i,1}(s) = gamma_12(s)/tau. Each gamma_{i,j} (i, j >= 2) must have slope below 1 and
/// each gamma_{i,1} must stay below gamma_12^{-1}, i.e. slope(gamma_12) slope(gamma_{i,1}) < 1.
inline SmallGainReport small_gain_audit(const CascadeGains& gains) {
  gains.validate();
  SmallGainReport rep;
  const double t = 1.0 / gains.tau;
  for (int i = 2; i <= gains.m; ++i) {
    for (int j = 2; j <= std::min(i + 1, gains.m); ++j) {
      if (j == i) continue;
      rep.checks.push_back({"gamma_" + std::to_string(i) + "," + std::to_string(j) + " < id", t, t < 1});
    }
    const double loop = gains.gamma_12_slope * gains.gamma_12_slope * t;
    rep.checks.push_back({"gamma_" + std::to_string(i) + ",1 < gamma_1,2^-1", loop, loop < 1});
  }
  return rep;
}

/// Everything the first-level filter needs.
struct SafetyLayer {
  std::vector<CertificateSpec> certs;
  std::function<Vec(const Vec&)> nominal;  ///< rho_0(x_1)
  PositiveBasis basis;
  double k_phi = 2.0;
  PlantBounds bounds;  ///< of the x_1 subsystem
  Mat g;               ///< input matrix of the x_1 subsystem
  RateSpec rates;
};

/// rho_1(x_1): constraint set from the certificates, Lipschitz selection, reshaped projection.
inline Vec safety_filter(const SafetyLayer& s, const Vec& x1) {
  const Vec nominal = s.nominal(x1);
  if (s.certs.empty()) return nominal;
  const auto cs = build_constraint_set(x1, s.certs, s.g, s.bounds, s.rates);
  return reshaped_filter(nominal, cs, s.basis, s.k_phi, lipschitz_selection(cs));
}

struct CascadeOutput {
  std::vector<Vec> refs;  ///< x*_2 .. x*_{m+1}; the last one is u
  Vec u;
};

struct CascadeController {
  std::function<Vec(const Vec&)> rho1;
  std::vector<std::function<Vec(const Vec&)>> tracking_laws;  ///< rho_2 .. rho_m
  CascadeGains gains;
  int block = 2;

  Vec level(const Vec& z, int i) const { return z.segment((i - 1) * block, block); }

  /// Recursion x*_{i+1} = rho_i(x_i - x*_i) from a given x*_2.
  CascadeOutput track(const Vec& z, const Vec& xs2) const {
    CascadeOutput out;
    out.refs.push_back(xs2);
    for (int i = 2; i <= gains.m; ++i)
      out.refs.push_back(tracking_laws[static_cast<std::size_t>(i - 2)](level(z, i) - out.refs.back()));
    out.u = out.refs.back();
    return out;
  }

  CascadeOutput evaluate(const Vec& z) const {
    if (z.size() != gains.m * block) throw std::invalid_argument("CascadeController: state size mismatch");
    return track(z, rho1(level(z, 1)));
  }

  Vec operator()(const Vec& z) const { return evaluate(z).u; }
};

/// Audits are not enforced here; failing parameter sets are still simulated.
inline CascadeController build_cascade_controller(SafetyLayer layer, const CascadeGains& gains, int block = 2) {
  gains.validate();
  CascadeController c;
  c.gains = gains;
  c.block = block;
  c.rho1 = [layer = std::move(layer)](const Vec& x1) { return safety_filter(layer, x1); };
  const Mat eye = Mat::Identity(block, block);
  const PlantBounds unit{1.0, 1.0, 0.0, {}, {}};
  for (int i = 2; i <= gains.m; ++i) {
    const double k = gains.big_k(i);
    c.tracking_laws.push_back([eye, unit, k](const Vec& e) { return tracking_law(e, eye, unit, k); });
  }
  return c;
}

/// Largest |f(x) - f(y)| / |x - y| over axis-neighbour pairs of a uniform grid on [lo, hi]
/// (`grid` points per axis). Points where f throws, or that fail `keep`, are skipped.
inline double estimate_lipschitz(const std::function<Vec(const Vec&)>& f, const Vec& lo, const Vec& hi, int grid = 200,
                                 const std::function<bool(const Vec&)>& keep = {}) {
  const int d = static_cast<int>(lo.size());
  if (grid < 2 || hi.size() != d) throw std::invalid_argument("estimate_lipschitz: bad grid");
  long total = 1;
  for (int k = 0; k < d; ++k) total *= grid;
  std::vector<Vec> val(static_cast<std::size_t>(total));
  std::vector<char> ok(static_cast<std::size_t>(total), 0);
  auto point = [&](long idx) {
    Vec x(d);
    for (int k = 0; k < d; ++k) {
      const long ik = idx % grid;
      idx /= grid;
      x(k) = lo(k) + (hi(k) - lo(k)) * static_cast<double>(ik) / (grid - 1);
    }
    return x;
  };
  for (long n = 0; n < total; ++n) {
    const Vec x = point(n);
    if (keep && !keep(x)) continue;
    try {
      val[static_cast<std::size_t>(n)] = f(x);
      ok[static_cast<std::size_t>(n)] = val[static_cast<std::size_t>(n)].allFinite();
    } catch (const Error&) {
    }
  }
  double best = 0.0;
  long stride = 1;
  for (int k = 0; k < d; ++k) {
    const double h = (hi(k) - lo(k)) / (grid - 1);
    for (long n = 0; n < total; ++n) {
      if ((n / stride) % grid == grid - 1) continue;
      const long m = n + stride;
      if (!ok[static_cast<std::size_t>(n)] || !ok[static_cast<std::size_t>(m)]) continue;
      best = std::max(best, (val[static_cast<std::size_t>(m)] - val[static_cast<std::size_t>(n)]).norm() / h);
    }
    stride *= grid;
  }
  return best;
}

}  // namespace csc
