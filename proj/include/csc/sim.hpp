#pragma once

// Fixed-step closed-loop simulation: integrator chains, the planar VTOL with its
// dynamic feedback linearization, and an identified velocity-loop model.

#include "csc/cascade.hpp"
#include "csc/certificates.hpp"
#include "csc/common.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace csc {

struct IntegratorChain {
  int m = 4;
  int block = 2;
};

/// State (p, p', theta, theta', a1, a1'), 8 entries.
struct VtolNonlinear {
  double gravity = 9.81;  ///< m/s^2
  double thrust_tol = 1e-6;
};

/// x1' = x2, x2' = x3, x3' = x4, x4' = T4 (T3 (T2 (x2* - x2) - x3) - x4), per axis.
struct VelocityLoop {
  Vec t2, t3, t4;

  static VelocityLoop identified() {
    VelocityLoop v{Vec(2), Vec(2), Vec(2)};
    v.t2 << 0.2928, 2.6711;
    v.t3 << 1.2231, 29.7555;
    v.t4 << 4.1709, 113.3872;
    return v;
  }
};

using PlantModel = std::variant<IntegratorChain, VtolNonlinear, VelocityLoop>;

template <class F>
Vec rk4_step(F&& f, const Vec& z, double dt) {
  const Vec k1 = f(z);
  const Vec k2 = f(Vec(z + 0.5 * dt * k1));
  const Vec k3 = f(Vec(z + 0.5 * dt * k2));
  const Vec k4 = f(Vec(z + dt * k3));
  return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

inline void check_finite(const Vec& z) {
  if (!z.allFinite()) throw Error(Errc::NonFiniteState, "state became non-finite");
}

inline Vec chain_rhs(const Vec& z, const Vec& u) {
  const Eigen::Index b = u.size();
  Vec d(z.size());
  d.head(z.size() - b) = z.tail(z.size() - b);
  d.tail(b) = u;
  return d;
}

}  // namespace detail

/// RK4 on x_i' = x_{i+1}, x_m' = u with u constant over the step; block size is u.size().
inline Vec step_integrator_chain(const Vec& z, const Vec& u, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (u.size() == 0 || z.size() % u.size() != 0) throw std::invalid_argument("state size is not a multiple of u");
  const Vec out = rk4_step([&](const Vec& s) { return detail::chain_rhs(s, u); }, z, dt);
  detail::check_finite(out);
  return out;
}

/// Same chain with u re-evaluated from the state at every RK4 stage.
template <class U>
Vec step_integrator_chain_feedback(const Vec& z, U&& u_of_state, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  const Vec out = rk4_step([&](const Vec& s) { return detail::chain_rhs(s, u_of_state(s)); }, z, dt);
  detail::check_finite(out);
  return out;
}

/// Thrust and roll acceleration that make the fourth derivative of p equal u:
/// a1'' = a1 theta'^2 + e.u,  a2 = (n.u - 2 theta' a1') / a1, e = (-sin, cos), n = (-cos, -sin).
inline Vec vtol_rhs(const VtolNonlinear& p, const Vec& s, const Vec& u) {
  const double th = s(4), thd = s(5), a1 = s(6), a1d = s(7);
  if (!(std::abs(a1) > p.thrust_tol)) throw Error(Errc::ThrustSingularity, "thrust a1 is too close to zero");
  const double st = std::sin(th), ct = std::cos(th);
  Vec d(8);
  d(0) = s(2);
  d(1) = s(3);
  d(2) = -st * a1;
  d(3) = ct * a1 - p.gravity;
  d(4) = thd;
  d(5) = (-ct * u(0) - st * u(1) - 2.0 * thd * a1d) / a1;
  d(6) = a1d;
  d(7) = thd * thd * a1 - st * u(0) + ct * u(1);
  return d;
}

namespace detail {

// A sign change of a1 over a step means the thrust passed through zero in between.
inline void check_thrust_sign(const Vec& before, const Vec& after) {
  if (before(6) * after(6) <= 0) throw Error(Errc::ThrustSingularity, "thrust a1 changed sign within a step");
}

}  // namespace detail

inline Vec step_vtol_nonlinear(const VtolNonlinear& p, const Vec& s, const Vec& u, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  const Vec out = rk4_step([&](const Vec& x) { return vtol_rhs(p, x, u); }, s, dt);
  detail::check_finite(out);
  detail::check_thrust_sign(s, out);
  return out;
}

/// (p, p', theta, theta', a1, a1') -> (p, p', p'', p''').
inline Vec vtol_to_flat(const VtolNonlinear& p, const Vec& s) {
  const double th = s(4), thd = s(5), a1 = s(6), a1d = s(7);
  const double st = std::sin(th), ct = std::cos(th);
  Vec z(8);
  z.head(4) = s.head(4);
  z(4) = -st * a1;
  z(5) = ct * a1 - p.gravity;
  z(6) = -st * a1d - ct * thd * a1;
  z(7) = ct * a1d - st * thd * a1;
  return z;
}

/// Inverse of vtol_to_flat with a1 > 0.
inline Vec flat_to_vtol(const VtolNonlinear& p, const Vec& z) {
  const double fx = z(4), fy = z(5) + p.gravity;
  const double a1 = std::hypot(fx, fy);
  if (!(a1 > p.thrust_tol)) throw Error(Errc::ThrustSingularity, "flat state implies zero thrust");
  const double th = std::atan2(-fx, fy);
  const double st = std::sin(th), ct = std::cos(th);
  Vec s(8);
  s.head(4) = z.head(4);
  s(4) = th;
  s(6) = a1;
  s(7) = -st * z(6) + ct * z(7);
  s(5) = (-ct * z(6) - st * z(7)) / a1;
  return s;
}

inline Vec velocity_loop_rhs(const VelocityLoop& v, const Vec& z, const Vec& x2_ref) {
  Vec d(8);
  d.head(6) = z.tail(6);
  const Vec x2 = z.segment(2, 2), x3 = z.segment(4, 2), x4 = z.segment(6, 2);
  const Vec inner = v.t2.cwiseProduct(x2_ref - x2) - x3;
  d.tail(2) = v.t4.cwiseProduct(v.t3.cwiseProduct(inner) - x4);
  return d;
}

inline Vec step_velocity_loop(const VelocityLoop& v, const Vec& z, const Vec& x2_ref, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  const Vec out = rk4_step([&](const Vec& x) { return velocity_loop_rhs(v, x, x2_ref); }, z, dt);
  detail::check_finite(out);
  return out;
}

enum class Termination { Completed, LeftWorkspace, ThrustSingularity, NonFiniteState, ControllerError };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::LeftWorkspace: return "left_workspace";
    case Termination::ThrustSingularity: return "thrust_singularity";
    case Termination::NonFiniteState: return "non_finite_state";
    case Termination::ControllerError: return "controller_error";
  }
  return "unknown";
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;             ///< plant state
  std::vector<std::vector<Vec>> refs;  ///< x*_2 .. x*_{m+1}
  std::vector<Vec> inputs;
  std::vector<Vec> h;  ///< per certificate
  std::vector<Vec> v;
  Termination termination = Termination::Completed;
  std::string message;

  std::size_t size() const { return times.size(); }
};

struct SimOptions {
  double dt = 1e-3;      ///< s
  double horizon = 10.0; ///< s
  Vec workspace_lo;      ///< m; empty means unbounded
  Vec workspace_hi;
  int substeps = 0;      ///< per dt; 0 picks ceil(dt * largest tracking gain)
};

namespace detail {

inline int auto_substeps(const CascadeGains& g, double dt) {
  double k = 0;
  for (double s : g.tracking_slopes) k = std::max(k, s);
  return std::max(1, static_cast<int>(std::ceil(dt * k - 1e-12)));
}

inline bool inside(const SimOptions& o, const Vec& x1) {
  if (o.workspace_lo.size() == 0) return true;
  return (x1.array() >= o.workspace_lo.array()).all() && (x1.array() <= o.workspace_hi.array()).all();
}

}  // namespace detail

/// The first-level filter output x*_2 is held over each dt; the tracking laws are evaluated
/// at every RK4 stage of `substeps` substeps. Integrator chains with m = 1 hold u itself.
/// The VTOL plant is fed the snap computed on its flat coordinates.
inline Trajectory run_closed_loop(const PlantModel& plant, const CascadeController& ctl,
                                  const std::vector<CertificateSpec>& certs, const Vec& x0, const SimOptions& opt) {
  if (!(opt.dt > 0) || !(opt.horizon >= 0)) throw std::invalid_argument("dt must be positive, horizon nonnegative");
  Trajectory tr;
  const long steps = std::lround(opt.horizon / opt.dt);
  const int nsub = opt.substeps > 0 ? opt.substeps : detail::auto_substeps(ctl.gains, opt.dt);
  const double h = opt.dt / nsub;
  const auto* vtol = std::get_if<VtolNonlinear>(&plant);
  const auto* vloop = std::get_if<VelocityLoop>(&plant);

  auto flat = [&](const Vec& s) { return vtol ? vtol_to_flat(*vtol, s) : s; };
  Vec s = x0;
  for (long k = 0; k <= steps; ++k) {
    const double t = k * opt.dt;
    CascadeOutput out;
    try {
      const Vec z = flat(s);
      out = ctl.evaluate(vloop ? Vec(z.head(ctl.gains.m * ctl.block)) : z);
    } catch (const Error& e) {
      tr.termination = e.code() == Errc::ThrustSingularity ? Termination::ThrustSingularity : Termination::ControllerError;
      tr.message = e.what();
      break;
    }
    const Vec x1 = s.head(2);
    Vec hv(static_cast<Eigen::Index>(certs.size())), vv(static_cast<Eigen::Index>(certs.size()));
    for (std::size_t j = 0; j < certs.size(); ++j) {
      hv(static_cast<Eigen::Index>(j)) = clearance(certs[j], x1);
      vv(static_cast<Eigen::Index>(j)) = certs[j].mu.f(hv(static_cast<Eigen::Index>(j)));
    }
    tr.times.push_back(t);
    tr.states.push_back(s);
    tr.refs.push_back(out.refs);
    tr.inputs.push_back(out.u);
    tr.h.push_back(hv);
    tr.v.push_back(vv);
    if (!detail::inside(opt, x1)) {
      tr.termination = Termination::LeftWorkspace;
      tr.message = "x1 left the workspace box";
      break;
    }
    if (k == steps) break;

    const Vec xs2 = out.refs.front();
    try {
      if (vloop) {
        s = step_velocity_loop(*vloop, s, xs2, opt.dt);
      } else if (ctl.gains.m == 1) {
        s = step_integrator_chain(s, out.u, opt.dt);
      } else if (vtol) {
        for (int i = 0; i < nsub; ++i) {
          const Vec next =
              rk4_step([&](const Vec& x) { return vtol_rhs(*vtol, x, ctl.track(vtol_to_flat(*vtol, x), xs2).u); }, s, h);
          detail::check_finite(next);
          detail::check_thrust_sign(s, next);
          s = next;
        }
      } else {
        for (int i = 0; i < nsub; ++i)
          s = step_integrator_chain_feedback(s, [&](const Vec& x) { return ctl.track(x, xs2).u; }, h);
      }
    } catch (const Error& e) {
      tr.termination = e.code() == Errc::ThrustSingularity ? Termination::ThrustSingularity : Termination::NonFiniteState;
      tr.message = e.what();
      break;
    }
  }
  return tr;
}

struct TrajectoryMetrics {
  std::vector<double> min_clearance;  ///< per certificate, m
  std::optional<double> global_min;   ///< empty without obstacles
  double time_below_zero = 0;         ///< s
  std::optional<double> first_crossing;
  double max_xs2 = 0;
  double max_u = 0;
  Termination termination = Termination::Completed;
  std::size_t samples = 0;
  double final_time = 0;
};

inline TrajectoryMetrics trajectory_metrics(const Trajectory& tr) {
  TrajectoryMetrics m;
  m.termination = tr.termination;
  m.samples = tr.size();
  if (tr.size() == 0) return m;
  m.final_time = tr.times.back();
  const Eigen::Index nc = tr.h.front().size();
  m.min_clearance.assign(static_cast<std::size_t>(nc), std::numeric_limits<double>::infinity());
  const double dt = tr.size() > 1 ? tr.times[1] - tr.times[0] : 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    for (Eigen::Index j = 0; j < nc; ++j)
      m.min_clearance[static_cast<std::size_t>(j)] = std::min(m.min_clearance[static_cast<std::size_t>(j)], tr.h[k](j));
    if (nc > 0 && tr.h[k].minCoeff() < 0) {
      if (!m.first_crossing) m.first_crossing = tr.times[k];
      if (k + 1 < tr.size()) m.time_below_zero += dt;
    }
    m.max_xs2 = std::max(m.max_xs2, tr.refs[k].front().norm());
    m.max_u = std::max(m.max_u, tr.inputs[k].norm());
  }
  if (nc > 0) m.global_min = *std::min_element(m.min_clearance.begin(), m.min_clearance.end());
  return m;
}

}  // namespace csc
