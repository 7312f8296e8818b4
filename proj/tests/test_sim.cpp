#include <gtest/gtest.h>

#include "csc/sim.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

using namespace csc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<CertificateSpec> vtol_obstacles() {
  return {{Segment{v2(-2.5, 1.5), v2(1.5, 2.0)}, 0.35, 1.0}, {Segment{v2(-2.5, 0.5), v2(2.5, 0.5)}, 0.35, 1.0}};
}

SafetyLayer layer_for(std::vector<CertificateSpec> certs, Vec rho0 = v2(0.6, 1.0)) {
  SafetyLayer s;
  s.certs = std::move(certs);
  s.nominal = [rho0](const Vec&) { return rho0; };
  s.basis = make_positive_basis(2, 11);
  s.k_phi = 2.0;
  s.g = Mat::Identity(2, 2);
  return s;
}

CascadeController controller(const SafetyLayer& s, std::vector<double> slopes) {
  CascadeGains g;
  g.m = static_cast<int>(slopes.size()) + 1;
  g.tracking_slopes = std::move(slopes);
  return build_cascade_controller(s, g);
}

Vec start_state(int m, Vec x1) {
  Vec z = Vec::Zero(2 * m);
  z.head(2) = x1;
  return z;
}

// Damped oscillator on a 2-chain, used where a smooth nontrivial flow is needed.
Vec damped(const Vec& z) { return -z.segment(0, 2) - z.segment(2, 2); }

}  // namespace

TEST(IntegratorChain, ZeroInputIsBallistic) {
  Vec z(4);
  z << 1.0, -2.0, 0.5, 0.25;
  Vec s = z;
  for (int k = 0; k < 1000; ++k) s = step_integrator_chain(s, Vec::Zero(2), 1e-3);
  EXPECT_NEAR(s(0), 1.5, 1e-12);
  EXPECT_NEAR(s(1), -1.75, 1e-12);
  EXPECT_EQ(s.tail(2), z.tail(2));

  Vec rest = v2(3.0, 4.0);
  rest.conservativeResize(4);
  rest.tail(2).setZero();
  EXPECT_EQ(step_integrator_chain(rest, Vec::Zero(2), 0.1), rest);
}

TEST(IntegratorChain, ConstantInputMatchesPolynomial) {
  Vec z(8);
  z << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8;
  const Vec u = v2(1.5, -2.5);
  Vec s = z;
  for (int k = 0; k < 1000; ++k) s = step_integrator_chain(s, u, 1e-3);
  for (int a = 0; a < 2; ++a) {
    const double t = 1.0;
    const double x = z(a) + z(2 + a) * t + z(4 + a) * t * t / 2 + z(6 + a) * t * t * t / 6 + u(a) * std::pow(t, 4) / 24;
    EXPECT_NEAR(s(a), x, 1e-10);
  }
}

TEST(IntegratorChain, RejectsBadArguments) {
  EXPECT_THROW(step_integrator_chain(Vec::Zero(4), Vec::Zero(2), 0.0), std::invalid_argument);
  EXPECT_THROW(step_integrator_chain(Vec::Zero(5), Vec::Zero(2), 1e-3), std::invalid_argument);
  Vec bad = Vec::Zero(4);
  bad(0) = std::numeric_limits<double>::quiet_NaN();
  try {
    step_integrator_chain(bad, Vec::Zero(2), 1e-3);
    FAIL() << "expected NonFiniteState";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteState);
  }
}

namespace {

Vec run_damped(double dt, double horizon) {
  Vec s(4);
  s << 1.0, -0.5, 0.0, 0.3;
  const long n = std::lround(horizon / dt);
  for (long k = 0; k < n; ++k) s = step_integrator_chain_feedback(s, damped, dt);
  return s;
}

Vec run_velocity_loop(double dt, double horizon) {
  const auto vl = VelocityLoop::identified();
  Vec s = Vec::Zero(8);
  const Vec ref = v2(0.6, 1.0);
  const long n = std::lround(horizon / dt);
  for (long k = 0; k < n; ++k) s = step_velocity_loop(vl, s, ref, dt);
  return s;
}

// log2 of successive differences of runs at dt, dt/2, dt/4.
template <class Run>
double richardson_order(Run run, double dt) {
  const Vec a = run(dt), b = run(dt / 2), c = run(dt / 4);
  return std::log2((a - b).norm() / (b - c).norm());
}

}  // namespace

TEST(Integration, Rk4OrderOnFeedbackChain) {
  const double p = richardson_order([](double dt) { return run_damped(dt, 5.0); }, 0.1);
  EXPECT_GE(p, 3.5);
  EXPECT_LE(p, 4.5);
}

TEST(Integration, Rk4OrderOnVelocityLoop) {
  const double p = richardson_order([](double dt) { return run_velocity_loop(dt, 2.0); }, 4e-3);
  EXPECT_GE(p, 3.5);
  EXPECT_LE(p, 4.5);
}

TEST(Vtol, HoverIsStationary) {
  const VtolNonlinear p;
  Vec s = Vec::Zero(8);
  s(0) = 0.3;
  s(1) = -1.2;
  s(6) = p.gravity;
  Vec x = s;
  for (int k = 0; k < 1000; ++k) x = step_vtol_nonlinear(p, x, Vec::Zero(2), 1e-3);
  EXPECT_LT((x - s).norm(), 1e-12);
}

TEST(Vtol, FlatMapRoundTrip) {
  const VtolNonlinear p;
  Vec s(8);
  s << 0.4, -0.3, 0.2, 0.1, 0.35, -0.7, 11.0, 0.9;
  const Vec back = flat_to_vtol(p, vtol_to_flat(p, s));
  EXPECT_LT((back - s).norm(), 1e-12);
}

TEST(Vtol, FourthDerivativeTracksConstantSnap) {
  const VtolNonlinear p;
  Vec s = Vec::Zero(8);
  s(6) = p.gravity;
  const Vec u = v2(0.3, -0.2);
  const double dt = 1e-4;
  std::vector<Vec> pos;
  for (int k = 0; k <= 3000; ++k) {
    pos.push_back(s.head(2));
    s = step_vtol_nonlinear(p, s, u, dt);
  }
  // from rest in flat coordinates p(t) = u t^4 / 24
  EXPECT_LT((pos.back() - u * std::pow(0.3, 4) / 24).norm(), 1e-9);
  const int h = 100, c = 2000;  // stencil step 0.01 s
  const double hh = h * dt;
  const Vec d4 = (pos[c + 2 * h] - 4 * pos[c + h] + 6 * pos[c] - 4 * pos[c - h] + pos[c - 2 * h]) / std::pow(hh, 4);
  EXPECT_LT((d4 - u).norm(), 1e-3);
}

TEST(Vtol, FourthDerivativeTracksVaryingSnap) {
  const VtolNonlinear p;
  Vec s = Vec::Zero(8);
  s(6) = p.gravity;
  const double dt = 1e-4;
  auto u_at = [](double t) { return v2(std::sin(3 * t), 0.5 * std::cos(2 * t)); };
  std::vector<Vec> pos;
  for (int k = 0; k <= 10000; ++k) {
    pos.push_back(s.head(2));
    s = step_vtol_nonlinear(p, s, u_at(k * dt), dt);
  }
  const int h = 100;
  for (int c : {3000, 5000, 8000}) {
    const Vec d4 = (pos[c + 2 * h] - 4 * pos[c + h] + 6 * pos[c] - 4 * pos[c - h] + pos[c - 2 * h]) / std::pow(h * dt, 4);
    EXPECT_LT((d4 - u_at(c * dt)).norm(), 5e-3) << "at t = " << c * dt;
  }
}

TEST(Vtol, ZeroThrustRaises) {
  const VtolNonlinear p;
  Vec s = Vec::Zero(8);
  try {
    step_vtol_nonlinear(p, s, Vec::Zero(2), 1e-3);
    FAIL() << "expected ThrustSingularity";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ThrustSingularity);
  }
  Vec z = Vec::Zero(8);
  z(5) = -p.gravity;  // free fall: no thrust
  EXPECT_THROW(flat_to_vtol(p, z), Error);
}

TEST(Vtol, ThrustCrossingZeroWithinAStepRaises) {
  // a1 = 1e-3 falling at 10 per second crosses zero inside a 1 ms step
  const VtolNonlinear p;
  Vec s = Vec::Zero(8);
  s(6) = 1e-3;
  s(7) = -10.0;
  try {
    step_vtol_nonlinear(p, s, Vec::Zero(2), 1e-3);
    FAIL() << "expected ThrustSingularity";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ThrustSingularity);
  }
}

TEST(Vtol, FeedbackLinearizationMatchesChainAtThirdOrder) {
  const VtolNonlinear p;
  Vec z0(8);
  z0 << 0.1, -0.2, 0.3, 0.1, -0.4, 0.5, 0.2, -0.1;
  auto u_at = [](double t) { return v2(std::sin(2 * t), std::cos(3 * t)); };
  auto gap = [&](double dt) {
    Vec chain = z0, vt = flat_to_vtol(p, z0);
    const long n = std::lround(1.0 / dt);
    for (long k = 0; k < n; ++k) {
      const Vec u = u_at(k * dt);
      chain = step_integrator_chain(chain, u, dt);
      vt = step_vtol_nonlinear(p, vt, u, dt);
    }
    return (chain.head(2) - vt.head(2)).norm();
  };
  const double e1 = gap(1e-2), e2 = gap(5e-3);
  EXPECT_LT(e1, 1e-2 * 1e-2 * 1e-2);
  EXPECT_LT(e2, e1 / 7.0);  // at least third order
}

TEST(VelocityLoop, ZeroErrorIsEquilibrium) {
  const auto vl = VelocityLoop::identified();
  Vec s = Vec::Zero(8);
  s.segment(2, 2) = v2(0.6, 1.0);
  const Vec x = step_velocity_loop(vl, s, v2(0.6, 1.0), 1e-3);
  EXPECT_EQ(x.tail(6), s.tail(6));
  EXPECT_NEAR(x(0), 0.6e-3, 1e-15);
}

TEST(VelocityLoop, UnitDcGain) {
  const Vec s = run_velocity_loop(1e-3, 60.0);
  EXPECT_NEAR(s(2), 0.6, 1e-6);
  EXPECT_NEAR(s(3), 1.0, 1e-6);
  EXPECT_LT(s.tail(4).norm(), 1e-6);
}

TEST(VelocityLoop, ChannelsAreHurwitz) {
  const auto vl = VelocityLoop::identified();
  for (int a = 0; a < 2; ++a) {
    const double t2 = vl.t2(a), t3 = vl.t3(a), t4 = vl.t4(a);
    Mat m(3, 3);
    m << 0, 1, 0, 0, 0, 1, -t4 * t3 * t2, -t4 * t3, -t4;
    const Eigen::EigenSolver<Mat> es(m);
    for (int i = 0; i < 3; ++i) EXPECT_LT(es.eigenvalues()(i).real(), 0.0);
    // s^3 + a s^2 + b s + c: Routh-Hurwitz needs a, b, c > 0 and a b > c
    const double ca = t4, cb = t4 * t3, cc = t4 * t3 * t2;
    EXPECT_GT(ca * cb, cc);
  }
}

TEST(ClosedLoop, NoObstaclesDriftsAlongNominal) {
  const auto s = layer_for({});
  const auto c = controller(s, {8, 8, 8});
  SimOptions o;
  o.horizon = 3.0;
  const auto tr = run_closed_loop(IntegratorChain{4, 2}, c, {}, start_state(4, v2(-2, 1)), o);
  ASSERT_EQ(tr.termination, Termination::Completed);
  ASSERT_EQ(tr.size(), 3001u);
  const Vec d = tr.states.back().head(2) - v2(-2, 1);
  EXPECT_GT(d.dot(v2(0.6, 1.0)), 0.5);
  EXPECT_LT(std::abs(d(0) * 1.0 - d(1) * 0.6) / d.norm(), 1e-9);
  for (const auto& h : tr.h) EXPECT_EQ(h.size(), 0);
  const auto m = trajectory_metrics(tr);
  EXPECT_FALSE(m.global_min.has_value());
  EXPECT_FALSE(m.first_crossing.has_value());
}

TEST(ClosedLoop, UniformGridAndRecordShapes) {
  const auto s = layer_for(vtol_obstacles());
  const auto c = controller(s, {8, 8, 8});
  SimOptions o;
  o.horizon = 0.5;
  o.dt = 1e-2;
  const auto tr = run_closed_loop(IntegratorChain{4, 2}, c, s.certs, start_state(4, v2(-2, 1)), o);
  ASSERT_EQ(tr.size(), 51u);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_NEAR(tr.times[k], 1e-2 * static_cast<double>(k), 1e-12);
    EXPECT_EQ(tr.h[k].size(), 2);
    EXPECT_EQ(tr.v[k].size(), 2);
    EXPECT_EQ(tr.refs[k].size(), 4u);
    EXPECT_EQ(tr.inputs[k], tr.refs[k].back());
  }
}

TEST(ClosedLoop, WorkspaceGuardStopsRun) {
  const auto s = layer_for({});
  const auto c = controller(s, {8, 8, 8});
  SimOptions o;
  o.workspace_lo = v2(-3, 0);
  o.workspace_hi = v2(-1.9, 3);
  const auto tr = run_closed_loop(IntegratorChain{4, 2}, c, {}, start_state(4, v2(-2, 1)), o);
  EXPECT_EQ(tr.termination, Termination::LeftWorkspace);
  EXPECT_GT(tr.states.back()(0), -1.9);
  EXPECT_LT(tr.times.back(), 10.0);
}

TEST(ClosedLoop, UnsafeGainsCrossIntoObstacle) {
  const auto s = layer_for(vtol_obstacles());
  const auto c = controller(s, {8, 8, 8});
  SimOptions o;
  o.horizon = 20.0;
  const auto tr = run_closed_loop(IntegratorChain{4, 2}, c, s.certs, start_state(4, v2(-2, 1)), o);
  ASSERT_EQ(tr.termination, Termination::Completed);
  const auto m = trajectory_metrics(tr);
  ASSERT_TRUE(m.global_min.has_value());
  EXPECT_LT(*m.global_min, 0.0);
  ASSERT_TRUE(m.first_crossing.has_value());
  // scan oracle
  std::size_t k = 0;
  while (k < tr.size() && tr.h[k].minCoeff() >= 0) ++k;
  ASSERT_LT(k, tr.size());
  EXPECT_EQ(*m.first_crossing, tr.times[k]);
  EXPECT_GT(m.time_below_zero, 0.0);
  double lo = 1e9;
  for (const auto& h : tr.h) lo = std::min(lo, h.minCoeff());
  EXPECT_EQ(*m.global_min, lo);
}

TEST(ClosedLoop, SafeGainsStayClear) {
  const auto s = layer_for(vtol_obstacles());
  const auto c = controller(s, {8, 320, 4e5});
  const auto tr = run_closed_loop(IntegratorChain{4, 2}, c, s.certs, start_state(4, v2(-2, 1)), SimOptions{});
  ASSERT_EQ(tr.termination, Termination::Completed);
  const auto m = trajectory_metrics(tr);
  EXPECT_EQ(m.samples, 10001u);
  EXPECT_GE(*m.global_min, 0.0);
  EXPECT_FALSE(m.first_crossing.has_value());
  EXPECT_EQ(m.time_below_zero, 0.0);
}

TEST(ClosedLoop, RelativeDegreeOneDecay) {
  // start 0.01 m from the lower spine: V = exp(0.34) > 1.4
  std::vector<CertificateSpec> certs{{Segment{v2(-2.5, 0.5), v2(2.5, 0.5)}, 0.35, 1.0}};
  const auto s = layer_for(certs, v2(0.0, -1.0));
  const auto c = controller(s, {});
  SimOptions o;
  o.horizon = 2.0;
  const double c_j = 1.4;
  const auto tr = run_closed_loop(IntegratorChain{1, 2}, c, certs, v2(0.0, 0.51), o);
  ASSERT_EQ(tr.termination, Termination::Completed);
  ASSERT_GT(tr.v.front()(0), c_j);
  bool entered = false;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double inc = tr.v[k](0) - tr.v[k - 1](0);
    EXPECT_LE(inc, 10 * o.dt * o.dt) << "at t = " << tr.times[k];
    if (!entered) EXPECT_LE(inc, 0.0) << "at t = " << tr.times[k];
    if (tr.v[k](0) <= c_j) entered = true;
  }
  EXPECT_TRUE(entered);
}

TEST(ClosedLoop, Deterministic) {
  const auto s = layer_for(vtol_obstacles());
  const auto c = controller(s, {8, 8, 8});
  SimOptions o;
  o.horizon = 2.0;
  const auto a = run_closed_loop(IntegratorChain{4, 2}, c, s.certs, start_state(4, v2(-2, 1)), o);
  const auto b = run_closed_loop(IntegratorChain{4, 2}, c, s.certs, start_state(4, v2(-2, 1)), o);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a.states[k], b.states[k]);
    ASSERT_EQ(a.inputs[k], b.inputs[k]);
  }
}

TEST(ClosedLoop, VelocityLoopPlantRuns) {
  const auto s = layer_for(vtol_obstacles());
  const auto c = controller(s, {});
  SimOptions o;
  o.horizon = 5.0;
  const auto tr = run_closed_loop(VelocityLoop::identified(), c, s.certs, start_state(4, v2(-2, 1)), o);
  EXPECT_EQ(tr.termination, Termination::Completed);
  EXPECT_EQ(tr.size(), 5001u);
  EXPECT_GT(tr.states.back()(0), -2.0);
}

TEST(ClosedLoop, VtolPlantFollowsChainBriefly) {
  // same controller on the flat chain and on the nonlinear model from hover
  const auto s = layer_for(vtol_obstacles());
  const auto c = controller(s, {8, 8, 8});
  SimOptions o;
  o.horizon = 1.0;
  const VtolNonlinear p;
  Vec hover = Vec::Zero(8);
  hover.head(2) = v2(-2, 1);
  hover(6) = p.gravity;
  const auto a = run_closed_loop(IntegratorChain{4, 2}, c, s.certs, start_state(4, v2(-2, 1)), o);
  const auto b = run_closed_loop(p, c, s.certs, hover, o);
  ASSERT_EQ(b.termination, Termination::Completed);
  EXPECT_LT((a.states.back().head(2) - b.states.back().head(2)).norm(), 1e-6);
}
