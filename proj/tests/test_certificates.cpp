#include "csc/certificates.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace csc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

CertificateSpec lower_segment() { return {Segment{v2(-2.5, 0.5), v2(2.5, 0.5)}, 0.35, 1.0}; }
CertificateSpec upper_segment() { return {Segment{v2(-2.5, 1.5), v2(1.5, 2.0)}, 0.35, 1.0}; }

// Distance along the gradient ray to the level set {h = 0}, by bisection.
double level_set_distance(const CertificateSpec& c, const Vec& x) {
  const auto e = evaluate(c, x);
  const Vec dir = (e.h > 0 ? -1.0 : 1.0) * e.grad_h.transpose();
  // March to the first sign change, then bisect.
  double lo = 0, hi = 1e-3;
  while ((clearance(c, x + hi * dir) > 0) == (e.h > 0)) {
    lo = hi;
    hi += 1e-3;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((clearance(c, x + mid * dir) > 0) == (e.h > 0) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Segment, InteriorBranchExample) {
  const auto e = eval_segment(lower_segment(), v2(-2, 1));
  EXPECT_NEAR(e.h, 0.15, 1e-12);
  EXPECT_NEAR(e.grad_h(0), 0.0, 1e-12);
  EXPECT_NEAR(e.grad_h(1), 1.0, 1e-12);
  EXPECT_NEAR(e.v, std::exp(-0.15), 1e-12);
}

TEST(Segment, EndpointBranch) {
  const auto c = lower_segment();
  const auto e = eval_segment(c, v2(-3.5, 0.5));
  EXPECT_NEAR(e.h, 1.0 - 0.35, 1e-12);
  EXPECT_NEAR(e.grad_h(0), -1.0, 1e-12);
  EXPECT_NEAR(e.grad_h(1), 0.0, 1e-12);
  const auto f = eval_segment(c, v2(3.0, 1.0));
  EXPECT_NEAR(f.h, std::sqrt(0.5) - 0.35, 1e-12);
  EXPECT_NEAR(f.grad_h(0), std::sqrt(0.5), 1e-12);
}

TEST(Segment, MatchesSampledDistance) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ux(-4, 4), uy(-1, 3);
  for (const auto& c : {lower_segment(), upper_segment()}) {
    const auto& s = std::get<Segment>(c.geometry);
    for (int k = 0; k < 50; ++k) {
      const Vec x = v2(ux(rng), uy(rng));
      const double ref = oracle::sampled_segment_distance(x, s.o1, s.o2, 100000);
      EXPECT_NEAR(eval_segment(c, x).h + c.safe_distance, ref, 1e-4);
    }
  }
}

TEST(Segment, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> ux(-4, 4), uy(-1, 3);
  int checked = 0;
  for (const auto& c : {lower_segment(), upper_segment()}) {
    for (int k = 0; k < 500; ++k) {
      const Vec x = v2(ux(rng), uy(rng));
      if (clearance(c, x) + c.safe_distance < 1e-3) continue;
      const auto e = eval_segment(c, x);
      const Vec gh = oracle::fd_gradient([&](const Vec& p) { return clearance(c, p); }, x);
      const Vec gv = oracle::fd_gradient([&](const Vec& p) { return c.mu.f(clearance(c, p)); }, x);
      EXPECT_LE((gh - e.grad_h.transpose()).norm(), 1e-6);
      EXPECT_LE((gv - e.grad_v.transpose()).norm(), 1e-6);
      EXPECT_NEAR(e.grad_h.norm(), 1.0, 1e-9);
      ++checked;
    }
  }
  EXPECT_GT(checked, 900);
}

TEST(Segment, BranchBoundaryUsesInteriorAndOneSidedDifferencesAgree) {
  const auto c = lower_segment();
  const Vec x = v2(-2.5, 1.3);  // (x - o1).(o2 - o1) == 0 exactly
  const auto e = eval_segment(c, x);
  EXPECT_NEAR(e.h, 0.8 - 0.35, 1e-12);
  const double step = 1e-6;
  const Vec ex = v2(step, 0);
  const double right = (clearance(c, x + ex) - clearance(c, x)) / step;
  const double left = (clearance(c, x) - clearance(c, x - ex)) / step;
  EXPECT_NEAR(right, e.grad_h(0), 1e-5);
  EXPECT_NEAR(left, e.grad_h(0), 1e-5);
}

TEST(Segment, SpineAndDegenerateGeometryRaise) {
  try {
    eval_segment(lower_segment(), v2(0.0, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroGradient);
  }
  EXPECT_NEAR(clearance(lower_segment(), v2(0.0, 0.5)), -0.35, 1e-12);
  CertificateSpec bad{Segment{v2(1, 1), v2(1, 1)}, 0.35, 1.0};
  try {
    eval_segment(bad, v2(0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateGeometry);
  }
}

TEST(Segment, LevelSetConsistency) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ux(-3, 3), uy(-0.5, 2.5);
  for (int k = 0; k < 2000; ++k) {
    const Vec x = v2(ux(rng), uy(rng));
    for (const auto& c : {lower_segment(), upper_segment()}) {
      const double h = clearance(c, x);
      EXPECT_EQ(c.mu.f(h) >= c.level, h <= 0);
    }
  }
}

TEST(Segment, SignedDistanceSurrogateMatchesAlphaBar) {
  const auto [abar, abar_inv] = mu_exponential_alpha_bar();
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> ux(-3, 3), uy(-0.5, 2.5);
  int checked = 0;
  for (int k = 0; k < 400; ++k) {
    const Vec x = v2(ux(rng), uy(rng));
    const auto c = lower_segment();
    const double h = clearance(c, x);
    if (h + c.safe_distance < 1e-3 || std::abs(h) < 1e-6) continue;
    const auto e = evaluate(c, x);
    const double d = (e.v > c.level ? 1.0 : -1.0) * level_set_distance(c, x);
    EXPECT_NEAR(abar(d), e.v - c.level, 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 300);
}

TEST(Disc, ExampleRow) {
  const auto r = disc_constraint_row(v2(0, 1), 1.0, v2(0, 0));
  EXPECT_NEAR(r.h, 0.0, 1e-15);
  EXPECT_NEAR(r.row(0), 0.0, 1e-15);
  EXPECT_NEAR(r.row(1), 1.0, 1e-15);
  EXPECT_NEAR(r.bound, 0.0, 1e-15);
  // Inflated radius: 0.5 + D_s 0.5 gives the same boundary.
  CertificateSpec c{Disc{v2(0, 1), 0.5}, 0.5, 1.0};
  EXPECT_NEAR(eval_disc(c, v2(0, 0)).bound, 0.0, 1e-15);
}

TEST(Disc, FarAwayBoundGrowsLinearly) {
  const auto r = disc_constraint_row(v2(0, 1), 1.0, v2(1000, 1));
  EXPECT_NEAR(r.bound / 1000.0, 0.5, 1e-6);
}

TEST(Disc, CenterRaises) {
  try {
    disc_constraint_row(v2(0, 1), 1.0, v2(0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AtCenter);
  }
}

TEST(Disc, GradientMatchesFiniteDifferences) {
  CertificateSpec c{Disc{v2(0.3, -0.2), 0.4}, 0.2, 1.0};
  std::mt19937_64 rng(25);
  for (int k = 0; k < 200; ++k) {
    const Vec x = oracle::random_normal(rng, 2, 1.5);
    if ((x - v2(0.3, -0.2)).norm() < 1e-2) continue;
    const auto e = evaluate(c, x);
    const Vec gh = oracle::fd_gradient([&](const Vec& p) { return clearance(c, p); }, x);
    EXPECT_LE((gh - e.grad_h.transpose()).norm(), 1e-6);
  }
}

TEST(AlphaBar, Values) {
  const auto [abar, inv] = mu_exponential_alpha_bar();
  EXPECT_EQ(abar(0), 0.0);
  EXPECT_EQ(inv(0), 0.0);
  EXPECT_NEAR(abar(1), 1.718281828459045, 1e-15);
  double worst = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double s = -0.9 + 5.9 * i / 1000.0;
    worst = std::max(worst, std::abs(inv(abar(s)) - s));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(CbfTransform, ExponentialLinearRate) {
  const double k = 2.0;
  auto h_fn = [](const Vec& x) { return x.norm() - 1.0; };
  const auto t = cbf_to_certificate(h_fn, [k](double s) { return k * s; }, exponential_mu());
  EXPECT_NEAR(t.v(v2(1, 0)), 1.0, 1e-15);
  EXPECT_EQ(t.alpha_prime(0.0), 0.0);
  for (double s : {-0.5, -0.2, 0.1, 0.7, 3.0}) {
    const double hand = (s + 1) * k * (-std::log(s + 1)) * (-1);
    EXPECT_NEAR(t.alpha_prime(s), hand, 1e-12);
    if (s > 0) EXPECT_GT(t.alpha_prime(s), 0.0);
  }
  std::mt19937_64 rng(26);
  for (int i = 0; i < 1000; ++i) {
    const Vec x = oracle::random_normal(rng, 2, 1.5);
    EXPECT_EQ(t.v(x) <= 1.0, h_fn(x) >= 0);
  }
}

TEST(CbfTransform, RejectsIncreasingTransform) {
  BarrierTransform bad{"increasing", [](double s) { return std::exp(s); }, [](double s) { return std::exp(s); },
                       [](double y) { return std::log(y); }};
  try {
    cbf_to_certificate([](const Vec& x) { return x(0); }, [](double s) { return s; }, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BadTransform);
  }
}

TEST(Disjointness, CourseSegmentsAreDisjoint) {
  const auto rep = disjointness_audit({upper_segment(), lower_segment()}, v2(-3.5, -0.5), v2(3.5, 3.0), 40000);
  EXPECT_TRUE(rep.joint.empty());
  EXPECT_GT(rep.superlevel_samples, 0);
  EXPECT_NEAR(rep.min_grad_h, 1.0, 1e-9);
  EXPECT_GE(rep.min_grad_v, 1.0 - 1e-9);
}

TEST(Disjointness, OverlappingDiscsReported) {
  CertificateSpec a{Disc{v2(0, 0), 0.5}, 0.1, 1.0};
  CertificateSpec b{Disc{v2(0.8, 0), 0.5}, 0.1, 1.0};
  const auto rep = disjointness_audit({a, b}, v2(-1, -1), v2(2, 1), 2000);
  EXPECT_FALSE(rep.joint.empty());
}
