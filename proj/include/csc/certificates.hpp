#pragma once

// Obstacle certificate functions V = mu(h) for segment and disc obstacles.

#include "csc/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace csc {

struct Segment {
  Vec o1;  ///< m
  Vec o2;  ///< m
};

struct Disc {
  Vec center;     ///< m
  double radius;  ///< m
};

/// Strictly decreasing, strictly convex barrier transform with mu(s) -> 0 as s -> inf.
struct BarrierTransform {
  std::string name;
  ScalarFn f;
  ScalarFn df;
  ScalarFn inv;
};

inline BarrierTransform exponential_mu() {
  return {"exponential", [](double s) { return std::exp(-s); }, [](double s) { return -std::exp(-s); },
          [](double y) { return -std::log(y); }};
}

struct CertificateSpec {
  std::variant<Segment, Disc> geometry;
  double safe_distance = 0.35;  ///< D_s, m
  double level = 1.0;           ///< v_j
  BarrierTransform mu = exponential_mu();
};

struct CertificateEval {
  double h = 0;   ///< signed clearance, m
  RowVec grad_h;  ///< dh/dx
  double v = 0;   ///< mu(h)
  RowVec grad_v;  ///< mu'(h) dh/dx
};

namespace detail {

// Heron's formula in Kahan's cancellation-free ordering.
inline double heron_area(double a, double b, double c) {
  if (a < b) std::swap(a, b);
  if (b < c) std::swap(b, c);
  if (a < b) std::swap(a, b);
  const double p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
  return 0.25 * std::sqrt(std::max(0.0, p));
}

inline void check_point(const Vec& x) {
  if (x.size() != 2) throw std::invalid_argument("certificates are planar: x must have 2 entries");
}

struct SegmentGeom {
  double dist;
  RowVec grad;  // empty when undefined (on the spine)
};

inline SegmentGeom segment_distance(const Segment& seg, const Vec& x, bool with_grad) {
  check_point(x);
  const Vec d = seg.o2 - seg.o1;
  const double len = d.norm();
  if (len < 1e-12) throw Error(Errc::DegenerateGeometry, "segment endpoints coincide");
  const Vec r1 = x - seg.o1;
  const Vec r2 = x - seg.o2;
  if (r1.dot(d) < 0) {
    const double n = r1.norm();
    return {n, with_grad ? RowVec(r1.transpose() / n) : RowVec()};
  }
  if (r2.dot(-d) < 0) {
    const double n = r2.norm();
    return {n, with_grad ? RowVec(r2.transpose() / n) : RowVec()};
  }
  const double a = r1.norm();
  const double b = r2.norm();
  const double s = heron_area(a, b, len);
  const double dist = 2.0 * s / len;
  if (!with_grad) return {dist, RowVec()};
  if (dist <= 1e-12 * std::max(1.0, len))
    throw Error(Errc::ZeroGradient, "point lies on the segment spine (h = -D_s)");
  const Vec g = len / (4.0 * s) * (2.0 * x - seg.o1 - seg.o2) + (a * a - b * b) / (4.0 * s * len) * (seg.o1 - seg.o2);
  return {dist, g.transpose()};
}

inline double effective_radius(const Disc& d, double safe_distance) { return d.radius + safe_distance; }

}  // namespace detail

/// Clearance h only; never throws on the spine.
inline double clearance(const CertificateSpec& cert, const Vec& x) {
  if (const auto* seg = std::get_if<Segment>(&cert.geometry))
    return detail::segment_distance(*seg, x, false).dist - cert.safe_distance;
  const auto& disc = std::get<Disc>(cert.geometry);
  detail::check_point(x);
  return (x - disc.center).norm() - detail::effective_radius(disc, cert.safe_distance);
}

inline CertificateEval eval_segment(const CertificateSpec& cert, const Vec& x) {
  const auto* seg = std::get_if<Segment>(&cert.geometry);
  if (!seg) throw std::invalid_argument("eval_segment: certificate is not a segment");
  const auto geo = detail::segment_distance(*seg, x, true);
  CertificateEval e;
  e.h = geo.dist - cert.safe_distance;
  e.grad_h = geo.grad;
  e.v = cert.mu.f(e.h);
  e.grad_v = cert.mu.df(e.h) * e.grad_h;
  return e;
}

/// Constraint data of the two-disc example: h = |x-o|^2 - R^2, row -(x-o)^T/|x-o|,
/// bound h/(2|x-o|), with R the disc radius inflated by the safe distance.
struct DiscRow {
  double h = 0;
  RowVec row;
  double bound = 0;
};

inline DiscRow disc_constraint_row(const Vec& center, double boundary_radius, const Vec& x) {
  detail::check_point(x);
  const Vec r = x - center;
  const double n = r.norm();
  if (n < 1e-12) throw Error(Errc::AtCenter, "x coincides with the disc center");
  DiscRow out;
  out.h = n * n - boundary_radius * boundary_radius;
  out.row = -r.transpose() / n;
  out.bound = out.h / (2.0 * n);
  return out;
}

inline DiscRow eval_disc(const CertificateSpec& cert, const Vec& x) {
  const auto* disc = std::get_if<Disc>(&cert.geometry);
  if (!disc) throw std::invalid_argument("eval_disc: certificate is not a disc");
  return disc_constraint_row(disc->center, detail::effective_radius(*disc, cert.safe_distance), x);
}

/// Certificate value and gradient for either geometry. Discs use the radial
/// clearance |x-c| - (radius + D_s).
inline CertificateEval evaluate(const CertificateSpec& cert, const Vec& x) {
  if (std::holds_alternative<Segment>(cert.geometry)) return eval_segment(cert, x);
  const auto& disc = std::get<Disc>(cert.geometry);
  detail::check_point(x);
  const Vec r = x - disc.center;
  const double n = r.norm();
  if (n < 1e-12) throw Error(Errc::AtCenter, "x coincides with the disc center");
  CertificateEval e;
  e.h = n - detail::effective_radius(disc, cert.safe_distance);
  e.grad_h = r.transpose() / n;
  e.v = cert.mu.f(e.h);
  e.grad_v = cert.mu.df(e.h) * e.grad_h;
  return e;
}

/// alpha_bar(s) = e^s - 1 and its inverse ln(1+s) for the exponential transform.
inline std::pair<ScalarFn, ScalarFn> mu_exponential_alpha_bar() {
  return {[](double s) { return std::expm1(s); }, [](double s) { return std::log1p(s); }};
}

struct TransformedCertificate {
  std::function<double(const Vec&)> v;
  ScalarFn alpha_prime;
};

struct SampleInterval {
  double lo = -0.5;
  double hi = 5.0;
  int samples = 2001;
};

/// Turns a barrier h >= 0 with rate alpha into V = mu(h) with rate
/// alpha'(s) = -alpha_mu(s + mu(0)) alpha(mu^-1(s + mu(0))), alpha_mu(y) = -mu'(mu^-1(y)) for y > 0.
/// Monotonicity and convexity of mu, and monotonicity of alpha', are checked on `interval`
/// (s values, scaled by mu(0)).
inline TransformedCertificate cbf_to_certificate(std::function<double(const Vec&)> h_fn, ScalarFn alpha,
                                                 const BarrierTransform& mu, SampleInterval interval = {}) {
  const double mu0 = mu.f(0.0);
  const double lo = interval.lo * mu0;
  const double hi = interval.hi * mu0;
  const int n = interval.samples;
  if (!(mu0 > 0) || n < 3) throw Error(Errc::BadTransform, "mu(0) must be positive");

  // mu: strictly decreasing and strictly convex on the h-range that maps into the interval.
  const double h_lo = mu.inv(hi + mu0);
  const double h_hi = mu.inv(std::max(lo + mu0, 1e-300));
  double prev = mu.f(h_lo);
  double prev_slope = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < n; ++i) {
    const double h0 = h_lo + (h_hi - h_lo) * (i - 1) / (n - 1);
    const double h1 = h_lo + (h_hi - h_lo) * i / (n - 1);
    const double cur = mu.f(h1);
    const double slope = (cur - prev) / (h1 - h0);
    if (!(cur < prev) || !(slope > prev_slope)) throw Error(Errc::BadTransform, "mu is not decreasing and convex");
    prev = cur;
    prev_slope = slope;
  }
  if (!(mu.f(1e3) < 1e-6 * mu0)) throw Error(Errc::BadTransform, "mu does not vanish at infinity");

  auto alpha_mu = [mu](double y) { return y > 0 ? -mu.df(mu.inv(y)) : 0.0; };
  ScalarFn alpha_prime = [alpha, alpha_mu, mu, mu0](double s) {
    const double y = s + mu0;
    return -alpha_mu(y) * alpha(mu.inv(y));
  };

  double last = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double s = lo + (hi - lo) * i / (n - 1);
    const double a = alpha_prime(s);
    if (!(a > last)) throw Error(Errc::BadTransform, "alpha' is not strictly increasing on the sampled interval");
    last = a;
  }
  if (std::abs(alpha_prime(0.0)) > 1e-12) throw Error(Errc::BadTransform, "alpha'(0) != 0");

  auto f = mu.f;
  return {[h_fn = std::move(h_fn), f](const Vec& x) { return f(h_fn(x)); }, alpha_prime};
}

struct DisjointnessSample {
  Vec x;
  int j;
  int k;
};

struct DisjointnessReport {
  int samples = 0;
  std::vector<DisjointnessSample> joint;  ///< x inside two unsafe superlevel sets at once
  int superlevel_samples = 0;
  int singular_samples = 0;  ///< superlevel samples where the gradient is undefined
  double min_grad_h = std::numeric_limits<double>::infinity();
  double min_grad_v = std::numeric_limits<double>::infinity();
};

/// Grid scan of the box [lo, hi] with about `samples` points.
inline DisjointnessReport disjointness_audit(const std::vector<CertificateSpec>& certs, const Vec& lo, const Vec& hi,
                                             int samples = 10000) {
  DisjointnessReport rep;
  const int per_axis = std::max(2, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(samples)))));
  for (int ix = 0; ix < per_axis; ++ix) {
    for (int iy = 0; iy < per_axis; ++iy) {
      Vec x(2);
      x << lo(0) + (hi(0) - lo(0)) * ix / (per_axis - 1), lo(1) + (hi(1) - lo(1)) * iy / (per_axis - 1);
      ++rep.samples;
      std::vector<int> inside;
      for (std::size_t j = 0; j < certs.size(); ++j) {
        const double vj = certs[j].mu.f(clearance(certs[j], x));
        if (vj < certs[j].level) continue;
        inside.push_back(static_cast<int>(j));
        ++rep.superlevel_samples;
        try {
          const auto e = evaluate(certs[j], x);
          rep.min_grad_h = std::min(rep.min_grad_h, e.grad_h.norm());
          rep.min_grad_v = std::min(rep.min_grad_v, e.grad_v.norm());
        } catch (const Error&) {
          ++rep.singular_samples;
        }
      }
      for (std::size_t a = 0; a < inside.size(); ++a)
        for (std::size_t b = a + 1; b < inside.size(); ++b) rep.joint.push_back({x, inside[a], inside[b]});
    }
  }
  return rep;
}

}  // namespace csc
