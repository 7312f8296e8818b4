#pragma once

// Polyhedral inner approximation of the quadratic feasible set on a positive basis,
// and the projection filter onto it.

#include "csc/common.hpp"
#include "csc/qcqp_safety.hpp"
#include "csc/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace csc {

struct PositiveBasis {
  Mat a_l;  ///< n_l x n_u, unit rows
  double c_a = 0;
};

struct ReshapedSet {
  PositiveBasis basis;
  Vec b_l;
};

struct BasisReport {
  int samples = 0;
  double max_norm_deviation = 0;  ///< max | |l_i| - 1 |
  double min_subset_sv = 0;       ///< over all n_u-subsets of rows
  int coverage_failures = 0;
  bool ok() const { return max_norm_deviation <= 1e-12 && min_subset_sv > 1e-8 && coverage_failures == 0; }
};

namespace detail {

template <class F>
void for_each_subset(int n, int k, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (k > n) return;
  for (;;) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

/// Nonnegative coefficients c with rows^T c = l0 over the chosen subset, or empty.
inline bool solve_nonnegative(const Mat& rows, const std::vector<int>& subset, const Vec& l0, double tol = 1e-12) {
  const int k = static_cast<int>(subset.size());
  Mat m(l0.size(), k);
  for (int i = 0; i < k; ++i) m.col(i) = rows.row(subset[static_cast<std::size_t>(i)]).transpose();
  Eigen::FullPivLU<Mat> lu(m);
  if (lu.rank() < k) return false;
  const Vec c = lu.solve(l0);
  return (m * c - l0).norm() <= 1e-9 && (c.array() >= -tol).all();
}

/// Whether l0 lies in the cone of the rows with l_i . l0 >= c_a, using at least n_u rows.
/// Every n_u-subset of the basis is independent, so by Caratheodory it is enough to try
/// n_u-subsets; this is an exact nonnegative least-squares feasibility test.
inline bool covered(const Mat& rows, const Vec& l0, double c_a) {
  std::vector<int> near;
  for (int i = 0; i < rows.rows(); ++i)
    if (rows.row(i).dot(l0) >= c_a - 1e-12) near.push_back(i);
  const int nu = static_cast<int>(l0.size());
  if (static_cast<int>(near.size()) < nu) return false;
  bool found = false;
  for_each_subset(static_cast<int>(near.size()), nu, [&](const std::vector<int>& sub) {
    if (found) return;
    std::vector<int> pick;
    for (int s : sub) pick.push_back(near[static_cast<std::size_t>(s)]);
    found = solve_nonnegative(rows, pick, l0);
  });
  return found;
}

inline Vec random_unit(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = nd(rng);
  } while (v.norm() < 1e-9);
  return v.normalized();
}

inline Mat fibonacci_sphere(int n) {
  Mat p(n, 3);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    p.row(i) << r * std::cos(golden * i), r * std::sin(golden * i), z;
  }
  return p;
}

/// Largest c such that l0 is in the cone of some n_u rows all with l_i . l0 >= c.
inline double coverage_constant(const Mat& rows, const Vec& l0) {
  double best = -1.0;
  const int nu = static_cast<int>(l0.size());
  for_each_subset(static_cast<int>(rows.rows()), nu, [&](const std::vector<int>& sub) {
    double worst = 1.0;
    for (int i : sub) worst = std::min(worst, rows.row(i).dot(l0));
    if (worst <= best) return;
    if (solve_nonnegative(rows, sub, l0)) best = worst;
  });
  return best;
}

}  // namespace detail

inline BasisReport validate_positive_basis(const PositiveBasis& basis, int samples = 1000, std::uint64_t seed = 7) {
  if (samples < 100) throw std::invalid_argument("validate_positive_basis: need at least 100 samples");
  const Mat& a = basis.a_l;
  const int nu = static_cast<int>(a.cols());
  BasisReport rep;
  rep.samples = samples;
  for (int i = 0; i < a.rows(); ++i) rep.max_norm_deviation = std::max(rep.max_norm_deviation, std::abs(a.row(i).norm() - 1.0));
  rep.min_subset_sv = std::numeric_limits<double>::infinity();
  detail::for_each_subset(static_cast<int>(a.rows()), nu, [&](const std::vector<int>& sub) {
    Mat m(nu, nu);
    for (int i = 0; i < nu; ++i) m.row(i) = a.row(sub[static_cast<std::size_t>(i)]);
    const auto sv = Eigen::JacobiSVD<Mat>(m).singularValues();
    rep.min_subset_sv = std::min(rep.min_subset_sv, sv(nu - 1));
  });
  std::mt19937_64 rng(seed);
  for (int k = 0; k < samples; ++k)
    if (!detail::covered(a, detail::random_unit(rng, nu), basis.c_a)) ++rep.coverage_failures;
  return rep;
}

/// n_u = 2: regular polygon at angles 2 pi i / n_l, i = 1..n_l, with c_a = cos(2 pi / n_l).
/// n_u = 3: Fibonacci-sphere directions with c_a from a dense sampled coverage scan; below
/// n_l = 10 some direction is not covered with a positive constant and BadCount is raised.
inline PositiveBasis make_positive_basis(int n_u, int n_l) {
  if (n_u != 2 && n_u != 3) throw Error(Errc::UnsupportedDimension, "positive bases are built for n_u in {2, 3}");
  if (n_l <= n_u) throw Error(Errc::BadCount, "need n_l > n_u");
  PositiveBasis b;
  if (n_u == 2) {
    if (n_l % 2 == 0) throw Error(Errc::BadCount, "polygon bases need odd n_l");
    b.a_l = Mat(n_l, 2);
    for (int i = 1; i <= n_l; ++i) b.a_l.row(i - 1) << std::cos(2 * M_PI * i / n_l), std::sin(2 * M_PI * i / n_l);
    b.c_a = std::cos(2 * M_PI / n_l);
    return b;
  }
  b.a_l = detail::fibonacci_sphere(n_l);
  const Mat probes = detail::fibonacci_sphere(4000);
  double worst = 1.0;
  for (int k = 0; k < probes.rows(); ++k)
    worst = std::min(worst, detail::coverage_constant(b.a_l, probes.row(k).transpose()));
  if (!(worst > 0)) throw Error(Errc::BadCount, "Fibonacci directions do not positively span R^3 for this n_l");
  // Angular margin for directions between the probes, never more than half the slack to 90 degrees.
  const double gap = std::acos(worst);
  b.c_a = std::cos(gap + std::min(0.05, 0.5 * (M_PI / 2 - gap)));
  if (!(b.c_a > 0)) throw Error(Errc::BadCount, "coverage constant is not positive for this n_l");
  return b;
}

/// cos(acos sqrt(1 - c_bar^2) + acos c_a); requires c_a > cos(pi/2 - acos sqrt(1 - c_bar^2)).
inline double cbar_a(double c_bar, double c_a) {
  if (!(c_bar >= 0 && c_bar < 1)) throw std::invalid_argument("cbar_a: c_bar must lie in [0, 1)");
  const double t = std::acos(std::sqrt(1.0 - c_bar * c_bar));
  if (!(c_a > std::cos(M_PI / 2 - t)))
    throw Error(Errc::ConditionViolated, "coverage constant too small for the norm coefficient");
  return std::cos(t + std::acos(c_a));
}

/// b_L = A_L s + rowwise min over constraints j of
///   max(A_L a_j, cbar_A) (b_j - a_j s - c_j |s|) / (1 + c_j) + max(k_phi (cbar_A - A_L a_j), 0).
/// With no constraints every entry is +inf.
inline ReshapedSet reshape_b_l(const Vec& selection, const ConstraintSet& cs, const PositiveBasis& basis,
                               double k_phi = 2.0, double tol = 1e-9) {
  if (k_phi < 0) throw std::invalid_argument("reshape_b_l: k_phi must be nonnegative");
  const int nl = static_cast<int>(basis.a_l.rows());
  ReshapedSet out{basis, Vec::Constant(nl, std::numeric_limits<double>::infinity())};
  if (cs.size() == 0) return out;
  const Vec slack = cs.b_c - cs.a_c * selection - cs.c_c * selection.norm();
  if (slack.minCoeff() < -tol) throw Error(Errc::SelectionNotFeasible, "selection lies outside the feasible set");
  const double cb = cbar_a(cs.c_c.maxCoeff(), basis.c_a);
  const Mat m = basis.a_l * cs.a_c.transpose();
  const Vec base = basis.a_l * selection;
  for (int i = 0; i < nl; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < cs.size(); ++j) {
      const double phi1 = std::max(m(i, j), cb) * std::max(0.0, slack(j)) / (1.0 + cs.c_c(j));
      const double phi2 = std::max(k_phi * (cb - m(i, j)), 0.0);
      best = std::min(best, phi1 + phi2);
    }
    out.b_l(i) = base(i) + best;
  }
  return out;
}

/// Vertices of a bounded planar polytope {a u <= b}, by intersecting row pairs.
inline std::vector<Vec> polygon_vertices(const Mat& a, const Vec& b, double tol = 1e-9) {
  if (a.cols() != 2) throw Error(Errc::UnsupportedDimension, "polygon_vertices is planar");
  std::vector<Vec> out;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i + 1; j < a.rows(); ++j) {
      Eigen::Matrix2d m;
      m << a(i, 0), a(i, 1), a(j, 0), a(j, 1);
      if (std::abs(m.determinant()) < 1e-12) continue;
      const Vec v = m.partialPivLu().solve(Eigen::Vector2d(b(i), b(j)));
      if ((a * v - b).maxCoeff() <= tol) out.push_back(v);
    }
  return out;
}

/// n points of the planar polytope {a u <= b}: its vertices, then uniform rejection
/// samples from the bounding box of the vertices.
inline std::vector<Vec> sample_polygon(const Mat& a, const Vec& b, int n, std::mt19937_64& rng) {
  auto pts = polygon_vertices(a, b);
  if (pts.empty()) return pts;
  Vec lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::uniform_real_distribution<double> ux(lo(0), std::max(hi(0), lo(0) + 1e-300));
  std::uniform_real_distribution<double> uy(lo(1), std::max(hi(1), lo(1) + 1e-300));
  long tries = 0;
  while (static_cast<int>(pts.size()) < n && tries < 1000L * n) {
    ++tries;
    Vec p(2);
    p << ux(rng), uy(rng);
    if ((a * p - b).maxCoeff() <= 0) pts.push_back(p);
  }
  if (static_cast<int>(pts.size()) > n) pts.resize(static_cast<std::size_t>(n));
  return pts;
}

/// Projection of the nominal control onto the reshaped set.
inline Vec reshaped_filter(const Vec& nominal, const ConstraintSet& cs, const PositiveBasis& basis, double k_phi,
                           const Vec& selection, double tol = 1e-9) {
  const auto set = reshape_b_l(selection, cs, basis, k_phi, tol);
  return solve_projection_qp(nominal, {set.basis.a_l, set.b_l}, tol).point;
}

}  // namespace csc
