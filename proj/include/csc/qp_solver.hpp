#pragma once

// Dense projection QP:  min |u - u0|^2  s.t.  A u <= b.
// Dual active-set method (Goldfarb-Idnani with identity Hessian): start at the
// unconstrained minimizer u0 and add violated rows one at a time.

#include "csc/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace csc {

struct Polyhedron {
  Mat a;  ///< n_rows x n_u, rows need not be normalized
  Vec b;  ///< n_rows; +inf entries are never binding
};

struct QpSolution {
  Vec point;
  std::vector<int> active_indices;  ///< ascending
  Vec multipliers;                  ///< aligned with active_indices, >= 0
  int iterations = 0;
};

namespace detail {

inline Mat gather_rows(const Mat& a, const std::vector<int>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = a.row(idx[k]);
  return out;
}

}  // namespace detail

inline QpSolution solve_projection_qp(const Vec& u0, const Polyhedron& poly, double tol = 1e-9) {
  const Eigen::Index n = u0.size();
  const Eigen::Index m = poly.a.rows();
  if (poly.b.size() != m || (m > 0 && poly.a.cols() != n))
    throw std::invalid_argument("solve_projection_qp: dimension mismatch");

  Vec x = u0;
  std::vector<int> work;        // active set, insertion order
  std::vector<double> lambda;   // multipliers aligned with work
  const int budget = 100 * (static_cast<int>(m) + 1);
  int iters = 0;

  auto in_work = [&](int i) { return std::find(work.begin(), work.end(), i) != work.end(); };

  for (;;) {
    int p = -1;
    for (int i = 0; i < m; ++i) {
      if (!std::isfinite(poly.b(i)) || in_work(i)) continue;
      if (poly.a.row(i).dot(x) - poly.b(i) > tol) {
        p = i;
        break;
      }
    }
    if (p < 0) break;

    const Vec ap = poly.a.row(p).transpose();
    const double ap2 = ap.squaredNorm();
    if (ap2 == 0.0) throw Error(Errc::Infeasible, "zero row with negative bound");
    double lambda_p = 0.0;

    for (;;) {
      if (++iters > budget) throw Error(Errc::MaxIterations, "active-set budget exhausted");

      // Split a_p into its null-space part z and its span-of-active part N^T r.
      Vec z = ap;
      Vec r;
      if (!work.empty()) {
        const Mat nm = detail::gather_rows(poly.a, work);
        r = (nm * nm.transpose()).ldlt().solve(nm * ap);
        z -= nm.transpose() * r;
      }
      const double z2 = z.squaredNorm();
      const double slack = poly.a.row(p).dot(x) - poly.b(p);

      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (std::size_t k = 0; k < work.size(); ++k) {
        if (r(static_cast<Eigen::Index>(k)) <= 1e-14) continue;
        const double t = lambda[k] / r(static_cast<Eigen::Index>(k));
        const double eps = 1e-15 * std::max(1.0, t);
        if (drop < 0 || t < t1 - eps ||
            (std::abs(t - t1) <= eps && work[k] < work[static_cast<std::size_t>(drop)])) {
          t1 = t;
          drop = static_cast<int>(k);
        }
      }
      const bool primal_step = z2 > 1e-12 * ap2;
      const double t2 = primal_step ? slack / z2 : std::numeric_limits<double>::infinity();

      if (!std::isfinite(t1) && !std::isfinite(t2)) throw Error(Errc::Infeasible, "constraint set is empty");

      const double t = std::min(t1, t2);
      if (primal_step) x -= t * z;
      for (std::size_t k = 0; k < work.size(); ++k) lambda[k] -= t * r(static_cast<Eigen::Index>(k));
      lambda_p += t;

      if (t2 <= t1) {
        work.push_back(p);
        lambda.push_back(lambda_p);
        break;
      }
      work.erase(work.begin() + drop);
      lambda.erase(lambda.begin() + drop);
    }
  }

  QpSolution sol;
  sol.point = x;
  sol.iterations = iters;
  std::vector<std::size_t> order(work.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto l, auto r) { return work[l] < work[r]; });
  sol.multipliers.resize(static_cast<Eigen::Index>(work.size()));
  for (std::size_t k = 0; k < order.size(); ++k) {
    sol.active_indices.push_back(work[order[k]]);
    sol.multipliers(static_cast<Eigen::Index>(k)) = std::max(0.0, lambda[order[k]]);
  }
  return sol;
}

/// Tight rows reduced to a linearly independent subset. While the tight rows are
/// dependent, the row carrying the largest weight in the smallest singular
/// direction is dropped (larger index first on ties).
inline std::vector<int> nonredundant_active_rows(const QpSolution& sol, const Polyhedron& poly,
                                                 double tol = 1e-9) {
  std::vector<int> tight;
  for (Eigen::Index i = 0; i < poly.a.rows(); ++i)
    if (std::isfinite(poly.b(i)) && std::abs(poly.a.row(i).dot(sol.point) - poly.b(i)) <= tol)
      tight.push_back(static_cast<int>(i));

  const double rank_tol = 1e-8;
  while (!tight.empty()) {
    const Mat rows = detail::gather_rows(poly.a, tight);
    Eigen::SelfAdjointEigenSolver<Mat> es(rows * rows.transpose());
    const double smin = std::sqrt(std::max(0.0, es.eigenvalues()(0)));
    const double scale = std::max(1.0, rows.norm());
    if (smin > rank_tol * scale) break;
    const Vec dir = es.eigenvectors().col(0).cwiseAbs();
    Eigen::Index worst = 0;
    for (Eigen::Index k = 1; k < dir.size(); ++k)
      if (dir(k) >= dir(worst) - 1e-12) worst = k;
    tight.erase(tight.begin() + worst);
  }
  return tight;
}

/// L = 1 + 2/a_min * (1 + 2 a_hat max(1/a_min, 1)); a_hat defaults to |active_rows^T|.
inline double hager_lipschitz_bound(const Mat& active_rows, std::optional<double> a_hat = std::nullopt,
                                    double rank_tol = 1e-9) {
  if (active_rows.rows() == 0) return 1.0;
  if (active_rows.rows() > active_rows.cols())
    throw Error(Errc::RankDeficient, "more active rows than input dimensions");
  Eigen::JacobiSVD<Mat> svd(active_rows);
  const auto& s = svd.singularValues();
  const double a_min = s(s.size() - 1);
  if (a_min < rank_tol) throw Error(Errc::RankDeficient, "active rows are linearly dependent");
  const double ah = a_hat.value_or(s(0));
  return 1.0 + 2.0 / a_min * (1.0 + 2.0 * ah * std::max(1.0 / a_min, 1.0));
}

}  // namespace csc
