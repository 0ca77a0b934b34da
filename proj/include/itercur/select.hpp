#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>

#include "itercur/matrix.hpp"
#include "itercur/rng.hpp"

namespace itercur {

namespace detail {

inline bool lu_is_singular(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
  const Eigen::VectorXd d = lu.matrixLU().diagonal().cwiseAbs();
  const double dmax = d.maxCoeff();
  return dmax == 0.0 || d.minCoeff() < 1e-13 * dmax;
}

// Shared core of deim(): in-place oblique deflation, each step solving the
// interpolation system U(s,1:j-1) by LU with partial pivoting. With
// `fallback` set, a singular step degrades to the argmax of the undeflated
// column over rows not yet selected (counted via *fallbacks) instead of
// throwing.
inline IndexVector deim_impl(Eigen::MatrixXd u, const IndexVector* masked_rows, bool fallback,
                             int* fallbacks) {
  const Index m = u.rows();
  const Index k = u.cols();
  if (k < 1 || k > m)
    throw validation_error("deim: need 1 <= k <= m, got k=" + std::to_string(k) +
                           ", m=" + std::to_string(m));
  if (masked_rows) {
    validate_index_vector(*masked_rows, m, "deim masked_rows");
    for (Index r : *masked_rows) u.row(r).setZero();
  }

  IndexVector s;
  s.reserve(static_cast<std::size_t>(k));
  s.push_back(argmax_abs(u.col(0)));
  for (Index j = 1; j < k; ++j) {
    Eigen::MatrixXd sub(j, j);
    Eigen::VectorXd rhs(j);
    for (Index i = 0; i < j; ++i) {
      for (Index l = 0; l < j; ++l) sub(i, l) = u(s[static_cast<std::size_t>(i)], l);
      rhs[i] = u(s[static_cast<std::size_t>(i)], j);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sub);
    if (lu_is_singular(lu)) {
      if (!fallback) throw deim_singular_error(static_cast<int>(j) + 1);
      if (fallbacks) ++*fallbacks;
      Eigen::VectorXd r = u.col(j);
      for (Index chosen : s) r[chosen] = 0.0;
      s.push_back(argmax_abs(r));
      continue;
    }
    u.col(j) -= u.leftCols(j) * lu.solve(rhs);
    const Index pick = argmax_abs(u.col(j));
    for (Index chosen : s)
      if (chosen == pick)
        throw numerical_error("deim: repeated index " + std::to_string(pick) + " at step " +
                              std::to_string(j + 1));
    s.push_back(pick);
  }
  return s;
}

}  // namespace detail

// DEIM index selection: per column, the largest-magnitude entry of the
// residual after oblique deflation against previously selected rows. The
// deflated column is exactly zero at already-chosen indices, so indices never
// repeat. Optional masked rows are zeroed first (the without-replacement
// guard of the two-sided drivers).
inline IndexVector deim(const Eigen::MatrixXd& u) {
  return detail::deim_impl(u, nullptr, false, nullptr);
}

inline IndexVector deim(const Eigen::MatrixXd& u, const IndexVector& masked_rows) {
  return detail::deim_impl(u, &masked_rows, false, nullptr);
}

inline IndexVector deim_with_fallback(const Eigen::MatrixXd& u, const IndexVector& masked_rows,
                                      int& fallbacks) {
  return detail::deim_impl(u, &masked_rows, true, &fallbacks);
}

// QDEIM: the first k pivots of a column-pivoted Householder QR of U^T.
inline IndexVector qdeim(const Eigen::MatrixXd& u) {
  const Index k = u.cols();
  if (k < 1 || k > u.rows()) throw validation_error("qdeim: need 1 <= k <= m");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(u.transpose());
  const auto& perm = qr.colsPermutation().indices();
  IndexVector s(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) s[static_cast<std::size_t>(i)] = perm[i];
  return s;
}

struct MaxvolResult {
  IndexVector indices;
  int sweeps = 0;
  bool warning = false;  // sweep budget exhausted before reaching dominance
};

// Greedy row swaps toward a dominant k x k submatrix: while some entry of
// U * U(s,:)^{-1} exceeds swap_tol in magnitude, swap that row in. Every swap
// grows |det U(s,:)|, so the iteration cannot cycle.
inline MaxvolResult maxvol(const Eigen::MatrixXd& u, IndexVector start, double swap_tol = 1.01,
                           int max_sweeps = 100) {
  const Index m = u.rows();
  const Index k = u.cols();
  if (static_cast<Index>(start.size()) != k)
    throw validation_error("maxvol: start must hold k indices");
  validate_index_vector(start, m, "maxvol start");
  if (swap_tol < 1.0) throw validation_error("maxvol: swap_tol must be >= 1");

  MaxvolResult out;
  out.indices = std::move(start);
  for (out.sweeps = 0; out.sweeps < max_sweeps; ++out.sweeps) {
    Eigen::MatrixXd sub(k, k);
    for (Index i = 0; i < k; ++i) sub.row(i) = u.row(out.indices[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sub);
    if (detail::lu_is_singular(lu))
      throw numerical_error("maxvol: singular submatrix U(s,:)");
    const Eigen::MatrixXd g = u * lu.inverse();  // k is small
    Index bi = 0, bj = 0;
    double best = 0.0;
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < m; ++i)
        if (std::abs(g(i, j)) > best) {
          best = std::abs(g(i, j));
          bi = i;
          bj = j;
        }
    if (best <= swap_tol) return out;
    out.indices[static_cast<std::size_t>(bj)] = bi;
  }
  out.warning = true;
  return out;
}

inline MaxvolResult maxvol(const Eigen::MatrixXd& u, double swap_tol = 1.01,
                           int max_sweeps = 100) {
  return maxvol(u, deim(u), swap_tol, max_sweeps);
}

// Probabilities over n items; excluded items carry 0.
struct SamplingDistribution {
  Eigen::VectorXd pr;

  void validate() const {
    if (pr.size() == 0 || pr.minCoeff() < 0.0)
      throw validation_error("SamplingDistribution: probabilities must be nonnegative");
    if (std::abs(pr.sum() - 1.0) > 1e-12)
      throw validation_error("SamplingDistribution: probabilities must sum to 1");
  }

  Index support() const { return (pr.array() > 0.0).count(); }
};

// pr_j = ||V(j,:)||^2 / k for V with orthonormal columns.
inline SamplingDistribution leverage_scores(const Eigen::MatrixXd& v) {
  const Index k = v.cols();
  if (k < 1) throw validation_error("leverage_scores: V must have at least one column");
  for (Index j = 0; j < k; ++j)
    if (std::abs(v.col(j).norm() - 1.0) > 1e-6)
      throw validation_error("leverage_scores: column " + std::to_string(j) +
                             " is not unit-norm; V must have orthonormal columns");
  SamplingDistribution dist;
  dist.pr = v.rowwise().squaredNorm() / static_cast<double>(k);
  return dist;
}

// `count` distinct draws without replacement, renormalizing after each draw.
inline IndexVector sample_distribution(const SamplingDistribution& dist, Index count,
                                       std::uint64_t seed) {
  dist.validate();
  if (count < 1) throw validation_error("sample_distribution: count must be positive");
  if (dist.support() < count)
    throw validation_error("sample_distribution: support smaller than requested count");
  rng gen = rng::stream(seed, 0x5A3D);
  Eigen::VectorXd w = dist.pr;
  IndexVector out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index t = 0; t < count; ++t) {
    const double total = w.sum();
    const double target = gen.next_double() * total;
    double acc = 0.0;
    Index pick = -1;
    for (Index j = 0; j < w.size(); ++j) {
      if (w[j] <= 0.0) continue;
      acc += w[j];
      pick = j;
      if (acc >= target) break;
    }
    out.push_back(pick);
    w[pick] = 0.0;
  }
  return out;
}

struct VolumeSamplingResult {
  IndexVector indices;
  int rounds = 0;
  bool warning = false;  // residual support ran out before k indices
};

// Randomized volume sampling for column subset selection: t rounds of c draws
// from the squared-column-norm distribution of the current residual
// E = A - CC^+A. Column norms of E are tracked as ||a_j||^2 - ||Q^T a_j||^2
// with Q an orthonormal basis of the selected columns, so no m x n residual
// is ever formed.
inline VolumeSamplingResult volume_sampling(const Matrix& a, Index k, Index t, Index c,
                                            std::uint64_t seed) {
  if (t < 1 || c < 1 || t * c != k)
    throw validation_error("volume_sampling: need t*c == k with t, c >= 1");
  if (k > a.cols()) throw validation_error("volume_sampling: k exceeds column count");

  const Index m = a.rows();
  Eigen::VectorXd res = a.column_squared_norms();
  const double total0 = res.sum();
  Eigen::MatrixXd q(m, k);
  Index q_cols = 0;

  VolumeSamplingResult out;
  for (Index round = 0; round < t; ++round) {
    const double remaining = res.sum();
    if (remaining <= 1e-20 * total0) break;  // exact capture, nothing left to sample

    const Index available = (res.array() > 0.0).count();
    const Index draw = std::min(c, available);
    if (draw < 1) break;

    SamplingDistribution dist;
    dist.pr = res / remaining;
    const IndexVector picked =
        sample_distribution(dist, draw, rng::mix64(seed + 0x9E37u * static_cast<std::uint64_t>(round + 1)));
    ++out.rounds;

    for (Index j : picked) {
      out.indices.push_back(j);
      res[j] = 0.0;
      Eigen::VectorXd col = a.select_columns({j}).col(0);
      const double nrm0 = col.norm();
      if (q_cols > 0) {
        const auto qb = q.leftCols(q_cols);
        col.noalias() -= qb * (qb.transpose() * col);
        col.noalias() -= qb * (qb.transpose() * col);
      }
      const double nrm = col.norm();
      if (nrm <= 1e-13 * nrm0 || nrm == 0.0) continue;  // already spanned
      q.col(q_cols++) = col / nrm;
      const Eigen::VectorXd proj = a.apply_adjoint(q.col(q_cols - 1));
      res -= proj.cwiseAbs2();
      res = res.cwiseMax(0.0);
      for (Index sel : out.indices) res[sel] = 0.0;
    }
    if (draw < c) {
      out.warning = true;
      break;
    }
  }
  if (static_cast<Index>(out.indices.size()) < k) out.warning = true;
  return out;
}

// Tagged selection output for reporting layers.
struct SelectionResult {
  IndexVector indices;
  std::string method;
  std::optional<Eigen::VectorXd> scores;
  bool warning = false;
};

}  // namespace itercur
