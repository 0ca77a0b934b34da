#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "itercur/matrix.hpp"
#include "itercur/operators.hpp"
#include "itercur/svd.hpp"

namespace itercur {

// A ~ C M R with C = A(:,p), R = A(s,:) taken verbatim from A and M the
// k x k coupling matrix C^+ A R^+.
struct CurFactorization {
  IndexVector p;      // column indices
  IndexVector s;      // row indices
  Eigen::MatrixXd C;  // m x k
  Eigen::MatrixXd R;  // k x n
  Eigen::MatrixXd M;  // k x k

  Index rank() const { return static_cast<Index>(p.size()); }
};

namespace detail {

// A(:,idx) for anything modeling linear_operator; Matrix uses its fast path.
template <linear_operator Op>
Eigen::MatrixXd operator_columns(const Op& op, const IndexVector& idx) {
  if constexpr (requires { op.select_columns(idx); }) {
    return op.select_columns(idx);
  } else {
    Eigen::MatrixXd c(op.rows(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
      c.col(static_cast<Index>(j)) = op.apply(Eigen::VectorXd::Unit(op.cols(), idx[j]));
    return c;
  }
}

template <linear_operator Op>
Eigen::MatrixXd operator_rows(const Op& op, const IndexVector& idx) {
  if constexpr (requires { op.select_rows(idx); }) {
    return op.select_rows(idx);
  } else {
    Eigen::MatrixXd r(static_cast<Index>(idx.size()), op.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      r.row(static_cast<Index>(i)) =
          op.apply_adjoint(Eigen::VectorXd::Unit(op.rows(), idx[i])).transpose();
    return r;
  }
}

// Q^T A as a dense (q cols) x n block via adjoint matvecs only.
template <linear_operator Op>
Eigen::MatrixXd qt_times_op(const Eigen::MatrixXd& q, const Op& op) {
  Eigen::MatrixXd out(q.cols(), op.cols());
  for (Index i = 0; i < q.cols(); ++i)
    out.row(i) = op.apply_adjoint(q.col(i)).transpose();
  return out;
}

inline Eigen::ColPivHouseholderQR<Eigen::MatrixXd> full_rank_qr(const Eigen::MatrixXd& a,
                                                                const char* which) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols())
    throw numerical_error(std::string("rank-deficient ") + which + ": rank " +
                          std::to_string(qr.rank()) + " < " + std::to_string(a.cols()));
  return qr;
}

inline Eigen::MatrixXd thin_q(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, Index rows,
                              Index cols) {
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

}  // namespace detail

// X = argmin ||C X - A||_F for C = A(:,p), solved through a Householder QR of
// C (never normal equations).
template <linear_operator Op>
Eigen::MatrixXd interpolative_cx(const Op& a, const IndexVector& p) {
  const Eigen::MatrixXd c = detail::operator_columns(a, p);
  const Index k = c.cols();
  auto qr = detail::full_rank_qr(c, "C");
  const Eigen::MatrixXd qta = detail::qt_times_op(detail::thin_q(qr, a.rows(), k), a);
  const Eigen::MatrixXd x0 = qr.matrixR()
                                 .topLeftCorner(k, k)
                                 .template triangularView<Eigen::Upper>()
                                 .solve(qta);
  return qr.colsPermutation() * x0;
}

// M = C^+ A R^+ by two consecutive least-squares solves (QR of C, then QR of
// R^T); mathematically X R^T (R R^T)^{-1} with X = (C^T C)^{-1} C^T A.
template <linear_operator Op>
Eigen::MatrixXd middle_matrix(const Op& a, const IndexVector& p, const IndexVector& s) {
  const Eigen::MatrixXd x = interpolative_cx(a, p);  // k x n
  const Eigen::MatrixXd r = detail::operator_rows(a, s);
  const Index k = r.rows();
  auto qr = detail::full_rank_qr(r.transpose(), "R");
  const Eigen::MatrixXd xq = x * detail::thin_q(qr, a.cols(), k);  // k x k
  const Eigen::MatrixXd m0 = qr.matrixR()
                                 .topLeftCorner(k, k)
                                 .template triangularView<Eigen::Upper>()
                                 .transpose()
                                 .solve<Eigen::OnTheRight>(xq);
  return m0 * qr.colsPermutation().transpose();
}

// Assembles and validates a factorization from index sets: C and R must have
// full rank k (rank-revealing QR at 1e-10), p and s must be distinct and in
// range, and |p| == |s|.
inline CurFactorization make_cur(const Matrix& a, IndexVector p, IndexVector s) {
  if (p.size() != s.size() || p.empty())
    throw validation_error("make_cur: need equally many (and at least one) rows and columns");
  validate_index_vector(p, a.cols(), "make_cur p");
  validate_index_vector(s, a.rows(), "make_cur s");
  CurFactorization f;
  f.p = std::move(p);
  f.s = std::move(s);
  f.C = a.select_columns(f.p);
  f.R = a.select_rows(f.s);
  detail::full_rank_qr(f.C, "C");
  detail::full_rank_qr(f.R.transpose(), "R");
  f.M = middle_matrix(a, f.p, f.s);
  return f;
}

inline Matrix residual_cx(const Matrix& a, const IndexVector& p,
                          std::size_t element_cap = 50'000'000) {
  if (static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(a.cols()) > element_cap)
    throw validation_error("residual_cx: explicit residual exceeds the dense element cap");
  const Eigen::MatrixXd c = a.select_columns(p);
  Eigen::MatrixXd e = a.to_dense();
  e.noalias() -= c * interpolative_cx(a, p);
  return Matrix::dense(std::move(e));
}

inline Matrix residual_cur(const Matrix& a, const IndexVector& p, const IndexVector& s,
                           std::size_t element_cap = 50'000'000) {
  if (static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(a.cols()) > element_cap)
    throw validation_error("residual_cur: explicit residual exceeds the dense element cap");
  const Eigen::MatrixXd c = a.select_columns(p);
  const Eigen::MatrixXd r = a.select_rows(s);
  const Eigen::MatrixXd m = middle_matrix(a, p, s);
  Eigen::MatrixXd e = a.to_dense();
  e.noalias() -= c * (m * r);
  return Matrix::dense(std::move(e));
}

// E = (I - QQ^T) A without forming E: forward projects after A, adjoint
// projects before A^T. Holds a reference to A; A must outlive the operator.
class ProjectedResidualOperator {
public:
  ProjectedResidualOperator(const Matrix& a, Eigen::MatrixXd q) : a_(&a), q_(std::move(q)) {
    if (q_.size() > 0 && q_.rows() != a.rows())
      throw validation_error("residual_operator: Q row count must match A");
  }

  Index rows() const { return a_->rows(); }
  Index cols() const { return a_->cols(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = a_->apply(x);
    if (q_.cols() > 0) y.noalias() -= q_ * (q_.transpose() * y);
    return y;
  }

  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const {
    if (q_.cols() == 0) return a_->apply_adjoint(y);
    Eigen::VectorXd w = y;
    w.noalias() -= q_ * (q_.transpose() * y);
    return a_->apply_adjoint(w);
  }

private:
  const Matrix* a_;
  Eigen::MatrixXd q_;
};

inline ProjectedResidualOperator residual_operator(const Matrix& a, Eigen::MatrixXd q) {
  if (q.cols() > 0) {
    const Eigen::MatrixXd gram = q.transpose() * q;
    const double off =
        (gram - Eigen::MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
    if (off > 1e-10)
      throw validation_error("residual_operator: Q is not orthonormal (deviation " +
                             std::to_string(off) + ")");
  }
  return ProjectedResidualOperator(a, std::move(q));
}

// E = A - C M R without forming E. Holds a reference to A.
class CurResidualOperator {
public:
  CurResidualOperator(const Matrix& a, Eigen::MatrixXd c, Eigen::MatrixXd m, Eigen::MatrixXd r)
      : a_(&a), c_(std::move(c)), m_(std::move(m)), r_(std::move(r)) {
    if (c_.rows() != a.rows() || r_.cols() != a.cols() || c_.cols() != m_.rows() ||
        m_.cols() != r_.rows())
      throw validation_error("CurResidualOperator: inconsistent block dimensions");
  }

  Index rows() const { return a_->rows(); }
  Index cols() const { return a_->cols(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = a_->apply(x);
    y.noalias() -= c_ * (m_ * (r_ * x));
    return y;
  }

  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const {
    Eigen::VectorXd w = a_->apply_adjoint(y);
    w.noalias() -= r_.transpose() * (m_.transpose() * (c_.transpose() * y));
    return w;
  }

private:
  const Matrix* a_;
  Eigen::MatrixXd c_, m_, r_;
};

// Growing QR factorization Q T = C of the selected columns. Gram-Schmidt with
// one reorthogonalization pass per appended column; aggregated cost O(mk^2).
class IncrementalQR {
public:
  explicit IncrementalQR(Index rows, Index capacity = 16)
      : q_(rows, std::max<Index>(capacity, 1)), t_(Eigen::MatrixXd::Zero(q_.cols(), q_.cols())) {}

  Index rows() const { return q_.rows(); }
  Index cols() const { return cols_; }
  auto q() const { return q_.leftCols(cols_); }
  auto t() const { return t_.topLeftCorner(cols_, cols_); }

  void append(const Eigen::Ref<const Eigen::MatrixXd>& new_cols) {
    if (new_cols.rows() != q_.rows())
      throw validation_error("IncrementalQR: column length mismatch");
    for (Index j = 0; j < new_cols.cols(); ++j) append_one(new_cols.col(j));
  }

private:
  void append_one(const Eigen::VectorXd& col) {
    if (cols_ == q_.cols()) grow();
    const double nrm0 = col.norm();
    Eigen::VectorXd w = col;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cols_);
    if (cols_ > 0) {
      const auto qb = q_.leftCols(cols_);
      h = qb.transpose() * w;
      w.noalias() -= qb * h;
      const Eigen::VectorXd h2 = qb.transpose() * w;
      w.noalias() -= qb * h2;
      h += h2;
    }
    const double nrm = w.norm();
    if (nrm < 1e-12 * nrm0 || nrm == 0.0)
      throw numerical_error("IncrementalQR: new column lies in the span of Q; C would lose rank");
    t_.col(cols_).head(cols_) = h;
    t_(cols_, cols_) = nrm;
    q_.col(cols_) = w / nrm;
    ++cols_;
  }

  void grow() {
    const Index cap = 2 * q_.cols();
    q_.conservativeResize(Eigen::NoChange, cap);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(cap, cap);
    t.topLeftCorner(cols_, cols_) = t_.topLeftCorner(cols_, cols_);
    t_ = std::move(t);
  }

  Eigen::MatrixXd q_;
  Eigen::MatrixXd t_;
  Index cols_ = 0;
};

enum class ErrorMode { dense, operator_mode, auto_mode };

struct SpectralError {
  double absolute = 0.0;
  double relative = 0.0;
  bool converged = true;
};

// ||A||_2: dense SVD when the matrix fits the cap, Lanczos on the operator
// otherwise.
inline double spectral_norm(const Matrix& a, std::size_t element_cap = 50'000'000) {
  const std::size_t elems =
      static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(a.cols());
  if (std::min(a.rows(), a.cols()) < 2 || elems <= element_cap)
    return dense_svd(a, SIZE_MAX).values[0];
  SvdConfig cfg;
  cfg.k = 1;
  cfg.tol_rel = 1e-8;
  return svds(a, cfg).values[0];
}

// Relative/absolute spectral error ||A - CMR|| (/ ||A||). Dense mode takes
// the largest singular value of the explicit difference; operator mode runs
// the Lanczos engine on the difference operator to relative tolerance 1e-6.
inline SpectralError spectral_error(const Matrix& a, const CurFactorization& f,
                                    ErrorMode mode = ErrorMode::auto_mode,
                                    std::optional<double> a_norm = std::nullopt,
                                    std::size_t element_cap = 50'000'000) {
  const std::size_t elems =
      static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(a.cols());
  if (mode == ErrorMode::auto_mode)
    mode = elems <= element_cap ? ErrorMode::dense : ErrorMode::operator_mode;
  if (std::min(a.rows(), a.cols()) < 2) mode = ErrorMode::dense;

  SpectralError out;
  const double norm_a = a_norm ? *a_norm : spectral_norm(a, element_cap);
  if (mode == ErrorMode::dense) {
    if (elems > element_cap)
      throw validation_error("spectral_error: dense mode exceeds the element cap");
    Eigen::MatrixXd e = a.to_dense();
    e.noalias() -= f.C * (f.M * f.R);
    out.absolute = e.norm() == 0.0 ? 0.0 : dense_svd(e, SIZE_MAX).values[0];
  } else {
    const CurResidualOperator op(a, f.C, f.M, f.R);
    SvdConfig cfg;
    cfg.k = 1;
    cfg.tol_rel = 1e-6;
    cfg.max_restarts = 450;  // ~5000 inner iterations at the default dimension
    const SvdResult r = svds(op, cfg);
    out.absolute = r.values[0];
    out.converged = r.all_converged();
  }
  out.relative = norm_a > 0.0 ? out.absolute / norm_a : 0.0;
  return out;
}

// ||A - CMR||_F via trace identities, never forming the m x n difference:
// ||A||_F^2 - 2 tr(A^T C M R) + tr(R^T M^T C^T C M R).
inline double frobenius_error(const Matrix& a, const CurFactorization& f,
                              bool relative = false) {
  const Index k = f.rank();
  Eigen::MatrixXd at_c(a.cols(), k);
  for (Index j = 0; j < k; ++j) at_c.col(j) = a.apply_adjoint(f.C.col(j));
  const double cross = at_c.cwiseProduct(f.R.transpose() * f.M.transpose()).sum();
  const Eigen::MatrixXd s = f.M.transpose() * (f.C.transpose() * f.C) * f.M;
  const double cmr_sq = f.R.cwiseProduct(s * f.R).sum();
  const double a_sq = a.frobenius_norm() * a.frobenius_norm();
  const double err = std::sqrt(std::max(0.0, a_sq - 2.0 * cross + cmr_sq));
  if (!relative) return err;
  return a_sq > 0.0 ? err / std::sqrt(a_sq) : 0.0;
}

// Error-bound diagnostics: eta_p = ||(V^T P)^{-1}||, eta_s = ||(S^T U)^{-1}||
// from the leading k singular vectors of A, the resulting bound
// (eta_s + eta_p) sigma_{k+1}, the achieved spectral error, and both
// sqrt(nk/3) 2^k / sqrt(mk/3) 2^k universal caps.
struct CurDiagnostics {
  double eta_p = 0.0;
  double eta_s = 0.0;
  double sigma_kplus1 = 0.0;
  double bound = 0.0;
  double achieved = 0.0;
  double cap_nk = 0.0;
  double cap_mk = 0.0;
};

inline CurDiagnostics theorem_bound(const Matrix& a, const CurFactorization& f,
                                    std::size_t element_cap = 50'000'000) {
  const Index k = f.rank();
  const SvdResult svd = dense_svd(a, element_cap);
  if (svd.values.size() < k)
    throw validation_error("theorem_bound: factorization rank exceeds min(m,n)");

  Eigen::MatrixXd vtp(k, k), stu(k, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < k; ++i) {
      vtp(i, j) = svd.v(f.p[static_cast<std::size_t>(j)], i);
      stu(i, j) = svd.u(f.s[static_cast<std::size_t>(j)], i);
    }
  const auto smallest_sv = [](const Eigen::MatrixXd& b) {
    Eigen::JacobiSVD<Eigen::MatrixXd> s(b);
    return s.singularValues()[b.cols() - 1];
  };
  const double sp = smallest_sv(vtp);
  const double su = smallest_sv(stu);
  if (sp == 0.0) throw numerical_error("theorem_bound: V^T P is singular (premise violated)");
  if (su == 0.0) throw numerical_error("theorem_bound: S^T U is singular (premise violated)");

  CurDiagnostics d;
  d.eta_p = 1.0 / sp;
  d.eta_s = 1.0 / su;
  d.sigma_kplus1 = svd.values.size() > k ? svd.values[k] : 0.0;
  d.bound = (d.eta_s + d.eta_p) * d.sigma_kplus1;
  d.achieved = spectral_error(a, f, ErrorMode::dense, std::nullopt, element_cap).absolute;
  const double two_k = std::ldexp(1.0, static_cast<int>(std::min<Index>(k, 1023)));
  d.cap_nk = std::sqrt(static_cast<double>(a.cols()) * k / 3.0) * two_k;
  d.cap_mk = std::sqrt(static_cast<double>(a.rows()) * k / 3.0) * two_k;
  return d;
}

}  // namespace itercur
