#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "itercur/errors.hpp"

namespace itercur {

using Index = Eigen::Index;

// Ordered, duplicate-free 0-based indices (column set p / row set s).
using IndexVector = std::vector<Index>;

using SparseCsr = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseCsc = Eigen::SparseMatrix<double, Eigen::ColMajor>;

inline void validate_index_vector(const IndexVector& idx, Index bound, const char* what) {
  std::vector<char> seen(static_cast<std::size_t>(bound), 0);
  for (Index i : idx) {
    if (i < 0 || i >= bound)
      throw validation_error(std::string(what) + ": index " + std::to_string(i) +
                             " out of range [0," + std::to_string(bound) + ")");
    if (seen[static_cast<std::size_t>(i)])
      throw validation_error(std::string(what) + ": duplicate index " + std::to_string(i));
    seen[static_cast<std::size_t>(i)] = 1;
  }
}

// Immutable m-by-n matrix, dense (column-major) or CSR. Sparse matrices keep
// a CSC twin so both A*x and A^T*y stream through contiguous storage.
// Construction validates shape; all accessors are const and safe to share
// across threads.
class Matrix {
public:
  static Matrix dense(Eigen::MatrixXd a) {
    check_shape(a.rows(), a.cols());
    return Matrix(std::move(a));
  }

  static Matrix sparse(SparseCsr a) {
    check_shape(a.rows(), a.cols());
    a.makeCompressed();
    return Matrix(std::move(a));
  }

  static Matrix from_triplets(Index rows, Index cols,
                              const std::vector<Eigen::Triplet<double>>& entries) {
    check_shape(rows, cols);
    SparseCsr a(rows, cols);
    a.setFromTriplets(entries.begin(), entries.end());
    return sparse(std::move(a));
  }

  Index rows() const { return is_sparse() ? csr_.rows() : dense_.rows(); }
  Index cols() const { return is_sparse() ? csr_.cols() : dense_.cols(); }
  bool is_sparse() const { return sparse_; }
  Index nonzeros() const { return is_sparse() ? csr_.nonZeros() : rows() * cols(); }

  const Eigen::MatrixXd& dense_data() const {
    if (is_sparse()) throw validation_error("Matrix: dense_data() on sparse matrix");
    return dense_;
  }
  const SparseCsr& csr() const {
    if (!is_sparse()) throw validation_error("Matrix: csr() on dense matrix");
    return csr_;
  }

  Eigen::MatrixXd to_dense() const { return is_sparse() ? Eigen::MatrixXd(csr_) : dense_; }

  double frobenius_norm() const { return is_sparse() ? csr_.norm() : dense_.norm(); }

  // y = A x
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    if (x.size() != cols())
      throw validation_error("matvec: x has length " + std::to_string(x.size()) + ", expected " +
                             std::to_string(cols()));
    return is_sparse() ? Eigen::VectorXd(csr_ * x) : Eigen::VectorXd(dense_ * x);
  }

  // y = A^T x
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& x) const {
    if (x.size() != rows())
      throw validation_error("matvec: x has length " + std::to_string(x.size()) + ", expected " +
                             std::to_string(rows()));
    return is_sparse() ? Eigen::VectorXd(csc_.transpose() * x)
                       : Eigen::VectorXd(dense_.transpose() * x);
  }

  Matrix transposed() const {
    if (is_sparse()) return Matrix(SparseCsr(csr_.transpose()));
    return Matrix(Eigen::MatrixXd(dense_.transpose()));
  }

  // A(:,p) as a dense m-by-|p| block (pure selection).
  Eigen::MatrixXd select_columns(const IndexVector& p) const {
    validate_index_vector(p, cols(), "select_columns");
    Eigen::MatrixXd c(rows(), static_cast<Index>(p.size()));
    if (is_sparse()) {
      c.setZero();
      for (std::size_t j = 0; j < p.size(); ++j)
        for (SparseCsc::InnerIterator it(csc_, p[j]); it; ++it)
          c(it.row(), static_cast<Index>(j)) = it.value();
    } else {
      for (std::size_t j = 0; j < p.size(); ++j) c.col(static_cast<Index>(j)) = dense_.col(p[j]);
    }
    return c;
  }

  // A(s,:) as a dense |s|-by-n block.
  Eigen::MatrixXd select_rows(const IndexVector& s) const {
    validate_index_vector(s, rows(), "select_rows");
    Eigen::MatrixXd r(static_cast<Index>(s.size()), cols());
    if (is_sparse()) {
      r.setZero();
      for (std::size_t i = 0; i < s.size(); ++i)
        for (SparseCsr::InnerIterator it(csr_, s[i]); it; ++it)
          r(static_cast<Index>(i), it.col()) = it.value();
    } else {
      for (std::size_t i = 0; i < s.size(); ++i) r.row(static_cast<Index>(i)) = dense_.row(s[i]);
    }
    return r;
  }

  Eigen::VectorXd column_squared_norms() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(cols());
    if (is_sparse()) {
      for (Index j = 0; j < cols(); ++j)
        for (SparseCsc::InnerIterator it(csc_, j); it; ++it) out[j] += it.value() * it.value();
    } else {
      out = dense_.colwise().squaredNorm();
    }
    return out;
  }

  Eigen::VectorXd row_norms() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(rows());
    if (is_sparse()) {
      for (Index i = 0; i < rows(); ++i)
        for (SparseCsr::InnerIterator it(csr_, i); it; ++it) out[i] += it.value() * it.value();
      out = out.cwiseSqrt();
    } else {
      out = dense_.rowwise().norm();
    }
    return out;
  }

private:
  explicit Matrix(Eigen::MatrixXd a) : sparse_(false), dense_(std::move(a)) {}
  explicit Matrix(SparseCsr a) : sparse_(true), csr_(std::move(a)), csc_(csr_) {
    csc_.makeCompressed();
  }

  static void check_shape(Index rows, Index cols) {
    if (rows < 1 || cols < 1)
      throw validation_error("Matrix: dimensions must be at least 1x1, got " +
                             std::to_string(rows) + "x" + std::to_string(cols));
  }

  bool sparse_;
  Eigen::MatrixXd dense_;
  SparseCsr csr_;
  SparseCsc csc_;
};

inline Eigen::VectorXd matvec(const Matrix& a, const Eigen::VectorXd& x, bool transpose = false) {
  return transpose ? a.apply_adjoint(x) : a.apply(x);
}

// Index of the largest-magnitude entry; ties go to the smallest index.
inline Index argmax_abs(const Eigen::VectorXd& v) {
  Index best = 0;
  double best_val = std::abs(v[0]);
  for (Index i = 1; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best_val) {
      best_val = a;
      best = i;
    }
  }
  return best;
}

// Scale every nonzero row to unit 2-norm; zero rows are kept unchanged and
// the sparsity pattern is preserved.
inline Matrix normalize_rows(const Matrix& a) {
  const Eigen::VectorXd norms = a.row_norms();
  if (a.is_sparse()) {
    SparseCsr out = a.csr();
    for (Index i = 0; i < out.rows(); ++i) {
      if (norms[i] == 0.0) continue;
      for (SparseCsr::InnerIterator it(out, i); it; ++it) it.valueRef() /= norms[i];
    }
    return Matrix::sparse(std::move(out));
  }
  Eigen::MatrixXd out = a.dense_data();
  for (Index i = 0; i < out.rows(); ++i)
    if (norms[i] != 0.0) out.row(i) /= norms[i];
  return Matrix::dense(std::move(out));
}

}  // namespace itercur
