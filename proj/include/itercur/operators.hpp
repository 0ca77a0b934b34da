#pragma once

#include <concepts>

#include <Eigen/Core>

#include "itercur/matrix.hpp"
#include "itercur/rng.hpp"

namespace itercur {

// Matrix-free contract: forward and adjoint matvec plus dimensions. Matrix
// itself models it; so do the residual operators built by the cur module.
// Apply must be deterministic: same vector in, bitwise-same vector out.
template <typename Op>
concept linear_operator = requires(const Op& op, const Eigen::VectorXd& x) {
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  { op.apply(x) } -> std::convertible_to<Eigen::VectorXd>;
  { op.apply_adjoint(x) } -> std::convertible_to<Eigen::VectorXd>;
};

static_assert(linear_operator<Matrix>);

template <linear_operator Op>
class TransposedOperator {
public:
  explicit TransposedOperator(const Op& op) : op_(&op) {}
  Index rows() const { return op_->cols(); }
  Index cols() const { return op_->rows(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return op_->apply_adjoint(x); }
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& x) const { return op_->apply(x); }

private:
  const Op* op_;
};

// Largest observed adjoint-consistency gap |<Ex,y> - <x,E^T y>| scaled by
// ||x|| ||y|| and a running estimate of ||E||.
template <linear_operator Op>
double adjoint_consistency_gap(const Op& op, std::uint64_t seed = 0, int trials = 8) {
  rng gen = rng::stream(seed, 0xADC0);
  double worst = 0.0;
  double norm_est = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd x = random_unit_vector(op.cols(), gen);
    const Eigen::VectorXd y = random_unit_vector(op.rows(), gen);
    const Eigen::VectorXd ex = op.apply(x);
    const Eigen::VectorXd ety = op.apply_adjoint(y);
    norm_est = std::max({norm_est, ex.norm(), ety.norm()});
    const double gap = std::abs(ex.dot(y) - x.dot(ety));
    worst = std::max(worst, gap);
  }
  return norm_est > 0.0 ? worst / norm_est : worst;
}

}  // namespace itercur
