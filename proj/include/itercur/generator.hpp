#pragma once

#include <cmath>
#include <vector>

#include "itercur/matrix.hpp"
#include "itercur/rng.hpp"

namespace itercur {

namespace detail {

struct SparseVec {
  std::vector<Index> pos;
  std::vector<double> val;
};

inline SparseVec sprand_vector(Index len, double density, rng gen) {
  const auto want = static_cast<Index>(std::llround(density * static_cast<double>(len)));
  const Index count = std::min(len, std::max<Index>(Index{1}, want));
  SparseVec v;
  v.pos = sample_positions(len, count, gen);
  v.val.resize(v.pos.size());
  for (double& x : v.val) x = gen.next_double();
  return v;
}

}  // namespace detail

// Sparse nonnegative test matrix built as a sum of rank-1 terms
//   sum_{j=1}^{terms} c_j x_j y_j^T,  c_j = 2/j for j <= 10, 1/j beyond,
// where x_j, y_j carry uniform(0,1) values on a `density` fraction of
// positions. `terms` defaults to n. Deterministic for a fixed seed.
inline Matrix synth_sparse(Index m, Index n, double density, std::uint64_t seed,
                           Index terms = -1) {
  if (m < 1 || n < 1)
    throw validation_error("synth_sparse: dimensions must be positive");
  if (!(density > 0.0) || density > 1.0)
    throw validation_error("synth_sparse: density must lie in (0,1]");
  if (terms < 0) terms = n;
  if (terms < 1 || terms > n)
    throw validation_error("synth_sparse: terms must lie in [1,n]");

  std::vector<Eigen::Triplet<double>> entries;
  for (Index j = 1; j <= terms; ++j) {
    const double coeff = (j <= 10 ? 2.0 : 1.0) / static_cast<double>(j);
    const auto x = detail::sprand_vector(m, density, rng::stream(seed, 2 * static_cast<std::uint64_t>(j)));
    const auto y = detail::sprand_vector(n, density, rng::stream(seed, 2 * static_cast<std::uint64_t>(j) + 1));
    for (std::size_t a = 0; a < x.pos.size(); ++a)
      for (std::size_t b = 0; b < y.pos.size(); ++b)
        entries.emplace_back(x.pos[a], y.pos[b], coeff * x.val[a] * y.val[b]);
  }
  return Matrix::from_triplets(m, n, entries);
}

}  // namespace itercur
