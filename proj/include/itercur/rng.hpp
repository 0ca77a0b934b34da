#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace itercur {

// Counter-mode SplitMix64. Draw i of stream `seed` is
//   mix64(seed + (i+1) * 0x9E3779B97F4A7C15)
// with the finalizer of Steele et al. Output is a pure function of
// (seed, counter), so sequences are identical on every platform; sub-streams
// are derived by hashing a tag into the seed.
class rng {
public:
  explicit rng(std::uint64_t seed = 0) : seed_(seed), counter_(0) {}

  std::uint64_t next_u64() { return mix64(seed_ + (++counter_) * kGamma); }

  // Uniform on [0,1): top 53 bits scaled by 2^-53.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [-1,1).
  double next_symmetric() { return 2.0 * next_double() - 1.0; }

  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // Independent stream for (seed, tag), e.g. per generated vector.
  static rng stream(std::uint64_t seed, std::uint64_t tag) {
    return rng(mix64(seed ^ mix64(tag + kGamma)));
  }

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  std::uint64_t seed_;
  std::uint64_t counter_;
};

inline Eigen::VectorXd random_unit_vector(Eigen::Index n, rng& gen) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = gen.next_symmetric();
  const double nrm = v.norm();
  if (nrm == 0.0) {
    v.setZero();
    v[0] = 1.0;
    return v;
  }
  return v / nrm;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index m, Eigen::Index n, rng& gen) {
  Eigen::MatrixXd a(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = gen.next_symmetric();
  return a;
}

// count distinct indices from [0, n) via partial Fisher-Yates, ascending order.
inline std::vector<Eigen::Index> sample_positions(Eigen::Index n, Eigen::Index count, rng& gen) {
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Eigen::Index>(gen.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  std::vector<Eigen::Index> out(pool.begin(), pool.begin() + count);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace itercur
