#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <itercur/rng.hpp>
#include <itercur/select.hpp>

using namespace itercur;

namespace {

Eigen::MatrixXd seeded(Index m, Index n, std::uint64_t seed) {
  rng gen = rng::stream(seed, 0x5E1);
  return random_matrix(m, n, gen);
}

Eigen::MatrixXd orthonormal_columns(Index m, Index k, std::uint64_t seed) {
  const Eigen::MatrixXd a = seeded(m, k, seed);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
}

// Step-by-step DEIM oracle in the explicit oblique-projector form
//   r_j = u_j - U_{j-1} (S^T U_{j-1})^{-1} S^T u_j
// on the ORIGINAL columns, with the same smallest-index tie rule. Returns the
// indices and the per-step residual vectors.
std::pair<IndexVector, std::vector<Eigen::VectorXd>> deim_projector_oracle(
    const Eigen::MatrixXd& u) {
  IndexVector s;
  std::vector<Eigen::VectorXd> residuals;
  for (Index j = 0; j < u.cols(); ++j) {
    Eigen::VectorXd r = u.col(j);
    if (j > 0) {
      Eigen::MatrixXd stu(j, j);
      Eigen::VectorXd stuj(j);
      for (Index i = 0; i < j; ++i) {
        for (Index l = 0; l < j; ++l) stu(i, l) = u(s[static_cast<std::size_t>(i)], l);
        stuj[i] = u(s[static_cast<std::size_t>(i)], j);
      }
      r -= u.leftCols(j) * stu.partialPivLu().solve(stuj);
    }
    residuals.push_back(r);
    s.push_back(argmax_abs(r));
  }
  return {s, residuals};
}

// Pivot sequence of a classical column-pivoted QR (greedy residual column
// norms, projection updates), the reference for qdeim.
IndexVector pivoted_qr_oracle(Eigen::MatrixXd a, Index count) {
  IndexVector pivots;
  std::vector<bool> used(static_cast<std::size_t>(a.cols()), false);
  for (Index step = 0; step < count; ++step) {
    Index best = -1;
    double best_norm = -1.0;
    for (Index j = 0; j < a.cols(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double nrm = a.col(j).squaredNorm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = j;
      }
    }
    pivots.push_back(best);
    used[static_cast<std::size_t>(best)] = true;
    const Eigen::VectorXd q = a.col(best) / a.col(best).norm();
    for (Index j = 0; j < a.cols(); ++j)
      if (!used[static_cast<std::size_t>(j)]) a.col(j) -= q * q.dot(a.col(j));
  }
  return pivots;
}

double abs_det_rows(const Eigen::MatrixXd& u, const IndexVector& s) {
  Eigen::MatrixXd sub(static_cast<Index>(s.size()), u.cols());
  for (std::size_t i = 0; i < s.size(); ++i) sub.row(static_cast<Index>(i)) = u.row(s[i]);
  return std::abs(sub.determinant());
}

}  // namespace

TEST_CASE("deim trivial cases") {
  Eigen::MatrixXd single(4, 1);
  single << 0, 0, 1, 0;
  CHECK(deim(single) == IndexVector{2});

  const Eigen::MatrixXd eye2 = Eigen::MatrixXd::Identity(4, 4).leftCols(2);
  CHECK(deim(eye2) == IndexVector{0, 1});
}

TEST_CASE("deim matches the explicit oblique-projector oracle") {
  const Eigen::MatrixXd u = orthonormal_columns(8, 3, 42);
  const auto [expect, residuals] = deim_projector_oracle(u);
  CHECK(deim(u) == expect);

  SECTION("deflated residual vanishes at previously selected indices") {
    const double scale = u.cwiseAbs().maxCoeff();
    for (std::size_t j = 1; j < residuals.size(); ++j)
      for (std::size_t i = 0; i < j; ++i)
        CHECK(std::abs(residuals[j][expect[i]]) <= 1e-10 * scale);
  }
}

TEST_CASE("deim oracle agreement on larger random blocks") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd u = orthonormal_columns(30, 6, 100 + seed);
    CHECK(deim(u) == deim_projector_oracle(u).first);
  }
}

TEST_CASE("deim produces distinct indices and nonsingular U(s,:)") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Eigen::MatrixXd u = orthonormal_columns(25, 5, 200 + seed);
    const IndexVector s = deim(u);
    validate_index_vector(s, 25, "deim output");
    CHECK(abs_det_rows(u, s) > 0.0);
  }
}

TEST_CASE("deim masked rows are never selected") {
  const Eigen::MatrixXd u = orthonormal_columns(12, 3, 77);
  const IndexVector mask{0, 5, 7};
  const IndexVector s = deim(u, mask);
  for (Index i : s)
    for (Index m : mask) CHECK(i != m);
}

TEST_CASE("deim singular interpolation system names the step") {
  // masking row 4 makes columns 0 and 1 proportional, so the selected rows
  // {1, 0} give a singular 2x2 system at step 3
  Eigen::MatrixXd u(5, 3);
  u.col(0) << 0.2, 1.0, 0.0, 0.0, 7.0;
  u.col(1) << 0.4, 2.0, 0.0, 0.0, -3.0;
  u.col(2) << 0.0, 0.0, 1.0, 0.5, 2.0;
  const IndexVector mask{4};
  try {
    deim(u, mask);
    FAIL("expected deim_singular_error");
  } catch (const deim_singular_error& e) {
    CHECK(e.step() == 3);
  }

  int fallbacks = 0;
  const IndexVector s = deim_with_fallback(u, mask, fallbacks);
  CHECK(fallbacks == 1);
  validate_index_vector(s, 5, "fallback output");
  CHECK(s == IndexVector{1, 0, 2});  // fallback takes the raw argmax off the mask
}

TEST_CASE("deim input validation") {
  CHECK_THROWS_AS(deim(Eigen::MatrixXd::Zero(2, 3)), validation_error);
}

TEST_CASE("qdeim trivial and k=1 agreement") {
  const Eigen::MatrixXd eye2 = Eigen::MatrixXd::Identity(3, 3).leftCols(2);
  const IndexVector s = qdeim(eye2);
  CHECK((s == IndexVector{0, 1} || s == IndexVector{1, 0}));

  Eigen::MatrixXd one(5, 1);
  one << 0.1, -2.0, 0.4, 1.9, 0.0;
  CHECK(qdeim(one) == deim(one));
}

TEST_CASE("qdeim matches the pivoted-QR oracle") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Eigen::MatrixXd u = orthonormal_columns(10, 4, 300 + seed);
    CHECK(qdeim(u) == pivoted_qr_oracle(u.transpose(), 4));
  }
}

TEST_CASE("qdeim yields nonsingular row blocks") {
  const Eigen::MatrixXd u = orthonormal_columns(18, 5, 71);
  CHECK(abs_det_rows(u, qdeim(u)) > 0.0);
}

TEST_CASE("maxvol identity start is already dominant") {
  const Eigen::MatrixXd u = Eigen::MatrixXd::Identity(6, 3);
  const MaxvolResult r = maxvol(u, IndexVector{0, 1, 2});
  CHECK(r.indices == IndexVector{0, 1, 2});
  CHECK_FALSE(r.warning);
}

TEST_CASE("maxvol k=1 picks the max magnitude entry") {
  Eigen::MatrixXd u(3, 1);
  u << 1, -3, 2;
  CHECK(maxvol(u).indices == IndexVector{1});
}

TEST_CASE("maxvol dominates the deim start and the exhaustive oracle") {
  const Eigen::MatrixXd u = orthonormal_columns(6, 2, 88);
  const IndexVector start = deim(u);
  const MaxvolResult r = maxvol(u, start);
  CHECK(abs_det_rows(u, r.indices) >= abs_det_rows(u, start) - 1e-14);

  // exhaustive 6-choose-2: no pair beats the returned one by more than swap_tol^2
  double best = 0.0;
  for (Index i = 0; i < 6; ++i)
    for (Index j = i + 1; j < 6; ++j) best = std::max(best, abs_det_rows(u, {i, j}));
  CHECK(abs_det_rows(u, r.indices) >= best / (1.01 * 1.01));
}

TEST_CASE("maxvol sweep budget produces a warning") {
  const Eigen::MatrixXd u = orthonormal_columns(40, 4, 99);
  const MaxvolResult r = maxvol(u, deim(u), 1.0, 0);
  CHECK(r.warning);
}

TEST_CASE("leverage scores") {
  SECTION("identity columns spread mass 1/k") {
    const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(6, 3);
    const SamplingDistribution d = leverage_scores(v);
    d.validate();
    for (Index j = 0; j < 3; ++j) CHECK(d.pr[j] == Catch::Approx(1.0 / 3));
    for (Index j = 3; j < 6; ++j) CHECK(d.pr[j] == 0.0);
  }
  SECTION("k=1 squares the entries") {
    Eigen::MatrixXd v(2, 1);
    v << 0.6, 0.8;
    const SamplingDistribution d = leverage_scores(v);
    CHECK(d.pr[0] == Catch::Approx(0.36));
    CHECK(d.pr[1] == Catch::Approx(0.64));
  }
  SECTION("non-orthonormal input rejected") {
    Eigen::MatrixXd v(3, 1);
    v << 1.0, 1.0, 0.0;
    CHECK_THROWS_AS(leverage_scores(v), validation_error);
  }
  SECTION("distribution sums to one on random orthonormal input") {
    const SamplingDistribution d = leverage_scores(orthonormal_columns(40, 7, 111));
    CHECK(std::abs(d.pr.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("sample_distribution") {
  SECTION("point mass") {
    SamplingDistribution d;
    d.pr = Eigen::VectorXd::Zero(5);
    d.pr[3] = 1.0;
    CHECK(sample_distribution(d, 1, 9) == IndexVector{3});
  }
  SECTION("exhaustion returns all support") {
    SamplingDistribution d;
    d.pr = Eigen::VectorXd::Constant(4, 0.25);
    IndexVector s = sample_distribution(d, 4, 13);
    std::sort(s.begin(), s.end());
    CHECK(s == IndexVector{0, 1, 2, 3});
  }
  SECTION("deterministic for a fixed seed") {
    SamplingDistribution d;
    d.pr = Eigen::VectorXd::Constant(10, 0.1);
    CHECK(sample_distribution(d, 3, 21) == sample_distribution(d, 3, 21));
  }
  SECTION("insufficient support") {
    SamplingDistribution d;
    d.pr = Eigen::VectorXd::Zero(4);
    d.pr[0] = 1.0;
    CHECK_THROWS_AS(sample_distribution(d, 2, 1), validation_error);
  }
}

TEST_CASE("volume sampling degenerate and exact-capture cases") {
  SECTION("single nonzero column is taken with probability 1") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 3);
    a.col(1) << 1, 2, 0, -1;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      CHECK(volume_sampling(Matrix::dense(a), 1, 1, 1, seed).indices == IndexVector{1});
  }
  SECTION("exact rank-c capture stops the loop early") {
    rng gen = rng::stream(5, 0x9);
    const Eigen::MatrixXd b = random_matrix(10, 2, gen);
    const Eigen::MatrixXd c = random_matrix(2, 6, gen);
    const Matrix a = Matrix::dense(b * c);  // rank 2
    const VolumeSamplingResult r = volume_sampling(a, 6, 3, 2, 3);
    CHECK(r.indices.size() <= 4);
    CHECK(r.warning);
    CHECK(r.rounds <= 2);
  }
  SECTION("deterministic per seed, distinct indices") {
    const Matrix a = Matrix::dense(seeded(12, 9, 17));
    const VolumeSamplingResult r1 = volume_sampling(a, 6, 3, 2, 7);
    const VolumeSamplingResult r2 = volume_sampling(a, 6, 3, 2, 7);
    CHECK(r1.indices == r2.indices);
    validate_index_vector(r1.indices, 9, "volume output");
  }
  SECTION("parameter validation") {
    const Matrix a = Matrix::dense(seeded(5, 5, 1));
    CHECK_THROWS_AS(volume_sampling(a, 4, 3, 2, 0), validation_error);
  }
}

TEST_CASE("k=1 agreement across deim, qdeim, maxvol") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Eigen::MatrixXd u = seeded(15, 1, 400 + seed);
    const IndexVector d = deim(u);
    CHECK(qdeim(u) == d);
    CHECK(maxvol(u).indices == d);
  }
}
