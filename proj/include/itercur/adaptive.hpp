#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "itercur/cur.hpp"
#include "itercur/select.hpp"
#include "itercur/svd.hpp"

namespace itercur {

enum class Strategy { fixed, decay };
enum class ResidualKind { one_sided, two_sided };
enum class Backend { dense, krylov, auto_select };
enum class Selector { deim, leverage };

struct AdaptiveConfig {
  Index k = 1;
  Strategy strategy = Strategy::decay;
  Index cols_per_round = 0;  // c (fixed strategy); the last round takes k mod c when c does not divide k
  double delta = 0.8;        // decay threshold; 0 is the degenerate one-round value
  Index limit = 0;           // decay cap l; 0 selects ceil(k/10)
  ResidualKind residual = ResidualKind::one_sided;
  Backend backend = Backend::auto_select;
  Selector selector = Selector::deim;
  bool strict_decay = false;      // sigma_i > delta*sigma_1 instead of >=
  bool wedin_early_stop = false;  // honored only when delta == 1
  std::uint64_t seed = 0;
  std::size_t dense_cap = 50'000'000;
  int svd_max_restarts = 300;
  double svd_tol_rel = 1e-8;

  static AdaptiveConfig fixed_rounds(Index k, Index rounds) {
    AdaptiveConfig cfg;
    cfg.k = k;
    cfg.strategy = Strategy::fixed;
    cfg.cols_per_round = std::max<Index>(1, (k + rounds - 1) / rounds);
    return cfg;
  }
};

struct RoundTrace {
  int round = 0;
  IndexVector p_round;
  IndexVector s_round;  // two-sided only
  Index count = 0;
  double sigma1 = 0.0;  // leading singular value of the round's residual
  Index b = 0;          // decay count before the l cap (decay strategy)
  long matvecs = 0;
  int svd_restarts = 0;
  int deim_fallbacks = 0;
  bool wedin_fired = false;
  double residual_fro = std::numeric_limits<double>::quiet_NaN();  // after the round's update
};

struct AdaptiveResult {
  CurFactorization fact;
  std::vector<RoundTrace> col_traces;
  std::vector<RoundTrace> row_traces;  // empty for two-sided runs
  long total_matvecs = 0;
  int deim_fallbacks = 0;
  bool early_stop = false;  // residual hit sigma1(A) * 1e-10 before k indices
};

namespace detail {

struct RoundSvd {
  Eigen::VectorXd sigma;
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  long matvecs = 0;
  int restarts = 0;
  bool wedin_fired = false;
};

// Per-round count: fixed schedule takes min(c, remaining); the decay schedule
// counts converged values >= delta*sigma1 among the first `remaining`, capped
// by l (b = 0 under strict mode forces one index so the loop progresses).
inline std::pair<Index, Index> decay_count(const Eigen::VectorXd& sigma, Index remaining,
                                           double delta, Index limit, bool strict) {
  Index b = 0;
  const Index scan = std::min<Index>(remaining, sigma.size());
  for (Index i = 0; i < scan; ++i) {
    const bool pass = strict ? sigma[i] > delta * sigma[0] : sigma[i] >= delta * sigma[0];
    if (!pass) break;
    b = i + 1;
  }
  Index c = std::min(b, limit);
  if (c < 1) c = 1;
  return {b, c};
}

inline SvdConfig round_svd_config(const AdaptiveConfig& cfg, Index want, Index remaining,
                                  std::uint64_t tag) {
  SvdConfig sc;
  sc.k = static_cast<int>(want);
  sc.tol_rel = cfg.svd_tol_rel;
  sc.max_restarts = cfg.svd_max_restarts;
  sc.seed = rng::mix64(cfg.seed ^ tag);
  if (cfg.strategy == Strategy::decay) {
    sc.k = static_cast<int>(remaining);
    sc.delta = cfg.delta;
    sc.limit = std::min(cfg.limit, remaining);
    sc.strict_decay = cfg.strict_decay;
    sc.wedin_early_stop = cfg.wedin_early_stop && cfg.delta == 1.0;
  }
  return sc;
}

// svds with one retry at doubled max dimension, then abort.
template <linear_operator Op>
SvdResult round_svds(const Op& op, SvdConfig sc, int round) {
  SvdResult r = svds(op, sc);
  if (r.all_converged() || r.wedin_fired) return r;
  const Index min_mn = std::min(op.rows(), op.cols());
  sc.max_dim = static_cast<int>(
      std::min<Index>(min_mn, 2 * (sc.max_dim > 0 ? sc.max_dim : 2 * sc.k + 10)));
  const SvdResult retry = svds(op, sc);
  if (retry.all_converged() || retry.wedin_fired) {
    SvdResult merged = retry;
    merged.matvec_count += r.matvec_count;
    return merged;
  }
  throw numerical_error("adaptive: svds did not converge in round " + std::to_string(round + 1) +
                        " (residual " + std::to_string(retry.residual_norm) + " after " +
                        std::to_string(retry.restarts) + " restarts, retried with max_dim " +
                        std::to_string(sc.max_dim) + ")");
}

inline void check_new_indices(const IndexVector& chosen, const IndexVector& fresh) {
  for (Index i : fresh)
    for (Index j : chosen)
      if (i == j)
        throw numerical_error("adaptive: index " + std::to_string(i) +
                              " selected twice (internal consistency)");
}

// Leverage-score draw from the (masked) leading right singular vectors:
// row mass of the block, already-selected rows zeroed, renormalized.
inline IndexVector leverage_pick(const Eigen::MatrixXd& vblock, const IndexVector& chosen,
                                 Index count, std::uint64_t seed) {
  Eigen::VectorXd mass = vblock.rowwise().squaredNorm();
  for (Index j : chosen) mass[j] = 0.0;
  const double total = mass.sum();
  if (total <= 0.0 || (mass.array() > 0.0).count() < count)
    throw numerical_error("adaptive: leverage mass support is too small");
  SamplingDistribution dist;
  dist.pr = mass / total;
  return sample_distribution(dist, count, seed);
}

// One-sided column selection on `mat` (rows come from running this on the
// transpose). `initial` short-circuits the first round's SVD: the row pass
// reuses the stored left singular vectors of A, already swapped into this
// side's orientation. `capture` receives this side's first-round SVD.
inline IndexVector select_one_sided(const Matrix& mat, Index k, const AdaptiveConfig& cfg,
                                    bool use_krylov, std::uint64_t side_tag,
                                    const RoundSvd* initial, RoundSvd* capture,
                                    std::vector<RoundTrace>& traces, bool& early_stop) {
  const Index limit = cfg.limit > 0 ? cfg.limit : (cfg.k + 9) / 10;
  IndexVector p;
  std::optional<Eigen::MatrixXd> e_dense;
  std::optional<IncrementalQR> basis;
  double mat_fro_sq = 0.0, captured_fro_sq = 0.0;
  if (use_krylov) {
    basis.emplace(mat.rows(), std::max<Index>(k, 4));
    mat_fro_sq = mat.frobenius_norm() * mat.frobenius_norm();
  } else {
    e_dense = mat.to_dense();
  }
  double sigma1_tol = -1.0;  // 1e-10 * sigma1(A), set after the first round

  for (int round = 0; static_cast<Index>(p.size()) < k; ++round) {
    const Index remaining = k - static_cast<Index>(p.size());
    const Index c_req =
        cfg.strategy == Strategy::fixed ? std::min(cfg.cols_per_round, remaining) : remaining;

    RoundSvd sv;
    if (initial && round == 0) {
      sv = *initial;
    } else if (use_krylov) {
      const ProjectedResidualOperator op =
          residual_operator(mat, Eigen::MatrixXd(basis->q()));
      const SvdConfig sc = round_svd_config(cfg, c_req, remaining,
                                            side_tag * 1000003u + static_cast<std::uint64_t>(round));
      const SvdResult r = round_svds(op, sc, round);
      sv.sigma = r.values;
      sv.u = r.u;
      sv.v = r.v;
      sv.matvecs = r.matvec_count;
      sv.restarts = r.restarts;
      sv.wedin_fired = r.wedin_fired;
    } else {
      const SvdResult r = dense_svd(*e_dense, cfg.dense_cap);
      sv.sigma = r.values;
      sv.u = r.u;
      sv.v = r.v;
    }
    if (capture && round == 0) *capture = sv;

    if (sigma1_tol < 0.0) {
      sigma1_tol = 1e-10 * sv.sigma[0];
    } else if (sv.sigma[0] <= sigma1_tol) {
      early_stop = true;  // residual numerically zero: factorization already exact
      break;
    }

    Index b = 0, count = 0;
    if (cfg.strategy == Strategy::decay) {
      std::tie(b, count) = decay_count(sv.sigma, remaining, cfg.delta, limit, cfg.strict_decay);
      count = std::min(count, static_cast<Index>(sv.v.cols()));
    } else {
      count = std::min(c_req, static_cast<Index>(sv.v.cols()));
    }

    IndexVector fresh;
    int fallbacks = 0;
    if (cfg.selector == Selector::leverage) {
      fresh = leverage_pick(sv.v.leftCols(count), p, count,
                            rng::mix64(cfg.seed ^ (side_tag * 7919u + static_cast<std::uint64_t>(round))));
    } else if (use_krylov && !p.empty()) {
      // implicit-residual guard: zero already-selected rows of V before DEIM
      fresh = deim(sv.v.leftCols(count), p);
    } else {
      fresh = deim(sv.v.leftCols(count));
    }
    check_new_indices(p, fresh);
    p.insert(p.end(), fresh.begin(), fresh.end());

    RoundTrace tr;
    tr.round = round;
    tr.p_round = fresh;
    tr.count = count;
    tr.sigma1 = sv.sigma[0];
    tr.b = b;
    tr.matvecs = sv.matvecs;
    tr.svd_restarts = sv.restarts;
    tr.deim_fallbacks = fallbacks;
    tr.wedin_fired = sv.wedin_fired;

    if (use_krylov) {
      for (Index j : fresh) {
        basis->append(mat.select_columns({j}));
        const Eigen::VectorXd w = mat.apply_adjoint(basis->q().col(basis->cols() - 1));
        captured_fro_sq += w.squaredNorm();
      }
      tr.residual_fro = std::sqrt(std::max(0.0, mat_fro_sq - captured_fro_sq));
    } else {
      const Eigen::MatrixXd c = mat.select_columns(p);
      *e_dense = mat.to_dense();
      e_dense->noalias() -= c * interpolative_cx(mat, p);
      tr.residual_fro = e_dense->norm();
    }
    traces.push_back(std::move(tr));
  }
  return p;
}

inline IndexVector append_unique(IndexVector base, const IndexVector& fresh) {
  base.insert(base.end(), fresh.begin(), fresh.end());
  return base;
}

}  // namespace detail

// Iterative-subselection CUR driver. One-sided runs select columns on A and
// rows on A^T (reusing the stored first-round left singular vectors for the
// row pass); two-sided runs select both per round against E = A - CMR with
// the without-replacement masking guard always on.
inline AdaptiveResult run_adaptive(const Matrix& a, AdaptiveConfig cfg) {
  if (cfg.k < 1 || cfg.k > std::min(a.rows(), a.cols()))
    throw validation_error("adaptive: k must lie in [1, min(m,n)]");
  if (cfg.strategy == Strategy::fixed) {
    if (cfg.cols_per_round < 1 || cfg.cols_per_round > cfg.k)
      throw validation_error("adaptive: cols_per_round must lie in [1, k]");
  } else {
    if (cfg.delta < 0.0 || cfg.delta > 1.0)
      throw validation_error("adaptive: delta must lie in [0, 1]");
    if (cfg.limit < 0) throw validation_error("adaptive: limit must be nonnegative");
  }
  if (cfg.limit == 0) cfg.limit = (cfg.k + 9) / 10;

  const std::size_t elems =
      static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(a.cols());
  const bool use_krylov = cfg.backend == Backend::krylov ||
                          (cfg.backend == Backend::auto_select && elems > cfg.dense_cap);
  if (use_krylov && cfg.k >= std::min(a.rows(), a.cols()))
    throw validation_error("adaptive: krylov backend needs k < min(m,n)");

  AdaptiveResult out;

  if (cfg.residual == ResidualKind::one_sided) {
    detail::RoundSvd first;
    IndexVector p = detail::select_one_sided(a, cfg.k, cfg, use_krylov, 1, nullptr, &first,
                                             out.col_traces, out.early_stop);
    // row pass on A^T, first round served by the stored left singular vectors
    detail::RoundSvd swapped;
    swapped.sigma = first.sigma;
    swapped.u = first.v;
    swapped.v = first.u;
    const Matrix at = a.transposed();
    bool row_early = false;
    IndexVector s =
        detail::select_one_sided(at, static_cast<Index>(p.size()), cfg, use_krylov, 2, &swapped,
                                 nullptr, out.row_traces, row_early);
    out.early_stop = out.early_stop || row_early;
    if (s.size() != p.size()) {
      // one side hit the exact-capture stop before the other; trim both so M
      // stays square (the factorization is already exact at this rank)
      const std::size_t kk = std::min(p.size(), s.size());
      p.resize(kk);
      s.resize(kk);
      out.early_stop = true;
    }
    out.fact = make_cur(a, std::move(p), std::move(s));
  } else {
    // two-sided: single loop, masked DEIM on both factors, E = A - CMR
    std::optional<Eigen::MatrixXd> e_dense;
    if (!use_krylov) e_dense = a.to_dense();
    IndexVector p, s;
    Eigen::MatrixXd c, r, m;
    double sigma1_tol = -1.0;
    for (int round = 0; static_cast<Index>(p.size()) < cfg.k; ++round) {
      const Index remaining = cfg.k - static_cast<Index>(p.size());
      const Index c_req =
          cfg.strategy == Strategy::fixed ? std::min(cfg.cols_per_round, remaining) : remaining;

      detail::RoundSvd sv;
      if (use_krylov) {
        const SvdConfig sc = detail::round_svd_config(cfg, c_req, remaining,
                                                      3000017u + static_cast<std::uint64_t>(round));
        SvdResult rr;
        if (p.empty()) {
          rr = detail::round_svds(a, sc, round);
        } else {
          const CurResidualOperator op(a, c, m, r);
          rr = detail::round_svds(op, sc, round);
        }
        sv.sigma = rr.values;
        sv.u = rr.u;
        sv.v = rr.v;
        sv.matvecs = rr.matvec_count;
        sv.restarts = rr.restarts;
        sv.wedin_fired = rr.wedin_fired;
      } else {
        const SvdResult rr = dense_svd(*e_dense, cfg.dense_cap);
        sv.sigma = rr.values;
        sv.u = rr.u;
        sv.v = rr.v;
      }

      if (sigma1_tol < 0.0) {
        sigma1_tol = 1e-10 * sv.sigma[0];
      } else if (sv.sigma[0] <= sigma1_tol) {
        out.early_stop = true;
        break;
      }

      Index b = 0, count = 0;
      if (cfg.strategy == Strategy::decay) {
        std::tie(b, count) =
            detail::decay_count(sv.sigma, remaining, cfg.delta, cfg.limit, cfg.strict_decay);
        count = std::min(count, static_cast<Index>(sv.v.cols()));
      } else {
        count = std::min(c_req, static_cast<Index>(sv.v.cols()));
      }

      int fallbacks = 0;
      const IndexVector p_new = deim_with_fallback(sv.v.leftCols(count), p, fallbacks);
      const IndexVector s_new = deim_with_fallback(sv.u.leftCols(count), s, fallbacks);
      detail::check_new_indices(p, p_new);
      detail::check_new_indices(s, s_new);
      p = detail::append_unique(std::move(p), p_new);
      s = detail::append_unique(std::move(s), s_new);

      c = a.select_columns(p);
      r = a.select_rows(s);
      m = middle_matrix(a, p, s);

      RoundTrace tr;
      tr.round = round;
      tr.p_round = p_new;
      tr.s_round = s_new;
      tr.count = count;
      tr.sigma1 = sv.sigma[0];
      tr.b = b;
      tr.matvecs = sv.matvecs;
      tr.svd_restarts = sv.restarts;
      tr.deim_fallbacks = fallbacks;
      tr.wedin_fired = sv.wedin_fired;
      if (!use_krylov) {
        *e_dense = a.to_dense();
        e_dense->noalias() -= c * (m * r);
        tr.residual_fro = e_dense->norm();
      }
      out.col_traces.push_back(std::move(tr));
    }
    out.fact = make_cur(a, std::move(p), std::move(s));
  }

  for (const auto& tr : out.col_traces) {
    out.total_matvecs += tr.matvecs;
    out.deim_fallbacks += tr.deim_fallbacks;
  }
  for (const auto& tr : out.row_traces) out.total_matvecs += tr.matvecs;
  return out;
}

inline AdaptiveResult cadp_cx(const Matrix& a, Index k, Index c,
                              Backend backend = Backend::auto_select, std::uint64_t seed = 0) {
  AdaptiveConfig cfg;
  cfg.k = k;
  cfg.strategy = Strategy::fixed;
  cfg.cols_per_round = c;
  cfg.residual = ResidualKind::one_sided;
  cfg.backend = backend;
  cfg.seed = seed;
  return run_adaptive(a, cfg);
}

inline AdaptiveResult dadp_cx(const Matrix& a, Index k, double delta, Index limit,
                              Backend backend = Backend::auto_select, std::uint64_t seed = 0) {
  AdaptiveConfig cfg;
  cfg.k = k;
  cfg.strategy = Strategy::decay;
  cfg.delta = delta;
  cfg.limit = limit;
  cfg.residual = ResidualKind::one_sided;
  cfg.backend = backend;
  cfg.seed = seed;
  return run_adaptive(a, cfg);
}

inline AdaptiveResult cadp_cur(const Matrix& a, Index k, Index c,
                               Backend backend = Backend::auto_select, std::uint64_t seed = 0) {
  AdaptiveConfig cfg;
  cfg.k = k;
  cfg.strategy = Strategy::fixed;
  cfg.cols_per_round = c;
  cfg.residual = ResidualKind::two_sided;
  cfg.backend = backend;
  cfg.seed = seed;
  return run_adaptive(a, cfg);
}

inline AdaptiveResult dadp_cur(const Matrix& a, Index k, double delta, Index limit,
                               Backend backend = Backend::auto_select, std::uint64_t seed = 0) {
  AdaptiveConfig cfg;
  cfg.k = k;
  cfg.strategy = Strategy::decay;
  cfg.delta = delta;
  cfg.limit = limit;
  cfg.residual = ResidualKind::two_sided;
  cfg.backend = backend;
  cfg.seed = seed;
  return run_adaptive(a, cfg);
}

// Large-scale one-sided decay driver (implicit residual + incremental QR).
inline AdaptiveResult dadp_cx_large(const Matrix& a, Index k, double delta, Index limit,
                                    std::uint64_t seed = 0, bool wedin_early_stop = false) {
  AdaptiveConfig cfg;
  cfg.k = k;
  cfg.strategy = Strategy::decay;
  cfg.delta = delta;
  cfg.limit = limit;
  cfg.residual = ResidualKind::one_sided;
  cfg.backend = Backend::krylov;
  cfg.seed = seed;
  cfg.wedin_early_stop = wedin_early_stop;
  return run_adaptive(a, cfg);
}

// Randomized leverage-score variant of the large-scale fixed-schedule path.
inline AdaptiveResult cadp_cx_lvg(const Matrix& a, Index k, Index c, std::uint64_t seed) {
  AdaptiveConfig cfg;
  cfg.k = k;
  cfg.strategy = Strategy::fixed;
  cfg.cols_per_round = c;
  cfg.residual = ResidualKind::one_sided;
  cfg.backend = Backend::krylov;
  cfg.selector = Selector::leverage;
  cfg.seed = seed;
  return run_adaptive(a, cfg);
}

}  // namespace itercur
