#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "itercur/adaptive.hpp"
#include "itercur/generator.hpp"
#include "itercur/matrix_market.hpp"

namespace itercur {

using json = nlohmann::json;

constexpr int kReportSchemaVersion = 1;

enum class Method { deim, qdeim, maxvol, volume, lvg, cadp_cx, cadp_cur, dadp_cx, dadp_cur };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::deim: return "deim";
    case Method::qdeim: return "qdeim";
    case Method::maxvol: return "maxvol";
    case Method::volume: return "volume";
    case Method::lvg: return "lvg";
    case Method::cadp_cx: return "cadp-cx";
    case Method::cadp_cur: return "cadp-cur";
    case Method::dadp_cx: return "dadp-cx";
    case Method::dadp_cur: return "dadp-cur";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::deim, Method::qdeim, Method::maxvol, Method::volume, Method::lvg,
                   Method::cadp_cx, Method::cadp_cur, Method::dadp_cx, Method::dadp_cur})
    if (s == to_string(m)) return m;
  throw validation_error("unknown method '" + s + "'");
}

inline bool is_adaptive(Method m) {
  return m == Method::cadp_cx || m == Method::cadp_cur || m == Method::dadp_cx ||
         m == Method::dadp_cur;
}

inline Backend backend_from_string(const std::string& s) {
  if (s == "dense") return Backend::dense;
  if (s == "krylov") return Backend::krylov;
  if (s == "auto") return Backend::auto_select;
  throw validation_error("unknown backend '" + s + "'");
}

inline const char* to_string(Backend b) {
  switch (b) {
    case Backend::dense: return "dense";
    case Backend::krylov: return "krylov";
    case Backend::auto_select: return "auto";
  }
  return "?";
}

enum class NormKind { spectral, frobenius, both };

inline NormKind norm_from_string(const std::string& s) {
  if (s == "spectral") return NormKind::spectral;
  if (s == "frobenius") return NormKind::frobenius;
  if (s == "both") return NormKind::both;
  throw validation_error("unknown norm '" + s + "'");
}

inline const char* to_string(NormKind n) {
  switch (n) {
    case NormKind::spectral: return "spectral";
    case NormKind::frobenius: return "frobenius";
    case NormKind::both: return "both";
  }
  return "?";
}

struct SynthSpec {
  Index m = 0;
  Index n = 0;
  double density = 0.025;
  Index terms = -1;
};

struct RunSpec {
  std::optional<std::string> input_path;
  std::optional<SynthSpec> synth;
  bool normalize = false;
  Method method = Method::deim;
  std::vector<Index> ranks;
  std::optional<Index> rounds;          // t (fixed schedule)
  std::optional<Index> cols_per_round;  // c (fixed schedule)
  std::optional<double> delta;          // decay schedule
  std::optional<Index> limit;           // l
  Backend backend = Backend::auto_select;
  NormKind norm = NormKind::spectral;
  std::uint64_t seed = 0;
};

// Method-parameter compatibility, checked before touching any data.
inline void validate_spec(const RunSpec& spec) {
  if (!spec.input_path && !spec.synth)
    throw validation_error("run spec: need an input path or synth parameters");
  if (spec.input_path && spec.synth)
    throw validation_error("run spec: input path and synth parameters are mutually exclusive");
  if (spec.ranks.empty()) throw validation_error("run spec: at least one rank is required");
  for (Index k : spec.ranks)
    if (k < 1) throw validation_error("run spec: ranks must be positive");

  const bool decay_method = spec.method == Method::dadp_cx || spec.method == Method::dadp_cur;
  const bool fixed_method = spec.method == Method::cadp_cx || spec.method == Method::cadp_cur ||
                            spec.method == Method::volume;
  if (spec.delta && !decay_method)
    throw validation_error("run spec: delta applies only to dadp-* methods");
  if (spec.limit && !decay_method)
    throw validation_error("run spec: limit applies only to dadp-* methods");
  if ((spec.rounds || spec.cols_per_round) && !fixed_method)
    throw validation_error("run spec: rounds / cols-per-round apply only to cadp-* and volume");
  if (spec.rounds && spec.cols_per_round)
    throw validation_error("run spec: give rounds or cols-per-round, not both");
  if (spec.delta && (*spec.delta < 0.0 || *spec.delta > 1.0))
    throw validation_error("run spec: delta must lie in [0, 1]");
}

inline Matrix load_input(const RunSpec& spec) {
  Matrix a = spec.synth ? synth_sparse(spec.synth->m, spec.synth->n, spec.synth->density,
                                       spec.seed, spec.synth->terms)
                        : read_matrix_market(*spec.input_path);
  if (spec.normalize) a = normalize_rows(a);
  return a;
}

namespace detail {

inline Index fixed_c(const RunSpec& spec, Index k) {
  if (spec.cols_per_round) return std::min(*spec.cols_per_round, k);
  const Index t = spec.rounds ? *spec.rounds : 10;
  return std::max<Index>(1, (k + t - 1) / t);
}

struct MethodOutcome {
  IndexVector p, s;
  long matvecs = 0;
  std::vector<RoundTrace> col_traces, row_traces;
  std::vector<std::string> warnings;
};

inline SvdResult leading_svd(const Matrix& a, Index k, Backend backend, std::uint64_t seed,
                             long& matvecs) {
  const std::size_t elems =
      static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(a.cols());
  const bool dense = backend == Backend::dense ||
                     (backend == Backend::auto_select &&
                      (elems <= 50'000'000 || k >= std::min(a.rows(), a.cols())));
  if (dense) return dense_svd(a);
  SvdConfig cfg;
  cfg.k = static_cast<int>(k);
  cfg.seed = seed;
  SvdResult r = svds(a, cfg);
  matvecs += r.matvec_count;
  if (!r.all_converged())
    throw numerical_error("svds did not converge for the one-round selection");
  return r;
}

inline MethodOutcome run_method(const Matrix& a, const RunSpec& spec, Index k) {
  if (k > std::min(a.rows(), a.cols()))
    throw validation_error("rank k exceeds min(m,n) of the input");
  MethodOutcome out;
  switch (spec.method) {
    case Method::deim:
    case Method::qdeim:
    case Method::maxvol:
    case Method::lvg: {
      const SvdResult svd = leading_svd(a, k, spec.backend, spec.seed, out.matvecs);
      const Eigen::MatrixXd vk = svd.v.leftCols(k);
      const Eigen::MatrixXd uk = svd.u.leftCols(k);
      if (spec.method == Method::deim) {
        out.p = deim(vk);
        out.s = deim(uk);
      } else if (spec.method == Method::qdeim) {
        out.p = qdeim(vk);
        out.s = qdeim(uk);
      } else if (spec.method == Method::maxvol) {
        const MaxvolResult mp = maxvol(vk);
        const MaxvolResult ms = maxvol(uk);
        out.p = mp.indices;
        out.s = ms.indices;
        if (mp.warning || ms.warning)
          out.warnings.push_back("maxvol hit the sweep budget before dominance");
      } else {
        out.p = sample_distribution(leverage_scores(vk), k, rng::mix64(spec.seed ^ 0x1001));
        out.s = sample_distribution(leverage_scores(uk), k, rng::mix64(spec.seed ^ 0x1002));
      }
      break;
    }
    case Method::volume: {
      const Index c = fixed_c(spec, k);
      if (k % c != 0)
        throw validation_error("volume sampling needs cols-per-round dividing k");
      const VolumeSamplingResult vp = volume_sampling(a, k, k / c, c, spec.seed);
      const VolumeSamplingResult vs = volume_sampling(a.transposed(), k, k / c, c,
                                                      rng::mix64(spec.seed ^ 0x2002));
      out.p = vp.indices;
      out.s = vs.indices;
      if (vp.warning || vs.warning)
        out.warnings.push_back("volume sampling ran out of residual support");
      if (out.p.size() != out.s.size()) {
        const std::size_t kk = std::min(out.p.size(), out.s.size());
        out.p.resize(kk);
        out.s.resize(kk);
      }
      break;
    }
    default: {
      AdaptiveConfig cfg;
      cfg.k = k;
      cfg.backend = spec.backend;
      cfg.seed = spec.seed;
      cfg.residual = (spec.method == Method::cadp_cur || spec.method == Method::dadp_cur)
                         ? ResidualKind::two_sided
                         : ResidualKind::one_sided;
      if (spec.method == Method::cadp_cx || spec.method == Method::cadp_cur) {
        cfg.strategy = Strategy::fixed;
        cfg.cols_per_round = fixed_c(spec, k);
      } else {
        cfg.strategy = Strategy::decay;
        cfg.delta = spec.delta ? *spec.delta : 0.8;
        cfg.limit = spec.limit ? *spec.limit : 0;
      }
      AdaptiveResult r = run_adaptive(a, cfg);
      out.p = r.fact.p;
      out.s = r.fact.s;
      out.matvecs = r.total_matvecs;
      out.col_traces = std::move(r.col_traces);
      out.row_traces = std::move(r.row_traces);
      if (r.early_stop)
        out.warnings.push_back("residual reached exact capture before k indices");
      if (r.deim_fallbacks > 0)
        out.warnings.push_back(std::to_string(r.deim_fallbacks) +
                               " masked DEIM steps fell back to the raw argmax");
      break;
    }
  }
  return out;
}

inline json trace_to_json(const RoundTrace& tr) {
  json j{{"round", tr.round}, {"count", tr.count},   {"sigma1", tr.sigma1},
         {"b", tr.b},         {"matvecs", tr.matvecs}, {"svd_restarts", tr.svd_restarts},
         {"deim_fallbacks", tr.deim_fallbacks}, {"wedin_fired", tr.wedin_fired}};
  j["p"] = tr.p_round;
  if (!tr.s_round.empty()) j["s"] = tr.s_round;
  if (std::isfinite(tr.residual_fro)) j["residual_fro"] = tr.residual_fro;
  return j;
}

}  // namespace detail

inline json spec_to_json(const RunSpec& spec) {
  json j;
  if (spec.input_path) j["input"] = *spec.input_path;
  if (spec.synth)
    j["synth"] = {{"m", spec.synth->m},
                  {"n", spec.synth->n},
                  {"density", spec.synth->density},
                  {"terms", spec.synth->terms}};
  j["normalize_rows"] = spec.normalize;
  j["method"] = to_string(spec.method);
  j["ranks"] = spec.ranks;
  if (spec.rounds) j["rounds"] = *spec.rounds;
  if (spec.cols_per_round) j["cols_per_round"] = *spec.cols_per_round;
  if (spec.delta) j["delta"] = *spec.delta;
  if (spec.limit) j["limit"] = *spec.limit;
  j["backend"] = to_string(spec.backend);
  j["norm"] = to_string(spec.norm);
  j["seed"] = spec.seed;
  return j;
}

inline std::string param_string(const RunSpec& spec, Index k) {
  std::ostringstream os;
  if (spec.method == Method::cadp_cx || spec.method == Method::cadp_cur ||
      spec.method == Method::volume) {
    os << "c=" << detail::fixed_c(spec, k);
  } else if (spec.method == Method::dadp_cx || spec.method == Method::dadp_cur) {
    os << "delta=" << (spec.delta ? *spec.delta : 0.8) << ";l="
       << (spec.limit ? *spec.limit : (k + 9) / 10);
  } else {
    os << "-";
  }
  return os.str();
}

// Executes one (method, k) cell and assembles the versioned report object.
// `cached_norm` carries ||A||_2 across cells of the same input.
inline json run_report(const Matrix& a, const RunSpec& spec, Index k,
                       std::optional<double>& cached_norm) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::MethodOutcome mo = detail::run_method(a, spec, k);
  CurFactorization fact = make_cur(a, mo.p, mo.s);

  if (!cached_norm) cached_norm = spectral_norm(a);
  json errors;
  if (spec.norm != NormKind::frobenius) {
    const SpectralError se = spectral_error(a, fact, ErrorMode::auto_mode, cached_norm);
    errors["absolute_2"] = se.absolute;
    errors["relative_2"] = se.relative;
    if (!se.converged) mo.warnings.push_back("spectral-norm estimate did not fully converge");
  }
  if (spec.norm != NormKind::spectral) {
    const double abs_f = frobenius_error(a, fact, false);
    errors["absolute_F"] = abs_f;
    const double norm_f = a.frobenius_norm();
    errors["relative_F"] = norm_f > 0.0 ? abs_f / norm_f : 0.0;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["spec"] = spec_to_json(spec);
  report["k"] = static_cast<Index>(fact.p.size());
  report["param_string"] = param_string(spec, k);
  report["indices"] = {{"p", fact.p}, {"s", fact.s}};
  report["errors"] = errors;
  report["seconds"] = seconds;
  report["matvecs"] = mo.matvecs;

  const std::size_t elems =
      static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(a.cols());
  if (elems <= 2'000'000) {  // eta diagnostics only on the dense path
    try {
      const CurDiagnostics d = theorem_bound(a, fact);
      report["diagnostics"] = {{"eta_p", d.eta_p},       {"eta_s", d.eta_s},
                               {"sigma_kplus1", d.sigma_kplus1}, {"bound", d.bound},
                               {"achieved", d.achieved}, {"cap_nk", d.cap_nk},
                               {"cap_mk", d.cap_mk}};
    } catch (const numerical_error&) {
      mo.warnings.push_back("bound diagnostics unavailable (singular V^T P or S^T U)");
    }
  }
  json rounds = json::array();
  for (const auto& tr : mo.col_traces) rounds.push_back(detail::trace_to_json(tr));
  report["rounds"] = std::move(rounds);
  if (!mo.row_traces.empty()) {
    json rr = json::array();
    for (const auto& tr : mo.row_traces) rr.push_back(detail::trace_to_json(tr));
    report["row_rounds"] = std::move(rr);
  }
  report["warnings"] = mo.warnings;
  return report;
}

// Published report contract: required fields present, every numeric finite.
inline void validate_report(const json& report) {
  const auto require = [&](const char* field) {
    if (!report.contains(field))
      throw validation_error(std::string("report missing field '") + field + "'");
  };
  for (const char* f : {"schema_version", "spec", "k", "param_string", "indices", "errors",
                        "seconds", "matvecs", "rounds", "warnings"})
    require(f);
  if (report["schema_version"] != kReportSchemaVersion)
    throw validation_error("report schema_version mismatch");
  std::function<void(const json&)> walk = [&](const json& node) {
    if (node.is_number_float() && !std::isfinite(node.get<double>()))
      throw validation_error("report contains a non-finite numeric field");
    if (node.is_object() || node.is_array())
      for (const auto& child : node) walk(child);
  };
  walk(report);
}

inline std::string csv_header() {
  return "method,k,params,rel_err_2,rel_err_F,seconds,matvecs,status";
}

inline std::string csv_row(const json& report) {
  std::ostringstream os;
  os.precision(12);
  const json& e = report["errors"];
  os << report["spec"]["method"].get<std::string>() << "," << report["k"].get<Index>() << ","
     << report["param_string"].get<std::string>() << ",";
  if (e.contains("relative_2")) os << e["relative_2"].get<double>();
  os << ",";
  if (e.contains("relative_F")) os << e["relative_F"].get<double>();
  os << "," << report["seconds"].get<double>() << "," << report["matvecs"].get<long>() << ",ok";
  return os.str();
}

inline std::string csv_error_row(const RunSpec& spec, Index k, const error& err) {
  std::ostringstream os;
  os << to_string(spec.method) << "," << k << "," << param_string(spec, k)
     << ",,,,," << "error:" << static_cast<int>(err.code());
  return os.str();
}

// Sidecar cache for the spectral-norm denominator of a dataset file.
inline std::optional<double> load_cached_norm(const std::string& input_path) {
  std::ifstream in(input_path + ".norm2");
  double v = 0.0;
  if (in >> v && std::isfinite(v) && v >= 0.0) return v;
  return std::nullopt;
}

inline void store_cached_norm(const std::string& input_path, double norm) {
  std::ofstream out(input_path + ".norm2");
  out.precision(17);
  out << norm << "\n";
}

struct GridResult {
  std::vector<json> reports;  // one per ok cell, grid order
  std::vector<std::string> csv_rows;
  int failures = 0;
};

// Grid file: the RunSpec fields plus "methods": [..]; one cell per
// (method, rank). Cell failures are recorded in-row and the grid continues.
inline RunSpec spec_from_json(const json& j) {
  RunSpec spec;
  if (j.contains("input")) spec.input_path = j["input"].get<std::string>();
  if (j.contains("synth")) {
    SynthSpec sy;
    sy.m = j["synth"].at("m").get<Index>();
    sy.n = j["synth"].at("n").get<Index>();
    if (j["synth"].contains("density")) sy.density = j["synth"]["density"].get<double>();
    if (j["synth"].contains("terms")) sy.terms = j["synth"]["terms"].get<Index>();
    spec.synth = sy;
  }
  if (j.contains("normalize_rows")) spec.normalize = j["normalize_rows"].get<bool>();
  if (j.contains("method")) spec.method = method_from_string(j["method"].get<std::string>());
  if (j.contains("ranks")) spec.ranks = j["ranks"].get<std::vector<Index>>();
  if (j.contains("rounds")) spec.rounds = j["rounds"].get<Index>();
  if (j.contains("cols_per_round")) spec.cols_per_round = j["cols_per_round"].get<Index>();
  if (j.contains("delta")) spec.delta = j["delta"].get<double>();
  if (j.contains("limit")) spec.limit = j["limit"].get<Index>();
  if (j.contains("backend")) spec.backend = backend_from_string(j["backend"].get<std::string>());
  if (j.contains("norm")) spec.norm = norm_from_string(j["norm"].get<std::string>());
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  return spec;
}

// Grid parameter blocks are shared across methods; parameters a method does
// not use are dropped for its cells instead of failing the whole grid.
inline RunSpec sanitize_for_method(RunSpec spec, Method method) {
  spec.method = method;
  const bool decay_method = method == Method::dadp_cx || method == Method::dadp_cur;
  const bool fixed_method =
      method == Method::cadp_cx || method == Method::cadp_cur || method == Method::volume;
  if (!decay_method) {
    spec.delta.reset();
    spec.limit.reset();
  }
  if (!fixed_method) {
    spec.rounds.reset();
    spec.cols_per_round.reset();
  }
  return spec;
}

inline GridResult run_grid(const json& grid) {
  if (!grid.contains("methods") || !grid["methods"].is_array())
    throw validation_error("grid: 'methods' array is required");
  RunSpec base = spec_from_json(grid);
  base.norm = grid.contains("norm") ? norm_from_string(grid["norm"].get<std::string>())
                                    : NormKind::both;

  GridResult out;
  out.csv_rows.push_back(csv_header());
  Matrix a = load_input(base);
  std::optional<double> cached_norm;
  if (base.input_path && !base.normalize) cached_norm = load_cached_norm(*base.input_path);

  for (const auto& mj : grid["methods"]) {
    const RunSpec spec = sanitize_for_method(base, method_from_string(mj.get<std::string>()));
    for (Index k : spec.ranks) {
      try {
        validate_spec(spec);
        json report = run_report(a, spec, k, cached_norm);
        validate_report(report);
        out.csv_rows.push_back(csv_row(report));
        out.reports.push_back(std::move(report));
      } catch (const error& err) {
        out.csv_rows.push_back(csv_error_row(spec, k, err));
        ++out.failures;
      }
    }
  }
  if (base.input_path && !base.normalize && cached_norm)
    store_cached_norm(*base.input_path, *cached_norm);
  return out;
}

}  // namespace itercur
