// itercur command-line harness: synthetic data generation, single
// decompositions, benchmark grids, and the built-in verification suite.
//
// Exit codes: 0 success, 2 validation, 3 ingestion, 4 numerical failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>

#include <itercur/bench.hpp>
#include <itercur/verify.hpp>

namespace {

using namespace itercur;

int fail_with(const error& err) {
  json obj;
  obj["error"] = {{"code", static_cast<int>(err.code())}, {"message", err.what()}};
  std::cout << obj.dump(2) << std::endl;
  return static_cast<int>(err.code());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ingest_error(path + ": cannot open for writing");
  out << text;
  if (!out) throw ingest_error(path + ": write failed");
}

SynthSpec parse_synth(const std::string& s) {
  SynthSpec sy;
  char comma = 0;
  std::istringstream is(s);
  if (!(is >> sy.m >> comma >> sy.n) || comma != ',')
    throw validation_error("--synth expects m,n[,density[,terms]]");
  if (is >> comma >> sy.density && comma != ',')
    throw validation_error("--synth expects m,n[,density[,terms]]");
  if (is >> comma >> sy.terms && comma != ',')
    throw validation_error("--synth expects m,n[,density[,terms]]");
  return sy;
}

int cmd_generate(Index m, Index n, double density, std::uint64_t seed, Index terms,
                 const std::string& out_path) {
  const Matrix a = synth_sparse(m, n, density, seed, terms);
  write_matrix_market(a, out_path);
  json echo{{"written", out_path}, {"rows", a.rows()},       {"cols", a.cols()},
            {"nonzeros", a.nonzeros()}, {"density", density}, {"seed", seed}};
  std::cout << echo.dump(2) << std::endl;
  return 0;
}

int cmd_decompose(const RunSpec& spec, const std::string& out_path) {
  validate_spec(spec);
  const Matrix a = load_input(spec);
  std::optional<double> cached;
  if (spec.input_path && !spec.normalize) cached = load_cached_norm(*spec.input_path);
  const json report = run_report(a, spec, spec.ranks.front(), cached);
  validate_report(report);
  if (spec.input_path && !spec.normalize && cached) store_cached_norm(*spec.input_path, *cached);
  if (out_path.empty())
    std::cout << report.dump(2) << std::endl;
  else
    write_text(out_path, report.dump(2) + "\n");
  return 0;
}

int cmd_benchmark(const std::string& grid_path, const std::string& csv_path,
                  const std::string& json_path) {
  std::ifstream in(grid_path);
  if (!in) throw ingest_error(grid_path + ": cannot open grid file");
  json grid;
  try {
    in >> grid;
  } catch (const json::exception& e) {
    throw ingest_error(grid_path + ": " + e.what());
  }
  const GridResult result = run_grid(grid);
  std::string csv;
  for (const auto& row : result.csv_rows) csv += row + "\n";
  write_text(csv_path, csv);
  if (!json_path.empty()) {
    json all = json::array();
    for (const auto& r : result.reports) all.push_back(r);
    write_text(json_path, all.dump(2) + "\n");
  }
  std::cout << "wrote " << result.csv_rows.size() - 1 << " rows to " << csv_path;
  if (result.failures > 0) std::cout << " (" << result.failures << " cell failures recorded)";
  std::cout << std::endl;
  return 0;
}

int cmd_verify(const VerifyOptions& opt) {
  const auto results = run_verification(opt);
  bool all_ok = true;
  for (const auto& cr : results) {
    const char* status = cr.skipped ? "SKIP" : (cr.passed ? "PASS" : "FAIL");
    std::cout << "criterion " << cr.id << ": " << status << " - " << cr.name;
    if (!cr.detail.empty()) std::cout << " [" << cr.detail << "]";
    std::cout << std::endl;
    if (!cr.skipped && !cr.passed) all_ok = false;
  }
  if (!all_ok) {
    std::cout << "verification FAILED" << std::endl;
    return static_cast<int>(errc::numerical);
  }
  std::cout << "verification passed" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("ITERCUR_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"CUR factorization via DEIM-based iterative subselection"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic sparse matrix (Matrix Market)");
  Index g_m = 0, g_n = 0, g_terms = -1;
  double g_density = 0.025;
  std::uint64_t g_seed = 0;
  std::string g_out;
  gen->add_option("--rows,-m", g_m, "row count")->required();
  gen->add_option("--cols,-n", g_n, "column count")->required();
  gen->add_option("--density,-d", g_density, "per-vector fill fraction")->capture_default_str();
  gen->add_option("--terms", g_terms, "rank-1 terms (default: n)");
  gen->add_option("--seed", g_seed, "RNG seed")->capture_default_str();
  gen->add_option("--out,-o", g_out, "output .mtx path")->required();

  // decompose
  auto* dec = app.add_subcommand("decompose", "run one method at one rank, emit a JSON report");
  std::string d_input, d_synth, d_method, d_backend = "auto", d_norm = "spectral", d_out;
  Index d_rank = 0;
  Index d_rounds = 0, d_cols = 0, d_limit = 0;
  double d_delta = -1.0;
  std::uint64_t d_seed = 0;
  bool d_normalize = false;
  dec->add_option("--input,-i", d_input, "Matrix Market input path");
  dec->add_option("--synth", d_synth, "synthetic input: m,n[,density[,terms]]");
  dec->add_option("--method", d_method,
                  "deim|qdeim|maxvol|volume|lvg|cadp-cx|cadp-cur|dadp-cx|dadp-cur")
      ->required();
  dec->add_option("--rank,-k", d_rank, "target rank")->required();
  dec->add_option("--rounds,-t", d_rounds, "rounds (fixed schedule)");
  dec->add_option("--cols-per-round,-c", d_cols, "indices per round (fixed schedule)");
  dec->add_option("--delta", d_delta, "decay threshold (dadp-*)");
  dec->add_option("--limit,-l", d_limit, "decay cap l (dadp-*)");
  dec->add_option("--backend", d_backend, "dense|krylov|auto")->capture_default_str();
  dec->add_option("--norm", d_norm, "spectral|frobenius|both")->capture_default_str();
  dec->add_option("--seed", d_seed, "RNG seed")->capture_default_str();
  dec->add_flag("--normalize-rows", d_normalize, "scale rows to unit 2-norm before running");
  dec->add_option("--out,-o", d_out, "report path (default: stdout)");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "run a (method x rank) grid from a JSON file");
  std::string b_grid, b_csv, b_json;
  bench->add_option("--grid,-g", b_grid, "grid spec (JSON)")->required();
  bench->add_option("--csv,-o", b_csv, "CSV output path")->required();
  bench->add_option("--json", b_json, "also write full JSON reports");

  // verify
  auto* ver = app.add_subcommand("verify", "run the built-in acceptance suite");
  VerifyOptions v_opt;
  if (const char* dir = std::getenv("ITERCUR_DATA_DIR")) v_opt.data_dir = dir;
  ver->add_option("--data-dir", v_opt.data_dir, "directory with the real datasets");
  ver->add_flag("--extended", v_opt.include_extended, "include the dataset-dependent criterion");
  ver->add_flag("--tamper", v_opt.tamper)->group("");  // negative-control hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return static_cast<int>(errc::validation);
  }

  try {
    if (gen->parsed()) return cmd_generate(g_m, g_n, g_density, g_seed, g_terms, g_out);
    if (dec->parsed()) {
      RunSpec spec;
      if (!d_input.empty()) spec.input_path = d_input;
      if (!d_synth.empty()) spec.synth = parse_synth(d_synth);
      spec.normalize = d_normalize;
      spec.method = method_from_string(d_method);
      spec.ranks = {d_rank};
      if (d_rounds > 0) spec.rounds = d_rounds;
      if (d_cols > 0) spec.cols_per_round = d_cols;
      if (d_delta >= 0.0) spec.delta = d_delta;
      if (d_limit > 0) spec.limit = d_limit;
      spec.backend = backend_from_string(d_backend);
      spec.norm = norm_from_string(d_norm);
      spec.seed = d_seed;
      return cmd_decompose(spec, d_out);
    }
    if (bench->parsed()) return cmd_benchmark(b_grid, b_csv, b_json);
    if (ver->parsed()) return cmd_verify(v_opt);
  } catch (const error& err) {
    return fail_with(err);
  } catch (const std::exception& e) {
    return fail_with(numerical_error(e.what()));
  }
  return 0;
}
