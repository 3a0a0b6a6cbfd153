// dppmle: command-line driver for critical points of the rank-2 projection
// DPP likelihood.
//
//   dppmle solve   --u counts.json | --u 1,2,3   [--out result.json]
//   dppmle verify  --n 5 [--seed 42]
//   dppmle sample  --rows "1,0,1;0,1,1" --samples 300 --seed 7 --out counts.json
//   dppmle regions --n 4 [--out regions.json]
//   dppmle bench   --n 6
//
// Exit codes: 0 success, 1 input/output or schema error, 2 incomplete
// solution set (solve), 3 failed verification (verify).

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dppmle/analysis.hpp"
#include "dppmle/dpp.hpp"
#include "dppmle/io.hpp"
#include "dppmle/parallel.hpp"
#include "dppmle/pipeline.hpp"

namespace {

using namespace dppmle;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitIncomplete = 2;
constexpr int kExitVerifyFailed = 3;

struct RunConfig {
  int n = 0;
  std::string u_arg;
  std::uint64_t seed = 42;
  int workers = 1;
  bool deterministic = false;
  std::string out_path;
  std::int64_t target_count = 0;  // 0: the theoretical count
  int stall_limit = 30;
  double dedup_tol = 1e-6;
  double reality_tol = 1e-8;
  // sample
  std::string rows;
  std::int64_t samples = 0;
  std::int64_t max_count = 1000;

  PipelineOptions pipeline() const {
    PipelineOptions p;
    p.seed = seed;
    p.workers = workers;
    if (target_count > 0) p.target_count = target_count;
    p.stall_limit = stall_limit;
    p.tracker.dedup_tol = dedup_tol;
    p.tracker.reality_tol = reality_tol;
    return p;
  }
};

void add_common(CLI::App* app, RunConfig& cfg, bool pipeline_flags) {
  app->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  app->add_option("--out", cfg.out_path, "output file");
  if (!pipeline_flags) return;
  app->add_option("--workers", cfg.workers, "worker threads")
      ->envname("DPPMLE_WORKERS")
      ->check(CLI::PositiveNumber);
  app->add_flag("--deterministic", cfg.deterministic, "single worker, no timings in output files");
  app->add_option("--target-count", cfg.target_count, "stop monodromy at this many solutions")
      ->check(CLI::PositiveNumber);
  app->add_option("--stall-limit", cfg.stall_limit, "monodromy loops without progress before stopping")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--dedup-tol", cfg.dedup_tol, "relative distance for identifying solutions")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--reality-tol", cfg.reality_tol, "imaginary-part tolerance for real solutions")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void check_invariants(RunConfig& cfg, const CLI::App* sub) {
  if (cfg.deterministic) {
    if (sub->count("--workers") > 0 && cfg.workers > 1)
      throw SchemaError("--deterministic requires --workers 1");
    cfg.workers = 1;
  }
}

DataCounts load_counts(const RunConfig& cfg) {
  if (cfg.u_arg.empty()) throw SchemaError("--u is required");
  DataCounts u = std::filesystem::exists(cfg.u_arg) ? read_counts_file(cfg.u_arg) : parse_inline_counts(cfg.u_arg);
  if (cfg.n != 0 && cfg.n != u.n)
    throw SchemaError("--n " + std::to_string(cfg.n) + " disagrees with the counts (n=" + std::to_string(u.n) + ")");
  if (u.n < 3 || u.n > GradientSystem::kMaxColumns + 2) throw SchemaError("n must lie in [3, 34]");
  return u;
}

std::string format_q(const std::vector<double>& q) {
  std::ostringstream os;
  os << std::setprecision(10) << "(";
  for (std::size_t k = 0; k < q.size(); ++k) os << (k ? ", " : "") << q[k];
  os << ")";
  return os.str();
}

void emit(const RunConfig& cfg, const json& doc) {
  const auto text = to_json_text(doc);
  if (cfg.out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(cfg.out_path, text);
  }
}

int cmd_solve(const RunConfig& cfg) {
  const DataCounts u = load_counts(cfg);
  for (const auto& [i, j] : zero_pairs(u))
    std::cerr << "warning: u_" << pair_key(i, j, u.n) << " = 0; data is not generic\n";
  const auto opts = cfg.pipeline();
  const auto r = run_pipeline(u, opts);
  if (!cfg.out_path.empty()) write_text_file(cfg.out_path, to_json_text(pipeline_to_json(r, !cfg.deterministic)));

  const auto degree = ml_degree(u.n);
  std::cout << r.set.size() << " critical points, " << r.set.count_real() << " real, " << r.fibers.size()
            << " implicit (ML degree " << degree << (static_cast<std::int64_t>(r.fibers.size()) == degree ? ", ok" : ", mismatch")
            << ")";
  if (r.mle) {
    std::cout << "; MLE q = " << format_q(r.mle->q.q);
    if (r.mle->tie()) std::cout << " [tie among " << r.mle->argmax_points.size() << " implicit points]";
  } else {
    std::cout << "; no real critical point";
  }
  std::cout << "\n";
  if (!cfg.deterministic)
    std::cerr << "time: monodromy " << r.timings.monodromy_ms << " ms, solve " << r.timings.solve_ms
              << " ms, analysis " << r.timings.analysis_ms << " ms\n";
  if (!r.complete(opts)) {
    std::cerr << "incomplete: " << r.set.size() << " of " << opts.target(u.n) << " solutions, " << r.set.lost_paths
              << " lost paths\n";
    return kExitIncomplete;
  }
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg) {
  if (cfg.n < 3 || cfg.n > 7) throw SchemaError("verify: --n must lie in [3, 7]");
  const DataCounts u = random_counts(cfg.n, cfg.max_count, cfg.seed);
  const auto r = run_pipeline(u, cfg.pipeline());
  const auto report = verify_counts(cfg.n, u, r.set);

  json doc;
  doc["n"] = cfg.n;
  doc["seed"] = cfg.seed;
  doc["u"] = counts_to_json(u)["u"];
  doc["passed"] = report.passed();
  doc["count"] = report.count;
  doc["count_real"] = report.count_real;
  doc["implicit_count"] = report.implicit_count;
  doc["regions_matched"] = report.regions_matched;
  doc["expected"] = {{"count", report.expected_count},
                     {"implicit_count", report.expected_implicit},
                     {"fiber_size", report.expected_fiber},
                     {"regions", report.regions_total}};
  doc["hessian_max"] = report.hessian_max;
  doc["top_eigenvalue"] = report.top_eigenvalue;
  doc["lost_paths"] = r.set.lost_paths;
  doc["failures"] = report.failures;
  emit(cfg, doc);
  std::cerr << (report.passed() ? "pass" : "FAIL") << ": (" << report.count << ", " << report.count_real << ", "
            << report.implicit_count << ", " << report.regions_matched << ")\n";
  return report.passed() ? kExitOk : kExitVerifyFailed;
}

Eigen::MatrixXd parse_rows(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) {
    std::vector<double> values;
    std::stringstream rs(row);
    std::string item;
    while (std::getline(rs, item, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(item, &used));
        if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw SchemaError("--rows: '" + item + "' is not a number");
      }
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty() || rows.front().empty()) throw SchemaError("--rows: empty matrix");
  Eigen::MatrixXd M(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw SchemaError("--rows: rows differ in length");
    for (std::size_t c = 0; c < rows[r].size(); ++c) M(r, c) = rows[r][c];
  }
  return M;
}

int cmd_sample(const RunConfig& cfg) {
  if (cfg.samples < 1) throw SchemaError("sample: --samples must be positive");
  Eigen::MatrixXd M;
  if (!cfg.rows.empty()) {
    M = parse_rows(cfg.rows);
  } else {
    if (cfg.n < 3) throw SchemaError("sample: give --rows or --n for a random subspace");
    std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);
    std::normal_distribution<double> g;
    M.resize(2, cfg.n);
    for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = g(rng);
  }
  if (M.rows() != 2) throw SchemaError("sample: the kernel must have rank 2 (two rows)");
  if (M.cols() < 3) throw SchemaError("sample: need at least three columns");
  const auto K = projection_from_rows(M);
  const auto u = sample_counts(K, cfg.samples, cfg.seed);
  for (const auto& [i, j] : zero_pairs(u))
    std::cerr << "warning: pair " << pair_key(i, j, u.n) << " was never drawn\n";
  emit(cfg, counts_to_json(u));
  return kExitOk;
}

int cmd_regions(const RunConfig& cfg) {
  if (cfg.n < 3 || cfg.n > 8) throw SchemaError("regions: --n must lie in [3, 8]");
  const auto packed = enumerate_regions_packed(cfg.n, cfg.seed);
  std::cout << packed.size() << "\n";
  if (!cfg.out_path.empty()) {
    json doc;
    doc["n"] = cfg.n;
    doc["count"] = packed.size();
    json all = json::array();
    for (auto bits : packed) all.push_back(unpack_sign_vector(cfg.n, bits).s);
    doc["sign_vectors"] = std::move(all);
    write_text_file(cfg.out_path, to_json_text(doc));
  }
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg) {
  if (cfg.n < 4 || cfg.n > 8) throw SchemaError("bench: --n must lie in [4, 8]");
  struct Row {
    int n;
    double seconds;
    std::size_t count, real, implicit;
    bool complete;
  };
  std::vector<Row> rows;
  const auto opts = cfg.pipeline();
  for (int n = 4; n <= cfg.n; ++n) {
    const auto u = random_counts(n, cfg.max_count, cfg.seed + n);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_pipeline(u, opts);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back({n, s, r.set.size(), r.set.count_real(), r.fibers.size(), r.complete(opts)});
    std::cerr << "n=" << n << " done in " << s << " s\n";
  }

  auto line = [&](const std::string& label, auto&& cell) {
    std::cout << std::left << std::setw(22) << label << std::right;
    for (const auto& r : rows) std::cout << std::setw(10) << cell(r);
    std::cout << "\n";
  };
  line("n", [](const Row& r) { return std::to_string(r.n); });
  line("Runtime (s)", [](const Row& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << r.seconds;
    return os.str();
  });
  line("Number of Solutions", [](const Row& r) { return std::to_string(r.count); });
  line("Real", [](const Row& r) { return std::to_string(r.real); });
  line("Implicit", [](const Row& r) { return std::to_string(r.implicit); });

  if (!cfg.out_path.empty()) {
    json doc = json::array();
    for (const auto& r : rows)
      doc.push_back({{"n", r.n},
                     {"runtime_s", cfg.deterministic ? json(nullptr) : json(r.seconds)},
                     {"count", r.count},
                     {"count_real", r.real},
                     {"implicit_count", r.implicit},
                     {"complete", r.complete}});
    write_text_file(cfg.out_path, to_json_text(doc));
  }
  bool all = true;
  for (const auto& r : rows) all = all && r.complete;
  return all ? kExitOk : kExitIncomplete;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical points of the rank-2 projection DPP likelihood"};
  app.require_subcommand(1);
  RunConfig cfg;
  cfg.workers = default_workers();

  auto* solve = app.add_subcommand("solve", "all critical points and the MLE for one data vector");
  solve->add_option("--u", cfg.u_arg, "counts file or inline comma-separated counts")->required();
  solve->add_option("--n", cfg.n, "number of items (checked against the counts)");
  add_common(solve, cfg, true);

  auto* verify = app.add_subcommand("verify", "check solution counts, reality and maximality on random data");
  verify->add_option("--n", cfg.n, "number of items")->required();
  verify->add_option("--max-count", cfg.max_count, "counts drawn uniformly from 1..max")->capture_default_str();
  add_common(verify, cfg, true);

  auto* sample = app.add_subcommand("sample", "draw a counts file from a rank-2 projection DPP");
  sample->add_option("--rows", cfg.rows, "2 x n matrix, rows separated by ';', entries by ','");
  sample->add_option("--n", cfg.n, "number of items for a random subspace");
  sample->add_option("--samples", cfg.samples, "number of draws")->required();
  add_common(sample, cfg, false);

  auto* regions = app.add_subcommand("regions", "enumerate sign vectors of the real regions");
  regions->add_option("--n", cfg.n, "number of items")->required();
  add_common(regions, cfg, false);

  auto* bench = app.add_subcommand("bench", "solution counts and runtimes for n = 4..N");
  bench->add_option("--n", cfg.n, "largest n")->required();
  bench->add_option("--max-count", cfg.max_count, "counts drawn uniformly from 1..max")->capture_default_str();
  add_common(bench, cfg, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    for (auto* sub : {solve, verify, bench})
      if (sub->parsed()) check_invariants(cfg, sub);
    if (solve->parsed()) return cmd_solve(cfg);
    if (verify->parsed()) return cmd_verify(cfg);
    if (sample->parsed()) return cmd_sample(cfg);
    if (regions->parsed()) return cmd_regions(cfg);
    if (bench->parsed()) return cmd_bench(cfg);
  } catch (const dppmle::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
