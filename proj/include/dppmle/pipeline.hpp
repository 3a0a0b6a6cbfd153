#pragma once

// End-to-end solve for one data vector: monodromy at a random complex
// parameter, homotopy to the data, reality and Hessian classification, MLE.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dppmle/analysis.hpp"
#include "dppmle/io.hpp"
#include "dppmle/monodromy.hpp"
#include "dppmle/system.hpp"
#include "dppmle/tracker.hpp"

namespace dppmle {

struct PipelineOptions {
  std::uint64_t seed = 42;
  int workers = 1;
  std::optional<std::int64_t> target_count;  // defaults to 2^(n-2) (n-1)!
  int stall_limit = 30;
  bool use_deck_symmetry = false;
  double implicit_tol = 1e-8;
  TrackerConfig tracker;

  std::int64_t target(int n) const { return target_count ? *target_count : parametric_critical_count(n); }
};

struct PipelineResult {
  DataCounts u;
  SolutionSet set;
  std::optional<MleResult> mle;  // empty when no solution is real
  std::vector<ImplicitFiber> fibers;
  Timings timings;

  bool complete(const PipelineOptions& opts) const {
    return set.complete && static_cast<std::int64_t>(set.size()) >= opts.target(u.n);
  }
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// Monodromy start system for n; reusable across data vectors of that size.
inline MonodromyResult prepare_start_system(int n, const PipelineOptions& opts) {
  const GradientSystem S(n);
  MonodromyOptions mo;
  mo.stall_limit = opts.stall_limit;
  mo.workers = opts.workers;
  mo.use_deck_symmetry = opts.use_deck_symmetry;
  return monodromy_solve(S, opts.seed, opts.target(n), opts.tracker, mo);
}

/// Solves for u starting from a prepared start system.
inline PipelineResult solve_counts(const DataCounts& u, const MonodromyResult& warm, const PipelineOptions& opts) {
  const GradientSystem S(u.n);
  PipelineResult out;
  out.u = u;
  auto t0 = std::chrono::steady_clock::now();
  SolveOptions so;
  so.workers = opts.workers;
  so.seed = opts.seed;
  out.set = solve_at(S, u.weights<double>(), warm, opts.tracker, so);
  out.set.loops = warm.set.loops;
  out.timings.solve_ms = detail::elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  classify_hessians(out.set, u);
  out.fibers = implicit_fibers(out.set, opts.implicit_tol);
  if (out.set.count_real() > 0) out.mle = select_mle(out.set, u);
  out.timings.analysis_ms = detail::elapsed_ms(t0);
  out.timings.total_ms = out.timings.solve_ms + out.timings.analysis_ms;
  return out;
}

inline PipelineResult run_pipeline(const DataCounts& u, const PipelineOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto warm = prepare_start_system(u.n, opts);
  const double mono_ms = detail::elapsed_ms(t0);
  auto out = solve_counts(u, warm, opts);
  out.timings.monodromy_ms = mono_ms;
  out.timings.total_ms += mono_ms;
  return out;
}

inline json pipeline_to_json(const PipelineResult& r, bool with_timings) {
  return result_to_json(r.u, r.set, r.mle, r.fibers.size(),
                        with_timings ? std::optional<Timings>(r.timings) : std::nullopt);
}

}  // namespace dppmle
