#pragma once

// Populating the full solution set of the critical system: a seed pair
// (u0, z0) from the linearity of the residual in u, monodromy loops at u0,
// and a parameter homotopy from u0 to real data.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include "dppmle/errors.hpp"
#include "dppmle/model.hpp"
#include "dppmle/parallel.hpp"
#include "dppmle/system.hpp"
#include "dppmle/tracker.hpp"

namespace dppmle {

/// Relative sup-norm test: |a - b|_inf <= tol * max(|a|_inf, |b|_inf).
inline bool same_point(const CVec& a, const CVec& b, double tol) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Deduplicating store of points, indexed by the real part of the first
/// coordinate.
class PointIndex {
 public:
  explicit PointIndex(double tol) : tol_(tol) {}

  std::optional<std::size_t> find(const CVec& z) const {
    const double key = z[0].real();
    const double window = 2.0 * tol_ * z.cwiseAbs().maxCoeff() + 1e-300;
    for (auto it = by_key_.lower_bound(key - window); it != by_key_.end() && it->first <= key + window; ++it)
      if (same_point(points_[it->second], z, tol_)) return it->second;
    return std::nullopt;
  }

  /// Inserts z unless an equal point is present; returns true when inserted.
  bool insert(const CVec& z) {
    if (find(z)) return false;
    by_key_.emplace(z[0].real(), points_.size());
    points_.push_back(z);
    return true;
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<CVec>& points() const { return points_; }

 private:
  double tol_;
  std::vector<CVec> points_;
  std::multimap<double, std::size_t> by_key_;
};

struct SolutionSet {
  int n = 0;
  CVec params;  // the parameter vector u the solutions belong to
  std::vector<Solution> solutions;
  std::vector<int> conjugate;  // partner index under complex conjugation, -1 if unmatched
  int lost_paths = 0;
  int loops = 0;
  bool complete = false;

  std::size_t size() const { return solutions.size(); }
  std::size_t count_real() const {
    return static_cast<std::size_t>(
        std::count_if(solutions.begin(), solutions.end(), [](const Solution& s) { return s.is_real; }));
  }
};

struct SeedPair {
  CVec u0;
  CVec z0;
};

struct MonodromyOptions {
  int stall_limit = 30;
  int max_loops = 100000;
  int workers = 1;
  // Also insert the 2^(n-1) sign images of every new solution. Off by
  // default: every solution is then found by tracking.
  bool use_deck_symmetry = false;
};

struct SolveOptions {
  int workers = 1;
  std::uint64_t seed = 0;
};

namespace detail {

inline cdouble random_unimodular(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  return std::polar(1.0, phase(rng));
}

inline CVec random_complex_gaussian(Eigen::Index size, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVec v(size);
  for (auto& c : v) c = cdouble(g(rng), g(rng));
  return v;
}

/// Random point on the sphere of the given radius in C^size.
inline CVec random_on_sphere(Eigen::Index size, double radius, std::mt19937_64& rng) {
  CVec v = random_complex_gaussian(size, rng);
  return v * (radius / v.norm());
}

/// Lexicographic key on rounded coordinates; makes output independent of the
/// order in which paths finished.
inline std::vector<std::int64_t> sort_key(const CVec& z) {
  std::vector<std::int64_t> key;
  key.reserve(2 * z.size());
  for (const auto& c : z) {
    key.push_back(std::llround(c.real() * 1e8));
    key.push_back(std::llround(c.imag() * 1e8));
  }
  return key;
}

inline void sort_solutions(std::vector<Solution>& sols) {
  std::vector<std::pair<std::vector<std::int64_t>, std::size_t>> keys;
  keys.reserve(sols.size());
  for (std::size_t i = 0; i < sols.size(); ++i) keys.emplace_back(sort_key(sols[i].point), i);
  std::sort(keys.begin(), keys.end());
  std::vector<Solution> sorted;
  sorted.reserve(sols.size());
  for (const auto& [key, i] : keys) sorted.push_back(std::move(sols[i]));
  sols = std::move(sorted);
}

inline std::optional<CVec> track_chain(const GradientSystem& S, CVec z, const std::vector<CVec>& nodes,
                                       const TrackerConfig& cfg) {
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const auto r = track_path(S, z, nodes[k], nodes[k + 1], cfg);
    if (!r.ok()) return std::nullopt;
    z = r.point;
  }
  return z;
}

}  // namespace detail

/// Random (u0, z0) with F(z0, u0) = 0: z0 has coordinates on the annulus
/// 0.5 <= |z| <= 1.5 and u0 is a random vector in the null space of A(z0),
/// scaled to norm C(n, 2).
inline SeedPair seed_solution(const GradientSystem& S, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(0.5, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  SeedPair out;
  out.z0.resize(S.unknowns());
  for (auto& c : out.z0) c = std::polar(radius(rng), phase(rng));
  if (!in_domain(MatrixParam<cdouble>::from_flat(out.z0), 1e-8))
    throw SeedFailure("seed point lies too close to the boundary of X_n");

  const CMat A = S.coefficient_matrix(out.z0);
  const Eigen::JacobiSVD<CMat> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Eigen::Index rank = S.unknowns();
  if (!(sv[rank - 1] > 1e-8 * sv[0])) throw SeedFailure("coefficient matrix is rank deficient at the seed point");
  const CMat kernel = svd.matrixV().rightCols(S.params() - rank);
  out.u0 = kernel * detail::random_complex_gaussian(kernel.cols(), rng);
  out.u0 *= static_cast<double>(S.params()) / out.u0.norm();
  if (!((A * out.u0).norm() <= 1e-12)) throw SeedFailure("null-space residual above 1e-12");
  return out;
}

struct MonodromyResult {
  CVec u0;
  SolutionSet set;
};

/// Grows the solution set at a random complex u0 by tracking every known
/// solution around triangle loops u0 -> g1 -> g2 -> u0. Stops at
/// target_count solutions or after opts.stall_limit loops without progress;
/// `set.complete` tells which.
inline MonodromyResult monodromy_solve(const GradientSystem& S, std::uint64_t seed, std::int64_t target_count,
                                       const TrackerConfig& cfg, const MonodromyOptions& opts = {}) {
  cfg.validate();
  std::optional<SeedPair> seed_pair;
  for (std::uint64_t attempt = 0; attempt < 16 && !seed_pair; ++attempt) {
    try {
      seed_pair = seed_solution(S, seed + attempt * 0x9E3779B97F4A7C15ULL);
    } catch (const SeedFailure&) {
    }
  }
  if (!seed_pair) throw SeedFailure("no usable seed after 16 attempts");
  const CVec u0 = seed_pair->u0;
  const double radius = u0.norm();

  const auto refined = newton_refine(S, seed_pair->z0, u0, cfg);
  if (!refined.ok()) throw SeedFailure("seed point failed to refine");

  PointIndex known(cfg.dedup_tol);
  const unsigned masks = 1u << (S.n() - 2);
  auto add = [&](const CVec& z) {
    bool any = false;
    if (!opts.use_deck_symmetry) return known.insert(z);
    for (unsigned mask = 0; mask < masks; ++mask)
      for (bool fx : {false, true}) any = known.insert(apply_deck(z, mask, fx)) || any;
    return any;
  };
  add(refined.point);

  std::mt19937_64 rng(seed ^ 0xD1B54A32D192ED03ULL);
  int loops = 0, stall = 0;
  while (static_cast<std::int64_t>(known.size()) < target_count && stall < opts.stall_limit &&
         loops < opts.max_loops) {
    const std::vector<CVec> nodes = {u0, detail::random_on_sphere(u0.size(), radius, rng),
                                     detail::random_on_sphere(u0.size(), radius, rng), u0};
    const std::vector<CVec> starts = known.points();
    std::vector<std::optional<CVec>> ends(starts.size());
    parallel_for(starts.size(), opts.workers,
                 [&](std::size_t i) { ends[i] = detail::track_chain(S, starts[i], nodes, cfg); });
    bool progress = false;
    for (const auto& e : ends)
      if (e) progress = add(*e) || progress;
    ++loops;
    stall = progress ? 0 : stall + 1;
  }

  MonodromyResult out;
  out.u0 = u0;
  out.set.n = S.n();
  out.set.params = u0;
  out.set.loops = loops;
  out.set.complete = static_cast<std::int64_t>(known.size()) >= target_count;
  for (const auto& z : known.points()) {
    Solution s;
    const auto r = newton_refine(S, z, u0, cfg);
    s.point = r.point;
    s.residual = r.residual;
    out.set.solutions.push_back(std::move(s));
  }
  detail::sort_solutions(out.set.solutions);
  out.set.conjugate.assign(out.set.solutions.size(), -1);
  return out;
}

/// Marks real solutions (after a real-restricted Newton polish) and fills the
/// log-likelihood of real points. `weights` are the real data the solutions
/// belong to.
inline void classify_reality(const GradientSystem& S, SolutionSet& set, const Vec<double>& weights,
                             const TrackerConfig& cfg) {
  const CVec u = weights.cast<cdouble>();
  for (auto& s : set.solutions) {
    s.is_real = false;
    s.loglik = std::numeric_limits<double>::quiet_NaN();
    bool near_real = true;
    for (const auto& c : s.point) near_real = near_real && std::abs(c.imag()) < 1e-4 * (1.0 + std::abs(c.real()));
    if (!near_real) continue;
    const auto r = newton_refine(S, CVec(s.point.real().cast<cdouble>()), u, cfg);
    if (!r.ok()) continue;
    bool within = true;
    for (Eigen::Index k = 0; k < s.point.size(); ++k)
      within = within && std::abs(s.point[k].imag()) <= cfg.reality_tol * (1.0 + std::abs(s.point[k].real()));
    if (!within || !same_point(r.point, s.point, cfg.dedup_tol)) continue;
    s.point = r.point.real().cast<cdouble>();
    s.residual = r.residual;
    s.is_real = true;
    s.loglik = log_likelihood_parametric(MatrixParam<double>::from_flat(s.point.real()), weights);
  }
}

/// Fills set.conjugate: each point's partner under complex conjugation.
inline void pair_conjugates(SolutionSet& set, double tol) {
  set.conjugate.assign(set.solutions.size(), -1);
  PointIndex index(tol);
  for (const auto& s : set.solutions) index.insert(s.point);
  for (std::size_t i = 0; i < set.solutions.size(); ++i) {
    if (set.solutions[i].is_real) {
      set.conjugate[i] = static_cast<int>(i);
      continue;
    }
    if (auto j = index.find(set.solutions[i].point.conjugate())) set.conjugate[i] = static_cast<int>(*j);
  }
}

/// Moves every start solution from warm.u0 to the real data `weights` along
/// u0 -> gamma * (u0 + u)/2 -> u, with a random unimodular gamma. A failed
/// path is retried once with a fresh gamma, then counted as lost.
inline SolutionSet solve_at(const GradientSystem& S, const Vec<double>& weights, const MonodromyResult& warm,
                            const TrackerConfig& cfg, const SolveOptions& opts = {}) {
  cfg.validate();
  if (weights.size() != S.params()) throw DomainError("solve_at: parameter vector has the wrong length");
  // Solutions depend on u only up to scale.
  const CVec target = weights.cast<cdouble>() * (warm.u0.norm() / weights.norm());
  std::mt19937_64 rng(opts.seed ^ 0x8CB92BA72F3D8DD7ULL);
  const cdouble gamma1 = detail::random_unimodular(rng);
  const cdouble gamma2 = detail::random_unimodular(rng);
  const CVec mid = 0.5 * (warm.u0 + target);
  const std::vector<CVec> route1 = {warm.u0, gamma1 * mid, target};
  const std::vector<CVec> route2 = {warm.u0, gamma2 * mid, target};

  const auto& starts = warm.set.solutions;
  std::vector<std::optional<CVec>> ends(starts.size());
  parallel_for(starts.size(), opts.workers, [&](std::size_t i) {
    ends[i] = detail::track_chain(S, starts[i].point, route1, cfg);
    if (!ends[i]) ends[i] = detail::track_chain(S, starts[i].point, route2, cfg);
  });

  SolutionSet out;
  out.n = S.n();
  out.params = weights.cast<cdouble>();
  PointIndex index(cfg.dedup_tol);
  for (const auto& e : ends) {
    if (!e) {
      ++out.lost_paths;
      continue;
    }
    if (!index.insert(*e)) continue;
    Solution s;
    s.point = *e;
    s.residual = detail::safe_scaled_residual(S, *e, target);
    out.solutions.push_back(std::move(s));
  }
  classify_reality(S, out, weights, cfg);
  detail::sort_solutions(out.solutions);
  pair_conjugates(out, cfg.dedup_tol);
  out.complete = warm.set.complete && out.lost_paths == 0 && out.solutions.size() == starts.size();
  return out;
}

}  // namespace dppmle
