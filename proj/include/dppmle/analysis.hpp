#pragma once

// Statistical reading of a solution set: implicit (squared Plücker) images,
// the MLE, Hessian signatures, and the combinatorics of sign vectors that
// certify the critical-point count.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "dppmle/errors.hpp"
#include "dppmle/model.hpp"
#include "dppmle/monodromy.hpp"
#include "dppmle/pairs.hpp"
#include "dppmle/parallel.hpp"
#include "dppmle/tracker.hpp"

namespace dppmle {

/// A point of sGr(2, n) in probability coordinates: q_ij = p_ij^2 / Q_n.
struct ImplicitPoint {
  int n = 0;
  std::vector<double> q;  // lexicographic over pairs, sums to 1
};

inline double tv_distance(const ImplicitPoint& a, const ImplicitPoint& b) {
  double d = 0;
  for (std::size_t k = 0; k < a.q.size(); ++k) d += std::abs(a.q[k] - b.q[k]);
  return 0.5 * d;
}

inline ImplicitPoint to_implicit(const MatrixParam<double>& M) {
  const auto pv = plucker(M);
  ImplicitPoint out{M.n, std::vector<double>(pv.p.size())};
  for (Eigen::Index k = 0; k < pv.p.size(); ++k) out.q[k] = pv.p[k] * pv.p[k] / pv.q_n;
  return out;
}

inline ImplicitPoint to_implicit(const Solution& sol) {
  if (!sol.is_real) throw DomainError("to_implicit: solution is not real");
  return to_implicit(MatrixParam<double>::from_flat(sol.point.real()));
}

/// Signs of every minor except p_12 = 1, lexicographic over the remaining
/// pairs.
struct SignVector {
  int n = 0;
  std::vector<std::int8_t> s;

  /// Bit k set when entry k is negative.
  std::uint64_t packed() const {
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < s.size(); ++k)
      if (s[k] < 0) bits |= std::uint64_t{1} << k;
    return bits;
  }

  bool operator==(const SignVector&) const = default;
};

inline SignVector sign_vector(const MatrixParam<double>& M) {
  const auto pv = plucker(M);
  SignVector out{M.n, {}};
  out.s.reserve(pv.p.size() - 1);
  for (Eigen::Index k = 1; k < pv.p.size(); ++k) {
    if (pv.p[k] == 0.0) throw DomainError("sign_vector: vanishing minor");
    out.s.push_back(pv.p[k] > 0 ? 1 : -1);
  }
  return out;
}

inline SignVector unpack_sign_vector(int n, std::uint64_t bits) {
  SignVector out{n, std::vector<std::int8_t>(num_pairs(n) - 1)};
  for (std::size_t k = 0; k < out.s.size(); ++k) out.s[k] = (bits >> k & 1u) ? -1 : 1;
  return out;
}

// ---------------------------------------------------------------------------
// Region enumeration

namespace detail {

// Packed sign vector of a matrix given by explicit columns 3..n.
inline std::uint64_t packed_signs(int n, const std::vector<double>& xs, const std::vector<double>& ys) {
  std::uint64_t bits = 0;
  int k = 0;
  auto put = [&](double v) {
    if (v < 0) bits |= std::uint64_t{1} << k;
    ++k;
  };
  const int m = n - 2;
  for (int a = 0; a < m; ++a) put(ys[a]);   // p_1i = y_i
  for (int a = 0; a < m; ++a) put(-xs[a]);  // p_2i = -x_i
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) put(xs[a] * ys[b] - ys[a] * xs[b]);
  return bits;
}

// Reorders bits from the (p_1*, p_2*, p_ij) layout above into lexicographic
// pair order without p_12.
inline std::uint64_t to_lexicographic(int n, std::uint64_t bits) {
  std::uint64_t out = 0;
  int k = 0;
  auto move = [&](int i, int j) {
    if (bits >> k & 1u) out |= std::uint64_t{1} << (pair_index(i, j, n) - 1);
    ++k;
  };
  for (int i = 3; i <= n; ++i) move(1, i);
  for (int i = 3; i <= n; ++i) move(2, i);
  for (int i = 3; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) move(i, j);
  return out;
}

inline bool generic_base(int n, const std::vector<double>& xs, const std::vector<double>& ys) {
  const MatrixParam<double> M(Eigen::Map<const Vec<double>>(xs.data(), n - 2),
                              Eigen::Map<const Vec<double>>(ys.data(), n - 2));
  if (!in_domain(M, 1e-9)) return false;
  // Pairwise slopes must also be separated for the minors to be robustly signed.
  const auto pv = plucker(M);
  return pv.p.cwiseAbs().minCoeff() > 1e-9;
}

}  // namespace detail

/// All sign vectors realized by real points of X_n, built from the base
/// matrices with columns 3..k in the second quadrant and k+1..n in the first
/// quadrant (k = 2..n), under every permutation and sign flip of columns
/// 3..n. The result is sorted by packed value and has 2^(n-2) (n-1)! entries.
inline std::vector<std::uint64_t> enumerate_regions_packed(int n, std::uint64_t seed = 2024, int workers = 1) {
  if (n < 3 || n > 8) throw std::invalid_argument("enumerate_regions: n must lie in [3, 8]");
  const int m = n - 2;
  const auto expected = parametric_critical_count(n);
  const auto per_k = (std::int64_t{1} << m) * factorial(m);

  for (int attempt = 0; attempt < 8; ++attempt) {
    std::mt19937_64 rng(seed + 7919ULL * attempt);
    std::uniform_real_distribution<double> pos(0.25, 4.0);
    std::vector<double> base_x(m), base_y(m);
    for (int a = 0; a < m; ++a) {
      base_x[a] = pos(rng);
      base_y[a] = pos(rng);
    }

    std::vector<std::vector<std::uint64_t>> per_block(n - 1);
    bool degenerate = false;
    parallel_for(static_cast<std::size_t>(n - 1), workers, [&](std::size_t block) {
      const int k = static_cast<int>(block) + 2;
      std::vector<double> bx = base_x, by = base_y;
      for (int i = 3; i <= k; ++i) bx[i - 3] = -bx[i - 3];
      if (!detail::generic_base(n, bx, by)) {
        degenerate = true;
        return;
      }
      std::vector<int> perm(m);
      std::iota(perm.begin(), perm.end(), 0);
      std::vector<double> xs(m), ys(m);
      auto& out = per_block[block];
      out.reserve(per_k);
      do {
        for (unsigned mask = 0; mask < (1u << m); ++mask) {
          for (int c = 0; c < m; ++c) {
            const double sgn = (mask >> c & 1u) ? -1.0 : 1.0;
            xs[c] = sgn * bx[perm[c]];
            ys[c] = sgn * by[perm[c]];
          }
          out.push_back(detail::to_lexicographic(n, detail::packed_signs(n, xs, ys)));
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    });
    if (degenerate) continue;

    std::vector<std::uint64_t> all;
    all.reserve(expected);
    bool ok = true;
    for (auto& block : per_block) {
      std::sort(block.begin(), block.end());
      ok = ok && std::adjacent_find(block.begin(), block.end()) == block.end() &&
           static_cast<std::int64_t>(block.size()) == per_k;
      all.insert(all.end(), block.begin(), block.end());
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    if (ok && static_cast<std::int64_t>(all.size()) == expected) return all;
  }
  throw DegenerateInstance("enumerate_regions: positive instantiation kept landing on a degenerate matrix");
}

inline std::vector<SignVector> enumerate_regions(int n, std::uint64_t seed = 2024, int workers = 1) {
  const auto packed = enumerate_regions_packed(n, seed, workers);
  std::vector<SignVector> out;
  out.reserve(packed.size());
  for (auto bits : packed) out.push_back(unpack_sign_vector(n, bits));
  return out;
}

// ---------------------------------------------------------------------------
// Implicit fibers and the MLE

struct ImplicitFiber {
  ImplicitPoint point;
  std::vector<std::size_t> members;  // indices into the solution set
};

/// Groups real solutions by implicit image at total-variation distance tol.
inline std::vector<ImplicitFiber> implicit_fibers(const SolutionSet& set, double tol = 1e-8) {
  std::vector<ImplicitFiber> fibers;
  for (std::size_t i = 0; i < set.solutions.size(); ++i) {
    if (!set.solutions[i].is_real) continue;
    const auto q = to_implicit(set.solutions[i]);
    auto it = std::find_if(fibers.begin(), fibers.end(), [&](const ImplicitFiber& f) { return tv_distance(f.point, q) <= tol; });
    if (it == fibers.end()) {
      fibers.push_back({q, {i}});
    } else {
      it->members.push_back(i);
    }
  }
  return fibers;
}

struct MleResult {
  ImplicitPoint q;
  Solution solution;
  double loglik = 0;
  std::vector<std::size_t> argmax;          // every real solution within the tie tolerance
  std::vector<ImplicitPoint> argmax_points;  // their distinct implicit images
  bool tie() const { return argmax_points.size() > 1; }
};

/// Highest parametric log-likelihood over the real solutions. Values within
/// 1e-9 (relative) of the best are all reported; sign images of one point
/// always tie, so ties are judged on distinct implicit images.
inline MleResult select_mle(const SolutionSet& set, const DataCounts& u) {
  const Vec<double> w = u.weights<double>();
  std::vector<std::pair<double, std::size_t>> values;
  for (std::size_t i = 0; i < set.solutions.size(); ++i) {
    const auto& s = set.solutions[i];
    if (!s.is_real) continue;
    values.emplace_back(log_likelihood_parametric(MatrixParam<double>::from_flat(s.point.real()), w), i);
  }
  if (values.empty()) throw NoRealSolution("select_mle: no real critical point");
  const double best = std::max_element(values.begin(), values.end())->first;
  const double tol = 1e-9 * std::max(1.0, std::abs(best));

  MleResult out;
  out.loglik = best;
  for (const auto& [v, i] : values) {
    if (v < best - tol) continue;
    out.argmax.push_back(i);
    const auto q = to_implicit(set.solutions[i]);
    const bool seen = std::any_of(out.argmax_points.begin(), out.argmax_points.end(),
                                  [&](const ImplicitPoint& p) { return tv_distance(p, q) <= 1e-8; });
    if (!seen) out.argmax_points.push_back(q);
  }
  out.solution = set.solutions[out.argmax.front()];
  out.q = out.argmax_points.front();
  return out;
}

/// Largest eigenvalue of the finite-difference Hessian at a real point.
inline Eigen::VectorXd hessian_eigenvalues(const Solution& s, const Vec<double>& w) {
  const auto H = hessian(MatrixParam<double>::from_flat(s.point.real()), w);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H, Eigen::EigenvaluesOnly).eigenvalues();
}

inline HessianClass classify_eigenvalues(const Eigen::VectorXd& eig, double zero_tol = 1e-7) {
  if ((eig.array().abs() <= zero_tol).any()) return HessianClass::unknown;
  if ((eig.array() < 0).all()) return HessianClass::max;
  if ((eig.array() > 0).all()) return HessianClass::min;
  return HessianClass::saddle;
}

/// Sets hessian_class on every real solution; complex ones stay unknown.
inline void classify_hessians(SolutionSet& set, const DataCounts& u, double zero_tol = 1e-7) {
  const Vec<double> w = u.weights<double>();
  for (auto& s : set.solutions) {
    s.hessian_class = HessianClass::unknown;
    if (!s.is_real) continue;
    s.hessian_class = classify_eigenvalues(hessian_eigenvalues(s, w), zero_tol);
  }
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyReport {
  int n = 0;
  std::int64_t expected_count = 0;
  std::int64_t expected_implicit = 0;
  std::int64_t expected_fiber = 0;
  std::size_t count = 0;
  std::size_t count_real = 0;
  std::size_t implicit_count = 0;
  std::size_t regions_matched = 0;
  std::size_t regions_total = 0;
  std::size_t hessian_max = 0;
  double top_eigenvalue = -std::numeric_limits<double>::infinity();  // most positive over all solutions
  std::vector<std::size_t> fiber_sizes;
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
};

/// Checks a solution set for generic real data against the expected
/// critical-point structure: (a) 2^(n-2)(n-1)! solutions, (b) all real,
/// (c) (n-1)!/2 implicit images, each with 2^(n-1) preimages, (d) sign
/// vectors distinct and equal to the enumerated regions, (e) every Hessian
/// negative definite.
inline VerifyReport verify_counts(int n, const DataCounts& u, const SolutionSet& set, double implicit_tol = 1e-8) {
  VerifyReport r;
  r.n = n;
  r.expected_count = parametric_critical_count(n);
  r.expected_implicit = ml_degree(n);
  r.expected_fiber = deck_group_order(n);
  r.count = set.size();
  r.count_real = set.count_real();
  auto fail = [&](const std::string& msg) { r.failures.push_back(msg); };

  if (static_cast<std::int64_t>(r.count) != r.expected_count)
    fail("(a) expected " + std::to_string(r.expected_count) + " critical points, found " + std::to_string(r.count));
  if (r.count_real != r.count) {
    std::ostringstream os;
    os << "(b) " << (r.count - r.count_real) << " non-real solutions; first at index ";
    for (std::size_t i = 0; i < set.size(); ++i)
      if (!set.solutions[i].is_real) {
        os << i;
        break;
      }
    fail(os.str());
  }

  const auto fibers = implicit_fibers(set, implicit_tol);
  r.implicit_count = fibers.size();
  for (const auto& f : fibers) r.fiber_sizes.push_back(f.members.size());
  if (static_cast<std::int64_t>(r.implicit_count) != r.expected_implicit)
    fail("(c) expected " + std::to_string(r.expected_implicit) + " implicit points, found " +
         std::to_string(r.implicit_count));
  for (std::size_t f = 0; f < fibers.size(); ++f)
    if (static_cast<std::int64_t>(fibers[f].members.size()) != r.expected_fiber)
      fail("(c) fiber " + std::to_string(f) + " has " + std::to_string(fibers[f].members.size()) +
           " preimages, expected " + std::to_string(r.expected_fiber));

  if (n <= 8) {
    const auto regions = enumerate_regions_packed(n);
    r.regions_total = regions.size();
    std::vector<std::uint64_t> seen;
    for (const auto& s : set.solutions) {
      if (!s.is_real) continue;
      try {
        seen.push_back(sign_vector(MatrixParam<double>::from_flat(s.point.real())).packed());
      } catch (const DomainError&) {
        fail("(d) real solution with a vanishing minor");
      }
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) fail("(d) two real solutions share a sign vector");
    std::vector<std::uint64_t> common;
    std::set_intersection(seen.begin(), seen.end(), regions.begin(), regions.end(), std::back_inserter(common));
    r.regions_matched = common.size();
    if (common.size() != regions.size() || seen.size() != regions.size())
      fail("(d) sign vectors cover " + std::to_string(common.size()) + " of " + std::to_string(regions.size()) +
           " regions");
  }

  const Vec<double> w = u.weights<double>();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& s = set.solutions[i];
    if (!s.is_real) continue;
    const auto eig = hessian_eigenvalues(s, w);
    r.top_eigenvalue = std::max(r.top_eigenvalue, eig.maxCoeff());
    if (classify_eigenvalues(eig) == HessianClass::max) {
      ++r.hessian_max;
    } else {
      fail("(e) solution " + std::to_string(i) + " is not a strict local maximum (top eigenvalue " +
           std::to_string(eig.maxCoeff()) + ")");
    }
  }
  return r;
}

}  // namespace dppmle
