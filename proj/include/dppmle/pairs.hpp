#pragma once

// Index bookkeeping for subsets of [n] = {1, ..., n}. Every vector indexed by
// pairs or d-subsets uses lexicographic order: (1,2), (1,3), ..., (n-1,n).

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dppmle {

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline std::int64_t factorial(int n) {
  std::int64_t r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline int num_pairs(int n) { return static_cast<int>(binomial(n, 2)); }

/// Position of the pair (i, j), 1 <= i < j <= n, in lexicographic order.
inline int pair_index(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  return (i - 1) * (2 * n - i) / 2 + (j - i - 1);
}

inline std::vector<std::pair<int, int>> pair_list(int n) {
  std::vector<std::pair<int, int>> out;
  out.reserve(num_pairs(n));
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) out.emplace_back(i, j);
  return out;
}

/// File-format key of a pair: "ij" when n < 10, "i,j" otherwise.
inline std::string pair_key(int i, int j, int n) {
  if (n < 10) return std::to_string(i) + std::to_string(j);
  return std::to_string(i) + "," + std::to_string(j);
}

/// All d-subsets of [n] (1-based), lexicographic.
inline std::vector<std::vector<int>> subsets(int n, int d) {
  std::vector<std::vector<int>> out;
  if (d < 0 || d > n) return out;
  std::vector<int> cur(d);
  for (int k = 0; k < d; ++k) cur[k] = k + 1;
  while (true) {
    out.push_back(cur);
    int k = d - 1;
    while (k >= 0 && cur[k] == n - d + k + 1) --k;
    if (k < 0) break;
    ++cur[k];
    for (int m = k + 1; m < d; ++m) cur[m] = cur[m - 1] + 1;
  }
  return out;
}

/// Number of critical points of the parametric likelihood, 2^(n-2) (n-1)!.
inline std::int64_t parametric_critical_count(int n) {
  return (std::int64_t{1} << (n - 2)) * factorial(n - 1);
}

/// ML degree of the squared Grassmannian sGr(2, n), (n-1)!/2.
inline std::int64_t ml_degree(int n) { return factorial(n - 1) / 2; }

/// Size of a fiber of the gauge-fixed parameterization, 2^(n-1).
inline std::int64_t deck_group_order(int n) { return std::int64_t{1} << (n - 1); }

}  // namespace dppmle
