#pragma once

// Projection DPPs: the kernel P onto the row span of a d x n matrix, its
// distribution over d-subsets (principal minors of P), and synthetic data.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dppmle/errors.hpp"
#include "dppmle/model.hpp"
#include "dppmle/pairs.hpp"

namespace dppmle {

struct ProjectionKernel {
  int n = 0;
  int d = 0;
  Eigen::MatrixXd P;

  /// Throws KernelError unless P is a symmetric idempotent of trace d.
  void validate() const {
    if (P.rows() != n || P.cols() != n) throw KernelError("kernel has wrong shape");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw KernelError("kernel is not symmetric");
    if ((P * P - P).cwiseAbs().maxCoeff() > 1e-10) throw KernelError("kernel is not idempotent");
    if (std::abs(P.trace() - d) > 1e-10) throw KernelError("kernel trace differs from its rank");
  }
};

struct DppDistribution {
  int n = 0;
  int d = 0;
  std::vector<double> probs;  // lexicographic over d-subsets
};

/// Orthogonal projection onto the row span of M: P = M^T (M M^T)^{-1} M.
inline ProjectionKernel projection_from_rows(const Eigen::MatrixXd& M) {
  const int d = static_cast<int>(M.rows());
  const int n = static_cast<int>(M.cols());
  if (d < 1 || d > n) throw RankError("projection_from_rows: need 1 <= d <= n");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  if (!(s[d - 1] > 1e-10 * s[0])) throw RankError("projection_from_rows: rows are linearly dependent");
  const Eigen::MatrixXd gram = M * M.transpose();
  ProjectionKernel k{n, d, M.transpose() * gram.ldlt().solve(M)};
  k.P = 0.5 * (k.P + k.P.transpose());
  k.validate();
  return k;
}

inline DppDistribution dpp_distribution(const ProjectionKernel& K) {
  DppDistribution dist{K.n, K.d, {}};
  const auto subs = subsets(K.n, K.d);
  dist.probs.reserve(subs.size());
  Eigen::MatrixXd sub(K.d, K.d);
  for (const auto& I : subs) {
    for (int a = 0; a < K.d; ++a)
      for (int b = 0; b < K.d; ++b) sub(a, b) = K.P(I[a] - 1, I[b] - 1);
    double v = sub.determinant();
    if (v < -1e-10) throw KernelError("negative principal minor; not a projection kernel");
    dist.probs.push_back(std::max(v, 0.0));
  }
  return dist;
}

/// N i.i.d. draws from a rank-2 projection DPP, tallied per pair. Pairs that
/// are never drawn keep a zero count; such data is non-generic.
inline DataCounts sample_counts(const ProjectionKernel& K, std::int64_t N, std::uint64_t seed) {
  if (K.d != 2) throw KernelError("sample_counts: only rank-2 kernels are supported");
  if (N < 1) throw SchemaError("sample_counts: N must be positive");
  const auto dist = dpp_distribution(K);
  std::vector<double> cdf(dist.probs.size());
  std::partial_sum(dist.probs.begin(), dist.probs.end(), cdf.begin());
  // Last category with positive mass absorbs round-off at the top of the CDF.
  std::size_t last = 0;
  for (std::size_t k = 0; k < dist.probs.size(); ++k)
    if (dist.probs[k] > 0) last = k;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, cdf.back());
  std::vector<std::int64_t> u(dist.probs.size(), 0);
  for (std::int64_t s = 0; s < N; ++s) {
    const double r = unif(rng);
    auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    ++u[std::min(k, last)];
  }
  return DataCounts(K.n, std::move(u));
}

/// Each u_ij uniform on {1, ..., max}.
inline DataCounts random_counts(int n, std::int64_t max, std::uint64_t seed) {
  if (max < 1) throw SchemaError("random_counts: max must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> draw(1, max);
  std::vector<std::int64_t> u(num_pairs(n));
  for (auto& c : u) c = draw(rng);
  return DataCounts(n, std::move(u));
}

/// Pairs whose count is zero.
inline std::vector<std::pair<int, int>> zero_pairs(const DataCounts& u) {
  std::vector<std::pair<int, int>> out;
  const auto pairs = pair_list(u.n);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (u.u[k] == 0) out.push_back(pairs[k]);
  return out;
}

}  // namespace dppmle
