#pragma once

// Geometry of the gauge-fixed parameterization of sGr(2, n):
//
//   M_n = [ 1 0 x_3 ... x_n ]
//         [ 0 1 y_3 ... y_n ]
//
// Plücker minors, the quadric Q_n, the implicit and parametric
// log-likelihoods, and the analytic gradient. Everything is templated on the
// scalar so the solver can reuse the same formulas over the complex numbers.
//
// Flat vectors of unknowns are laid out as (x_3, ..., x_n, y_3, ..., y_n).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "dppmle/errors.hpp"
#include "dppmle/pairs.hpp"

namespace dppmle {

using cdouble = std::complex<double>;

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};
template <typename T>
inline constexpr bool is_complex_v = is_complex<T>::value;

/// The free 2 x (n-2) block of M_n. The identity prefix is implicit.
template <typename T>
struct MatrixParam {
  int n = 0;
  Vec<T> xs;  // x_3 .. x_n
  Vec<T> ys;  // y_3 .. y_n

  MatrixParam() = default;
  explicit MatrixParam(int n_) : n(n_), xs(Vec<T>::Zero(n_ - 2)), ys(Vec<T>::Zero(n_ - 2)) {
    if (n_ < 3) throw DomainError("MatrixParam: n must be at least 3");
  }
  MatrixParam(Vec<T> x, Vec<T> y) : n(static_cast<int>(x.size()) + 2), xs(std::move(x)), ys(std::move(y)) {
    if (xs.size() != ys.size() || n < 3) throw DomainError("MatrixParam: xs and ys must have equal length >= 1");
  }

  /// Builds from a flat (x..., y...) vector of length 2(n-2).
  static MatrixParam from_flat(const Vec<T>& z) {
    const auto m = z.size() / 2;
    return MatrixParam(Vec<T>(z.head(m)), Vec<T>(z.tail(m)));
  }

  Vec<T> flat() const {
    Vec<T> z(2 * (n - 2));
    z << xs, ys;
    return z;
  }

  int unknowns() const { return 2 * (n - 2); }

  // Column c (1-based) of the full matrix.
  T x(int c) const { return c == 1 ? T(1) : c == 2 ? T(0) : xs[c - 3]; }
  T y(int c) const { return c == 1 ? T(0) : c == 2 ? T(1) : ys[c - 3]; }
};

/// sum_k a_k b_k without complex conjugation.
template <typename A, typename B>
auto bilinear(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return (a.array() * b.array()).sum();
}

template <typename T>
struct PlueckerVector {
  int n = 0;
  Vec<T> p;  // lexicographic over pairs
  T q_n{};   // sum of squared minors

  T at(int i, int j) const { return p[pair_index(i, j, n)]; }
};

/// Observed counts u_ij over the pairs of [n]. Zero counts are allowed
/// (sampled data can miss a pair) but make the data non-generic.
struct DataCounts {
  int n = 0;
  std::vector<std::int64_t> u;

  DataCounts() = default;
  DataCounts(int n_, std::vector<std::int64_t> u_) : n(n_), u(std::move(u_)) {
    if (n < 2) throw SchemaError("DataCounts: n must be at least 2");
    if (static_cast<int>(u.size()) != num_pairs(n))
      throw SchemaError("DataCounts: expected " + std::to_string(num_pairs(n)) + " counts for n=" +
                        std::to_string(n) + ", got " + std::to_string(u.size()));
    for (auto c : u)
      if (c < 0) throw SchemaError("DataCounts: counts must be nonnegative");
  }

  std::int64_t at(int i, int j) const { return u[pair_index(i, j, n)]; }
  std::int64_t total() const { return std::accumulate(u.begin(), u.end(), std::int64_t{0}); }
  bool is_generic() const {
    return std::all_of(u.begin(), u.end(), [](auto c) { return c >= 1; });
  }

  template <typename T>
  Vec<T> weights() const {
    Vec<T> w(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) w[k] = T(static_cast<double>(u[k]));
    return w;
  }

  bool operator==(const DataCounts&) const = default;
};

template <typename T>
PlueckerVector<T> plucker(const MatrixParam<T>& M) {
  PlueckerVector<T> pv;
  pv.n = M.n;
  pv.p.resize(num_pairs(M.n));
  int k = 0;
  for (int i = 1; i <= M.n; ++i)
    for (int j = i + 1; j <= M.n; ++j) pv.p[k++] = M.x(i) * M.y(j) - M.y(i) * M.x(j);
  pv.q_n = T(0);
  for (Eigen::Index a = 0; a < pv.p.size(); ++a) pv.q_n += pv.p[a] * pv.p[a];
  return pv;
}

/// Membership in X_n: every minor and Q_n nonzero, relative to the size of p.
template <typename T>
bool in_domain(const MatrixParam<T>& M, double tol = 1e-12) {
  const auto pv = plucker(M);
  double norm = 0;
  for (Eigen::Index a = 0; a < pv.p.size(); ++a) {
    const double m = std::abs(pv.p[a]);
    if (!std::isfinite(m)) return false;
    norm += m * m;
  }
  norm = std::sqrt(norm);
  for (Eigen::Index a = 0; a < pv.p.size(); ++a)
    if (!(std::abs(pv.p[a]) > tol * norm)) return false;
  return std::abs(pv.q_n) > tol * norm * norm;
}

namespace detail {

template <typename T>
T log_square(const T& v) {
  if constexpr (is_complex_v<T>) {
    return std::log(v * v);
  } else {
    return 2.0 * std::log(std::abs(v));
  }
}

/// 1 / v without the overflow-guarded complex division of the runtime.
template <typename T>
T reciprocal(const T& v) {
  if constexpr (is_complex_v<T>) {
    return std::conj(v) / std::norm(v);
  } else {
    return T(1) / v;
  }
}

template <typename T>
void require_nonzero_minors(const PlueckerVector<T>& pv) {
  for (Eigen::Index a = 0; a < pv.p.size(); ++a)
    if (pv.p[a] == T(0)) throw DomainError("vanishing Plücker coordinate");
  if (pv.q_n == T(0)) throw DomainError("Q_n vanishes");
}

}  // namespace detail

/// Parametric log-likelihood sum_ij w_ij log p_ij^2 - (sum w) log Q_n.
/// For complex input the principal logarithm is used, so the value is only
/// meaningful modulo 2*pi*i.
template <typename T>
T log_likelihood_parametric(const MatrixParam<T>& M, const Vec<T>& w) {
  const auto pv = plucker(M);
  detail::require_nonzero_minors(pv);
  T total(0), value(0);
  for (Eigen::Index a = 0; a < w.size(); ++a) {
    total += w[a];
    if (w[a] != T(0) && a != 0) value += w[a] * detail::log_square(pv.p[a]);
  }
  // p_12 = 1 contributes nothing; Q_n > 0 on real points.
  return value - total * std::log(pv.q_n);
}

template <typename T>
T log_likelihood_parametric(const MatrixParam<T>& M, const DataCounts& u) {
  return log_likelihood_parametric(M, u.weights<T>());
}

/// Implicit log-likelihood sum u_ij log q_ij - (sum u) log(sum q).
inline double log_likelihood_implicit(std::span<const double> q, const DataCounts& u) {
  if (q.size() != u.u.size()) throw DomainError("log_likelihood_implicit: size mismatch");
  double sum_q = 0, value = 0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (!(q[k] > 0)) throw DomainError("log_likelihood_implicit: q must be positive");
    sum_q += q[k];
    if (u.u[k] != 0) value += static_cast<double>(u.u[k]) * std::log(q[k]);
  }
  return value - static_cast<double>(u.total()) * std::log(sum_q);
}

/// Analytic gradient of the parametric log-likelihood, laid out as
/// (dL/dx_3 .. dL/dx_n, dL/dy_3 .. dL/dy_n).
///
/// dL/dx_i = 2 u_2i / x_i + sum_{j>=3, j!=i} 2 u_ij (dp_ij/dx_i) / p_ij
///           - (sum u) (dQ_n/dx_i) / Q_n
/// with dQ_n/dx_i = 2 sum_j p_ij dp_ij/dx_i over every j, and symmetrically
/// for y_i. The map is linear in w.
template <typename T>
Vec<T> gradient(const MatrixParam<T>& M, const Vec<T>& w) {
  const int n = M.n;
  const int m = n - 2;
  const auto pv = plucker(M);
  detail::require_nonzero_minors(pv);
  const T total = w.sum();
  const T inv_q = detail::reciprocal(pv.q_n);
  Vec<T> g = Vec<T>::Zero(2 * m);
  for (int i = 3; i <= n; ++i) {
    const T xi = M.xs[i - 3], yi = M.ys[i - 3];
    // j = 1: p_1i = y_i.  j = 2: p_2i = -x_i.
    T gx = T(2) * w[pair_index(2, i, n)] * detail::reciprocal(xi);
    T gy = T(2) * w[pair_index(1, i, n)] * detail::reciprocal(yi);
    T dqx = T(2) * xi;
    T dqy = T(2) * yi;
    for (int j = 3; j <= n; ++j) {
      if (j == i) continue;
      const T xj = M.xs[j - 3], yj = M.ys[j - 3];
      // r = x_i y_j - y_i x_j equals p_ij for i < j and -p_ji otherwise.
      const T r = xi * yj - yi * xj;
      const T c = T(2) * w[pair_index(i, j, n)] * detail::reciprocal(r);
      gx += c * yj;
      gy -= c * xj;
      dqx += T(2) * r * yj;
      dqy -= T(2) * r * xj;
    }
    g[i - 3] = gx - total * dqx * inv_q;
    g[m + i - 3] = gy - total * dqy * inv_q;
  }
  return g;
}

template <typename T>
Vec<T> gradient(const MatrixParam<T>& M, const DataCounts& u) {
  return gradient(M, u.weights<T>());
}

/// Second partials by central differences of the analytic gradient with
/// step 1e-5 (1 + |M|_inf), symmetrized.
inline Eigen::MatrixXd hessian(const MatrixParam<double>& M, const Vec<double>& w) {
  const Vec<double> z = M.flat();
  const auto dim = z.size();
  const double h = 1e-5 * (1.0 + z.cwiseAbs().maxCoeff());
  Eigen::MatrixXd H(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    Vec<double> zp = z, zm = z;
    zp[c] += h;
    zm[c] -= h;
    H.col(c) = (gradient(MatrixParam<double>::from_flat(zp), w) -
                gradient(MatrixParam<double>::from_flat(zm), w)) /
               (2 * h);
  }
  return 0.5 * (H + H.transpose());
}

inline Eigen::MatrixXd hessian(const MatrixParam<double>& M, const DataCounts& u) {
  return hessian(M, u.weights<double>());
}

/// The symmetric 3x3 matrix whose quadratic form in (1, x_{n+1}, y_{n+1})
/// is Q_{n+1} for the matrix M_n extended by one column.
template <typename T>
Eigen::Matrix<T, 3, 3> extension_conic(const MatrixParam<T>& M) {
  const auto pv = plucker(M);
  const T sxx = T(1) + bilinear(M.xs, M.xs);
  const T syy = T(1) + bilinear(M.ys, M.ys);
  const T sxy = bilinear(M.xs, M.ys);
  Eigen::Matrix<T, 3, 3> C;
  C << pv.q_n, T(0), T(0), T(0), syy, -sxy, T(0), -sxy, sxx;
  return C;
}

/// Discriminant of Q_{n+1} as a conic in the new column; equals Q_n^2.
template <typename T>
T extension_discriminant(const MatrixParam<T>& M) {
  return extension_conic(M).determinant();
}

/// Appends a column (x, y) to M.
template <typename T>
MatrixParam<T> extend(const MatrixParam<T>& M, T x, T y) {
  Vec<T> xs(M.xs.size() + 1), ys(M.ys.size() + 1);
  xs << M.xs, x;
  ys << M.ys, y;
  return MatrixParam<T>(std::move(xs), std::move(ys));
}

/// One of the 2^(n-1) sign symmetries of the gauge-fixed parameterization:
/// negate the columns selected by `column_mask` (bit c for column c + 3),
/// then, if `flip_x`, negate the whole first row (and column 1 to restore the
/// identity prefix). Every such map preserves the squared minors.
template <typename T>
Vec<T> apply_deck(const Vec<T>& z, unsigned column_mask, bool flip_x) {
  const auto m = z.size() / 2;
  Vec<T> out = z;
  for (Eigen::Index c = 0; c < m; ++c) {
    if (column_mask >> c & 1u) {
      out[c] = -out[c];
      out[m + c] = -out[m + c];
    }
    if (flip_x) out[c] = -out[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// General rank d: the d x (n - d) free block B of [I_d | B].

/// All maximal minors of a d x n matrix, lexicographic over d-subsets.
inline Vec<double> maximal_minors(const Eigen::MatrixXd& full) {
  const int d = static_cast<int>(full.rows());
  const int n = static_cast<int>(full.cols());
  const auto subs = subsets(n, d);
  Vec<double> out(subs.size());
  Eigen::MatrixXd sub(d, d);
  for (std::size_t s = 0; s < subs.size(); ++s) {
    for (int c = 0; c < d; ++c) sub.col(c) = full.col(subs[s][c] - 1);
    out[s] = sub.determinant();
  }
  return out;
}

inline Eigen::MatrixXd gauge_fixed(const Eigen::MatrixXd& block) {
  const auto d = block.rows();
  Eigen::MatrixXd full(d, d + block.cols());
  full << Eigen::MatrixXd::Identity(d, d), block;
  return full;
}

/// sum_I u_I log det(M_I)^2 - (sum u) log sum_J det(M_J)^2 for M = [I_d | B].
inline double log_likelihood_general_d(const Eigen::MatrixXd& block, std::span<const double> u) {
  const Vec<double> minors = maximal_minors(gauge_fixed(block));
  if (static_cast<Eigen::Index>(u.size()) != minors.size())
    throw DomainError("log_likelihood_general_d: expected " + std::to_string(minors.size()) + " counts");
  double total = 0, value = 0;
  for (Eigen::Index s = 0; s < minors.size(); ++s) {
    if (minors[s] == 0.0) throw DomainError("vanishing maximal minor");
    total += u[s];
    if (u[s] != 0) value += u[s] * 2.0 * std::log(std::abs(minors[s]));
  }
  return value - total * std::log(minors.squaredNorm());
}

/// Central-difference gradient of log_likelihood_general_d over the block.
inline Eigen::MatrixXd gradient_general_d_fd(const Eigen::MatrixXd& block, std::span<const double> u,
                                             double h = 1e-6) {
  Eigen::MatrixXd g(block.rows(), block.cols());
  for (Eigen::Index r = 0; r < block.rows(); ++r)
    for (Eigen::Index c = 0; c < block.cols(); ++c) {
      Eigen::MatrixXd bp = block, bm = block;
      const double step = h * (1.0 + std::abs(block(r, c)));
      bp(r, c) += step;
      bm(r, c) -= step;
      g(r, c) = (log_likelihood_general_d(bp, u) - log_likelihood_general_d(bm, u)) / (2 * step);
    }
  return g;
}

}  // namespace dppmle
