#pragma once

// The square critical system grad L_u(M_n) = 0 over the complex numbers, in
// the 2(n-2) unknowns z = (x_3..x_n, y_3..y_n) with the C(n,2) counts u as
// complex parameters. The residual is linear in u:
//
//   F(z, u) = A(z) u,   column (i,j) of A = grad(log p_ij^2 - log Q_n).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "dppmle/model.hpp"
#include "dppmle/pairs.hpp"

namespace dppmle {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

class GradientSystem {
 public:
  static constexpr int kMaxColumns = 32;

  explicit GradientSystem(int n) : n_(n) {
    if (n < 3 || n > kMaxColumns + 2) throw DomainError("GradientSystem: n must lie in [3, 34]");
  }

  int n() const { return n_; }
  int unknowns() const { return 2 * (n_ - 2); }
  int params() const { return num_pairs(n_); }

  CVec residual(const CVec& z, const CVec& u) const {
    return gradient(MatrixParam<cdouble>::from_flat(z), u);
  }

  /// dF/dz, analytic. At a pole the entries are non-finite; no exception.
  CMat jacobian(const CVec& z, const CVec& u) const {
    CMat J(unknowns(), unknowns());
    fill_jacobian(z, u, J);
    return J;
  }

  void evaluate(const CVec& z, const CVec& u, CVec& F, CMat& J) const {
    F = residual(z, u);
    J.resize(unknowns(), unknowns());
    fill_jacobian(z, u, J);
  }

  /// A(z), the unknowns x params matrix with F(z, u) = A(z) u.
  CMat coefficient_matrix(const CVec& z) const {
    const int m = n_ - 2;
    const auto M = MatrixParam<cdouble>::from_flat(z);
    const auto pv = plucker(M);
    detail::require_nonzero_minors(pv);
    const CVec dq = q_gradient(M) / pv.q_n;
    CMat A(unknowns(), params());
    for (int k = 0; k < params(); ++k) A.col(k) = -dq;
    for (int i = 3; i <= n_; ++i) {
      const int a = i - 3;
      const cdouble xi = M.xs[a], yi = M.ys[a];
      A(m + a, pair_index(1, i, n_)) += 2.0 / yi;
      A(a, pair_index(2, i, n_)) += 2.0 / xi;
      for (int j = i + 1; j <= n_; ++j) {
        const int b = j - 3;
        const cdouble xj = M.xs[b], yj = M.ys[b];
        const cdouble r = xi * yj - yi * xj;
        const int k = pair_index(i, j, n_);
        A(a, k) += 2.0 * yj / r;
        A(m + a, k) -= 2.0 * xj / r;
        A(b, k) -= 2.0 * yi / r;
        A(m + b, k) += 2.0 * xi / r;
      }
    }
    return A;
  }

  /// Componentwise backward error: max_e |F_e| / sum_k |A_ek| |u_k|.
  double scaled_residual(const CVec& z, const CVec& u) const {
    const CMat A = coefficient_matrix(z);
    const CVec F = A * u;
    const Eigen::VectorXd scale = A.cwiseAbs() * u.cwiseAbs();
    double r = 0;
    for (Eigen::Index e = 0; e < F.size(); ++e) {
      const double s = scale[e] > 0 ? scale[e] : 1.0;
      r = std::max(r, std::abs(F[e]) / s);
    }
    return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
  }

  /// Gradient of Q_n via Cauchy-Binet, Q_n = (1 + |x|^2)(1 + |y|^2) - (x.y)^2.
  static CVec q_gradient(const MatrixParam<cdouble>& M) {
    const auto m = M.xs.size();
    const cdouble A = 1.0 + bilinear(M.xs, M.xs);
    const cdouble B = 1.0 + bilinear(M.ys, M.ys);
    const cdouble C = bilinear(M.xs, M.ys);
    CVec g(2 * m);
    g.head(m) = 2.0 * (B * M.xs - C * M.ys);
    g.tail(m) = 2.0 * (A * M.ys - C * M.xs);
    return g;
  }

 private:
  void fill_jacobian(const CVec& z, const CVec& u, CMat& J) const {
    const int m = n_ - 2;
    const Eigen::Map<const CVec> xs(z.data(), m), ys(z.data() + m, m);
    const cdouble A = 1.0 + bilinear(xs, xs);
    const cdouble B = 1.0 + bilinear(ys, ys);
    const cdouble C = bilinear(xs, ys);
    const cdouble inv_q = detail::reciprocal(A * B - C * C);
    const cdouble s = -u.sum() * inv_q;  // -(sum u) / Q
    const cdouble s2 = -s * inv_q;       // (sum u) / Q^2

    // -S (Hess Q / Q - grad Q grad Q^T / Q^2), with Q = A B - C^2.
    Eigen::Matrix<cdouble, Eigen::Dynamic, 1, 0, 2 * kMaxColumns, 1> dq(2 * m);
    dq.head(m) = 2.0 * (B * xs - C * ys);
    dq.tail(m) = 2.0 * (A * ys - C * xs);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        const cdouble xy = 4.0 * xs[a] * ys[b] - 2.0 * ys[a] * xs[b] - (a == b ? 2.0 * C : cdouble(0));
        J(a, b) = s * (-2.0 * ys[a] * ys[b] + (a == b ? 2.0 * B : cdouble(0))) + s2 * dq[a] * dq[b];
        J(m + a, m + b) = s * (-2.0 * xs[a] * xs[b] + (a == b ? 2.0 * A : cdouble(0))) + s2 * dq[m + a] * dq[m + b];
        J(a, m + b) = s * xy + s2 * dq[a] * dq[m + b];
        J(m + b, a) = J(a, m + b);
      }

    for (int i = 3; i <= n_; ++i) {
      const int a = i - 3;
      const cdouble xi = xs[a], yi = ys[a];
      const cdouble ix = detail::reciprocal(xi), iy = detail::reciprocal(yi);
      J(a, a) -= 2.0 * u[pair_index(2, i, n_)] * ix * ix;
      J(m + a, m + a) -= 2.0 * u[pair_index(1, i, n_)] * iy * iy;
      for (int j = 3; j <= n_; ++j) {
        if (j == i) continue;
        const int b = j - 3;
        const cdouble xj = xs[b], yj = ys[b];
        const cdouble ir = detail::reciprocal(xi * yj - yi * xj);
        const cdouble w = 2.0 * u[pair_index(i, j, n_)] * ir * ir;
        J(a, a) -= w * yj * yj;
        J(a, m + a) += w * xj * yj;
        J(m + a, a) += w * xj * yj;
        J(m + a, m + a) -= w * xj * xj;
        J(a, b) += w * yi * yj;
        J(a, m + b) -= w * yi * xj;
        J(m + a, b) -= w * xi * yj;
        J(m + a, m + b) += w * xi * xj;
      }
    }
  }

  int n_;
};

}  // namespace dppmle
