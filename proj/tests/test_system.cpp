#include <gtest/gtest.h>

#include <random>

#include "dppmle/system.hpp"

using namespace dppmle;

namespace {

CVec random_point(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.4, 1.6), phase(-3.0, 3.0);
  CVec z(2 * (n - 2));
  for (auto& c : z) c = std::polar(mag(rng), phase(rng));
  return z;
}

CVec random_params(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVec u(num_pairs(n));
  for (auto& c : u) c = cdouble(g(rng), g(rng));
  return u;
}

}  // namespace

TEST(GradientSystem, RejectsOutOfRangeN) {
  EXPECT_THROW(GradientSystem(2), DomainError);
  EXPECT_THROW(GradientSystem(35), DomainError);
  EXPECT_NO_THROW(GradientSystem(34));
}

TEST(GradientSystem, Dimensions) {
  const GradientSystem S(6);
  EXPECT_EQ(S.unknowns(), 8);
  EXPECT_EQ(S.params(), 15);
}

TEST(GradientSystem, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int n = 3; n <= 7; ++n) {
    const GradientSystem S(n);
    for (int trial = 0; trial < 10; ++trial) {
      const CVec z = random_point(n, rng), u = random_params(n, rng);
      const CMat J = S.jacobian(z, u);
      const double h = 1e-6;
      for (int c = 0; c < S.unknowns(); ++c) {
        CVec zp = z, zm = z;
        zp[c] += h;
        zm[c] -= h;
        const CVec col = (S.residual(zp, u) - S.residual(zm, u)) / (2 * h);
        EXPECT_LE((col - J.col(c)).norm(), 1e-6 * (1.0 + J.col(c).norm())) << "n=" << n << " col=" << c;
      }
    }
  }
}

TEST(GradientSystem, CoefficientMatrixReproducesResidual) {
  std::mt19937_64 rng(12);
  for (int n = 3; n <= 8; ++n) {
    const GradientSystem S(n);
    const CVec z = random_point(n, rng), u = random_params(n, rng);
    const CVec F = S.residual(z, u);
    EXPECT_LE((S.coefficient_matrix(z) * u - F).norm(), 1e-12 * (1.0 + F.norm()));
  }
}

TEST(GradientSystem, LinearInParameters) {
  std::mt19937_64 rng(13);
  const GradientSystem S(5);
  const CVec z = random_point(5, rng), u = random_params(5, rng), v = random_params(5, rng);
  const cdouble a(0.3, -1.2), b(2.0, 0.5);
  const CVec lhs = S.residual(z, a * u + b * v);
  const CVec rhs = a * S.residual(z, u) + b * S.residual(z, v);
  EXPECT_LE((lhs - rhs).norm(), 1e-12 * (1.0 + lhs.norm()));
}

TEST(GradientSystem, QGradientMatchesCauchyBinet) {
  std::mt19937_64 rng(14);
  const GradientSystem S(6);
  const CVec z = random_point(6, rng);
  const auto M = MatrixParam<cdouble>::from_flat(z);
  const CVec dq = GradientSystem::q_gradient(M);
  auto Q = [](const CVec& w) { return plucker(MatrixParam<cdouble>::from_flat(w)).q_n; };
  for (Eigen::Index c = 0; c < z.size(); ++c) {
    CVec zp = z, zm = z;
    zp[c] += 1e-6;
    zm[c] -= 1e-6;
    EXPECT_LE(std::abs((Q(zp) - Q(zm)) / 2e-6 - dq[c]), 1e-6 * (1.0 + std::abs(dq[c])));
  }
}

TEST(GradientSystem, ScaledResidualVanishesAtKnownCriticalPoint) {
  const GradientSystem S(3);
  CVec z(2);
  z << std::sqrt(3.0), std::sqrt(2.0);
  CVec u(3);
  u << 1, 2, 3;
  EXPECT_LE(S.scaled_residual(z, u), 1e-15);
  z[0] *= 1.01;
  EXPECT_GT(S.scaled_residual(z, u), 1e-4);
}

TEST(GradientSystem, PoleIsDetected) {
  const GradientSystem S(3);
  CVec z(2);
  z << 0.0, 1.0;
  CVec u(3);
  u << 1, 2, 3;
  EXPECT_THROW(S.residual(z, u), DomainError);
  EXPECT_FALSE(S.jacobian(z, u).allFinite());
}
