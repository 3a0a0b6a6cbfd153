#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dppmle/model.hpp"

using namespace dppmle;

namespace {

// Independent oracle: explicit 2 x n matrix and 2x2 determinants of column pairs.
Eigen::MatrixXd full_matrix(const MatrixParam<double>& M) {
  Eigen::MatrixXd F(2, M.n);
  F.col(0) << 1, 0;
  F.col(1) << 0, 1;
  for (int c = 3; c <= M.n; ++c) F.col(c - 1) << M.xs[c - 3], M.ys[c - 3];
  return F;
}

std::vector<double> minors_oracle(const MatrixParam<double>& M) {
  const auto F = full_matrix(M);
  std::vector<double> out;
  for (int i = 0; i < M.n; ++i)
    for (int j = i + 1; j < M.n; ++j) {
      Eigen::Matrix2d S;
      S << F.col(i), F.col(j);
      out.push_back(S.determinant());
    }
  return out;
}

MatrixParam<double> random_param(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.3, 2.0);
  std::bernoulli_distribution sign(0.5);
  MatrixParam<double> M(n);
  for (int a = 0; a < n - 2; ++a) {
    M.xs[a] = mag(rng) * (sign(rng) ? 1 : -1);
    M.ys[a] = mag(rng) * (sign(rng) ? 1 : -1);
  }
  return M;
}

Vec<double> random_weights(int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(1, 1000);
  Vec<double> w(num_pairs(n));
  for (auto& v : w) v = d(rng);
  return w;
}

double fd_relative_error(const MatrixParam<double>& M, const Vec<double>& w) {
  const Vec<double> g = gradient(M, w);
  const Vec<double> z = M.flat();
  const double h = 1e-6;
  Vec<double> fd(z.size());
  for (Eigen::Index c = 0; c < z.size(); ++c) {
    Vec<double> zp = z, zm = z;
    const double step = h * std::max(1.0, std::abs(z[c]));
    zp[c] += step;
    zm[c] -= step;
    fd[c] = (log_likelihood_parametric(MatrixParam<double>::from_flat(zp), w) -
             log_likelihood_parametric(MatrixParam<double>::from_flat(zm), w)) /
            (2 * step);
  }
  return (g - fd).norm() / std::max(1.0, g.norm());
}

}  // namespace

TEST(Pairs, LexicographicIndexing) {
  const int n = 6;
  const auto pairs = pair_list(n);
  ASSERT_EQ(static_cast<int>(pairs.size()), num_pairs(n));
  for (std::size_t k = 0; k < pairs.size(); ++k)
    EXPECT_EQ(pair_index(pairs[k].first, pairs[k].second, n), static_cast<int>(k));
  EXPECT_EQ(pair_key(3, 4, 5), "34");
  EXPECT_EQ(pair_key(3, 10, 11), "3,10");
  EXPECT_EQ(subsets(5, 3).size(), 10u);
  EXPECT_EQ(parametric_critical_count(6), 1920);
  EXPECT_EQ(ml_degree(6), 60);
  EXPECT_EQ(ml_degree(3), 1);
}

TEST(Plucker, FourColumnExample) {
  MatrixParam<double> M(Vec<double>{{1, 2}}, Vec<double>{{1, 3}});
  const auto pv = plucker(M);
  const std::vector<double> expected = {1, 1, 3, -1, -2, 1};
  ASSERT_EQ(pv.p.size(), 6);
  for (int k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(pv.p[k], expected[k]);
  EXPECT_DOUBLE_EQ(pv.q_n, 17.0);
  const auto oracle = minors_oracle(M);
  for (int k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(pv.p[k], oracle[k]);
}

TEST(Plucker, ThreeColumnExamples) {
  const auto zero = plucker(MatrixParam<double>(Vec<double>{{0.0}}, Vec<double>{{0.0}}));
  EXPECT_EQ(zero.p, (Vec<double>{{1, 0, 0}}));
  EXPECT_DOUBLE_EQ(zero.q_n, 1.0);
  const auto ones = plucker(MatrixParam<double>(Vec<double>{{1.0}}, Vec<double>{{1.0}}));
  EXPECT_EQ(ones.p, (Vec<double>{{1, 1, -1}}));
  EXPECT_DOUBLE_EQ(ones.q_n, 3.0);
}

TEST(Plucker, GaugeAndPositivityOnRandomPoints) {
  std::mt19937_64 rng(7);
  for (int n = 3; n <= 8; ++n)
    for (int trial = 0; trial < 20; ++trial) {
      const auto M = random_param(n, rng);
      const auto pv = plucker(M);
      EXPECT_EQ(pv.at(1, 2), 1.0);
      EXPECT_GE(pv.q_n, 1.0);
      const auto oracle = minors_oracle(M);
      for (std::size_t k = 0; k < oracle.size(); ++k) EXPECT_NEAR(pv.p[k], oracle[k], 1e-14);
      // Cauchy-Binet
      const auto F = full_matrix(M);
      EXPECT_NEAR(pv.q_n, (F * F.transpose()).determinant(), 1e-11 * pv.q_n);
    }
}

TEST(InDomain, Examples) {
  EXPECT_TRUE(in_domain(MatrixParam<double>(Vec<double>{{1.0}}, Vec<double>{{1.0}})));
  EXPECT_FALSE(in_domain(MatrixParam<double>(Vec<double>{{0.0}}, Vec<double>{{1.0}})));
  const MatrixParam<cdouble> C(Vec<cdouble>{{cdouble(0, 1)}}, Vec<cdouble>{{1.0}});
  const auto pv = plucker(C);
  EXPECT_EQ(pv.p[2], cdouble(0, -1));
  EXPECT_EQ(pv.q_n, cdouble(1, 0));
  EXPECT_TRUE(in_domain(C));
  // Q_3 = 1 + 1 + (i sqrt 2)^2 = 0.
  EXPECT_FALSE(in_domain(MatrixParam<cdouble>(Vec<cdouble>{{cdouble(0, std::sqrt(2.0))}}, Vec<cdouble>{{1.0}})));
}

TEST(LogLikelihood, ParametricHandValue) {
  const MatrixParam<double> M(Vec<double>{{1.0}}, Vec<double>{{1.0}});
  const DataCounts u(3, {1, 1, 1});
  EXPECT_NEAR(log_likelihood_parametric(M, u), -3 * std::log(3.0), 1e-14);
  EXPECT_NEAR(log_likelihood_parametric(M, u), -3.29584, 1e-5);
}

TEST(LogLikelihood, ClosedFormCriticalPointIsMaximal) {
  const DataCounts u(3, {4, 9, 25});
  const double x = std::sqrt(25.0 / 4.0), y = std::sqrt(9.0 / 4.0);
  const double best = log_likelihood_parametric(MatrixParam<double>(Vec<double>{{x}}, Vec<double>{{y}}), u);
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      EXPECT_NEAR(log_likelihood_parametric(MatrixParam<double>(Vec<double>{{sx * x}}, Vec<double>{{sy * y}}), u),
                  best, 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (int t = 0; t < 200; ++t) {
    const MatrixParam<double> P(Vec<double>{{x + d(rng)}}, Vec<double>{{y + d(rng)}});
    EXPECT_LE(log_likelihood_parametric(P, u), best + 1e-12);
  }
}

TEST(LogLikelihood, ColumnSignFlipInvariance) {
  std::mt19937_64 rng(11);
  for (int n = 3; n <= 7; ++n) {
    const auto M = random_param(n, rng);
    const auto w = random_weights(n, rng);
    const double base = log_likelihood_parametric(M, w);
    const Vec<double> g = gradient(M, w);
    for (int c = 0; c < n - 2; ++c) {
      auto F = M;
      F.xs[c] = -F.xs[c];
      F.ys[c] = -F.ys[c];
      EXPECT_NEAR(log_likelihood_parametric(F, w), base, 1e-10 * std::abs(base));
      const Vec<double> gf = gradient(F, w);
      EXPECT_NEAR(gf[c], -g[c], 1e-9 * (1 + std::abs(g[c])));
      EXPECT_NEAR(gf[n - 2 + c], -g[n - 2 + c], 1e-9 * (1 + std::abs(g[n - 2 + c])));
    }
  }
}

TEST(LogLikelihood, DomainErrors) {
  const DataCounts u(3, {1, 1, 1});
  EXPECT_THROW(log_likelihood_parametric(MatrixParam<double>(Vec<double>{{0.0}}, Vec<double>{{1.0}}), u),
               DomainError);
  EXPECT_THROW(gradient(MatrixParam<double>(Vec<double>{{1.0}}, Vec<double>{{0.0}}), u), DomainError);
  const std::vector<double> bad = {1.0, 0.0, 2.0};
  EXPECT_THROW(log_likelihood_implicit(bad, u), DomainError);
}

TEST(LogLikelihood, ImplicitValuesAndScaleInvariance) {
  const DataCounts ones(3, {1, 1, 1});
  const std::vector<double> q1 = {1, 1, 1};
  EXPECT_NEAR(log_likelihood_implicit(q1, ones), -3 * std::log(3.0), 1e-14);

  const DataCounts u(3, {5, 7, 11});
  const std::vector<double> q = {1, 2, 3}, q2 = {2, 4, 6};
  EXPECT_NEAR(log_likelihood_implicit(q2, u) - log_likelihood_implicit(q, u), 0.0, 1e-10);

  // On the full simplex (n = 3) the maximizer is u itself.
  const std::vector<double> qu = {5, 7, 11};
  const double best = log_likelihood_implicit(qu, u);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.1, 20);
  for (int t = 0; t < 500; ++t) {
    const std::vector<double> r = {d(rng), d(rng), d(rng)};
    EXPECT_LE(log_likelihood_implicit(r, u), best + 1e-12);
  }
}

TEST(LogLikelihood, ParametricMatchesImplicitOfSquaredMinors) {
  std::mt19937_64 rng(13);
  for (int n = 3; n <= 7; ++n) {
    const auto M = random_param(n, rng);
    const auto w = random_weights(n, rng);
    std::vector<std::int64_t> counts(w.size());
    for (Eigen::Index k = 0; k < w.size(); ++k) counts[k] = static_cast<std::int64_t>(w[k]);
    const DataCounts u(n, counts);
    const auto pv = plucker(M);
    std::vector<double> q(pv.p.size());
    for (Eigen::Index k = 0; k < pv.p.size(); ++k) q[k] = pv.p[k] * pv.p[k];
    const double a = log_likelihood_parametric(M, u);
    EXPECT_NEAR(a, log_likelihood_implicit(q, u), 1e-10 * std::abs(a));
  }
}

TEST(Gradient, ThreeColumnClosedForm) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(0.2, 3.0);
  const Vec<double> w{{2.0, 5.0, 7.0}};
  for (int t = 0; t < 20; ++t) {
    const double x = d(rng), y = d(rng);
    const auto g = gradient(MatrixParam<double>(Vec<double>{{x}}, Vec<double>{{y}}), w);
    const double Q = 1 + x * x + y * y;
    EXPECT_NEAR(g[0], 2 * 7.0 / x - 2 * 14.0 * x / Q, 1e-12);
    EXPECT_NEAR(g[1], 2 * 5.0 / y - 2 * 14.0 * y / Q, 1e-12);
  }
  const auto g0 = gradient(MatrixParam<double>(Vec<double>{{std::sqrt(3.0)}}, Vec<double>{{std::sqrt(2.0)}}),
                           DataCounts(3, {1, 2, 3}));
  EXPECT_NEAR(g0.norm(), 0.0, 1e-14);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(19);
  for (int n = 3; n <= 7; ++n)
    for (int t = 0; t < 100; ++t) {
      const auto M = random_param(n, rng);
      if (!in_domain(M, 1e-3)) continue;
      EXPECT_LE(fd_relative_error(M, random_weights(n, rng)), 1e-6) << "n=" << n;
    }
}

TEST(Gradient, ComplexAgreesWithRealOnRealPoints) {
  std::mt19937_64 rng(23);
  const auto M = random_param(6, rng);
  const auto w = random_weights(6, rng);
  const MatrixParam<cdouble> C(M.xs.cast<cdouble>(), M.ys.cast<cdouble>());
  const Vec<cdouble> gc = gradient(C, Vec<cdouble>(w.cast<cdouble>()));
  const Vec<double> gr = gradient(M, w);
  EXPECT_LE((gc.real() - gr).norm(), 1e-12 * gr.norm());
  EXPECT_LE(gc.imag().norm(), 1e-14);
}

TEST(Hessian, NegativeDefiniteAtSymmetricMaximizer) {
  const MatrixParam<double> M(Vec<double>{{1.0}}, Vec<double>{{1.0}});
  const auto H = hessian(M, DataCounts(3, {1, 1, 1}));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  EXPECT_LT(es.eigenvalues().maxCoeff(), 0.0);
  // Analytic n = 3 Hessian at x = y = 1, u = 1: d2L/dx2 = -2 - 6(Q - 2x^2)/Q^2 = -8/3.
  EXPECT_NEAR(H(0, 0), -8.0 / 3.0, 1e-7);
  EXPECT_NEAR(H(0, 1), 6.0 * 2.0 / 9.0, 1e-7);
}

TEST(Hessian, SymmetricByConstruction) {
  std::mt19937_64 rng(29);
  for (int n = 3; n <= 6; ++n) {
    const auto M = random_param(n, rng);
    const auto H = hessian(M, random_weights(n, rng));
    EXPECT_LE((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Discriminant, EqualsQnSquared) {
  std::mt19937_64 rng(31);
  for (int n = 3; n <= 6; ++n)
    for (int t = 0; t < 100; ++t) {
      const auto M = random_param(n, rng);
      const double q = plucker(M).q_n;
      EXPECT_LE(std::abs(extension_discriminant(M) - q * q) / (q * q), 1e-10);
      // The conic really is Q_{n+1} restricted to the new column.
      std::uniform_real_distribution<double> d(-2, 2);
      const double x = d(rng), y = d(rng);
      const Eigen::Vector3d v(1, x, y);
      EXPECT_NEAR(v.dot(extension_conic(M) * v), plucker(extend(M, x, y)).q_n, 1e-10 * q);
    }
}

TEST(GeneralD, ReducesToRankTwo) {
  std::mt19937_64 rng(37);
  for (int n = 3; n <= 7; ++n) {
    const auto M = random_param(n, rng);
    const auto w = random_weights(n, rng);
    Eigen::MatrixXd block(2, n - 2);
    block.row(0) = M.xs.transpose();
    block.row(1) = M.ys.transpose();
    const std::vector<double> u(w.data(), w.data() + w.size());
    const double a = log_likelihood_parametric(M, w);
    EXPECT_NEAR(log_likelihood_general_d(block, u), a, 1e-10 * std::abs(a));
  }
}

TEST(GeneralD, RankThreeHandValueAndSignFlips) {
  const Eigen::MatrixXd block = Eigen::MatrixXd::Ones(3, 1);
  const std::vector<double> u(4, 1.0);
  EXPECT_NEAR(log_likelihood_general_d(block, u), -4 * std::log(4.0), 1e-13);

  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  Eigen::MatrixXd B(3, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) B(r, c) = g(rng);
  std::vector<double> w(10);
  for (auto& v : w) v = 1 + std::floor(std::abs(g(rng)) * 100);
  const double base = log_likelihood_general_d(B, w);
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd F = B;
    F.col(c) = -F.col(c);
    EXPECT_NEAR(log_likelihood_general_d(F, w), base, 1e-10 * std::abs(base));
  }
  Eigen::MatrixXd Z = B;
  Z.col(0).setZero();
  EXPECT_THROW(log_likelihood_general_d(Z, w), DomainError);
}
