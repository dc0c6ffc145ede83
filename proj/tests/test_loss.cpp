#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "cibhash/loss.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cibhash;

namespace {

double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double kl_direct(double p, double g) { return p * std::log(p / g) + (1.0 - p) * std::log((1.0 - p) / (1.0 - g)); }

MatrixD soft_codes(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  return testutil::random_matrix(n, d, rng, 0.01, 0.99);
}

}  // namespace

TEST(CosineSim, BasicCases) {
  const std::vector<double> a{1.0, 2.0, -0.5};
  EXPECT_NEAR(cosine_sim(a, a), 1.0, 1e-15);
  const std::vector<double> x{1.0, 0.0};
  const std::vector<double> y{0.0, 1.0};
  EXPECT_EQ(cosine_sim(x, y), 0.0);
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_EQ(cosine_sim(zero, x), 0.0);
  EXPECT_EQ(cosine_sim(zero, zero), 0.0);
}

TEST(NtXent, AllIdenticalCodesGiveLn3) {
  MatrixD b = MatrixD::Ones(2, 3);
  EXPECT_NEAR(ntxent(b, b, 0.3).loss, std::log(3.0), 1e-12);
  EXPECT_NEAR(ntxent(b, b, 0.3).loss, 1.098612, 1e-6);
}

TEST(NtXent, OrthogonalPairsClosedForm) {
  MatrixD b(2, 2);
  b << 1, 0, 0, 1;
  const double expected = -std::log(std::exp(2.0) / (std::exp(2.0) + 2.0));
  EXPECT_NEAR(ntxent(b, b, 0.5).loss, expected, 1e-12);
  // the closed form is 0.2395448; the commonly quoted 0.239547 is a rounding slip
  EXPECT_NEAR(ntxent(b, b, 0.5).loss, 0.239547, 5e-6);
}

TEST(NtXent, AllEqualSimilarityIsLogTwoNMinusOne) {
  for (Eigen::Index n : {2, 3, 8, 64}) {
    MatrixD b = MatrixD::Ones(n, 5);
    EXPECT_NEAR(ntxent(b, b, 0.7).loss, std::log(2.0 * static_cast<double>(n) - 1.0), 1e-10) << n;
  }
}

TEST(NtXent, MatchesDirectFormula) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 7;
    const MatrixD b1 = soft_codes(n, 9, rng);
    const MatrixD b2 = soft_codes(n, 9, rng);
    EXPECT_NEAR(ntxent(b1, b2, 0.3).loss, oracle::ntxent_direct(b1, b2, 0.3), 1e-12);
  }
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const MatrixD b1 = soft_codes(5, 7, rng);
  const MatrixD b2 = soft_codes(5, 7, rng);
  const double tau = 0.3;
  const NtXentResult r = ntxent(b1, b2, tau);
  const double h = 1e-6;
  double worst = 0.0;
  for (int which = 0; which < 2; ++which) {
    for (Eigen::Index i = 0; i < b1.size(); ++i) {
      MatrixD p1 = b1, m1 = b1, p2 = b2, m2 = b2;
      if (which == 0) {
        p1.data()[i] += h;
        m1.data()[i] -= h;
      } else {
        p2.data()[i] += h;
        m2.data()[i] -= h;
      }
      const double fd = (oracle::ntxent_direct(p1, p2, tau) - oracle::ntxent_direct(m1, m2, tau)) / (2 * h);
      const double an = which == 0 ? r.grad_b1.data()[i] : r.grad_b2.data()[i];
      worst = std::max(worst, rel_err(an, fd));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(NtXent, RejectsSingleItemBatch) {
  MatrixD b = MatrixD::Ones(1, 4);
  EXPECT_THROW(ntxent(b, b, 0.3), Error);
}

TEST(NtXent, ZeroRowsStayFinite) {
  MatrixD b = MatrixD::Zero(3, 4);
  const NtXentResult r = ntxent(b, b, 0.3);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_TRUE(r.grad_b1.allFinite());
  EXPECT_NEAR(r.loss, std::log(5.0), 1e-12);
}

TEST(NtXent, DecreasesWhenPositiveSimilarityIncreases) {
  // b2 row 0 rotates from e3 toward e1 in the e1-e3 plane. Its similarity to
  // e2 stays 0, so only the positive similarity of pair 0 changes.
  MatrixD b1(2, 3);
  b1 << 1, 0, 0, 0, 1, 0;
  double prev = std::numeric_limits<double>::infinity();
  for (double angle = 1.5; angle >= 0.0; angle -= 0.25) {
    MatrixD b2 = b1;
    b2.row(0) << std::cos(angle), 0, std::sin(angle);
    const double loss = ntxent(b1, b2, 0.3).loss;
    EXPECT_LT(loss, prev) << angle;
    prev = loss;
  }
}

TEST(BernoulliKl, ScalarExample) {
  CodeProbabilities p{MatrixD::Constant(1, 1, 0.8)};
  CodeProbabilities g{MatrixD::Constant(1, 1, 0.5)};
  const KlResult r = bernoulli_kl(p, g);
  EXPECT_NEAR(r.value(0), kl_direct(0.8, 0.5), 1e-15);
  EXPECT_NEAR(r.value(0), 0.192745, 1e-6);
}

TEST(BernoulliKl, MatchesDirectSum) {
  std::mt19937_64 rng(5);
  const MatrixD p = soft_codes(6, 13, rng);
  const MatrixD g = soft_codes(6, 13, rng);
  const KlResult r = bernoulli_kl({p}, {g});
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    long double acc = 0.0L;
    for (Eigen::Index d = 0; d < p.cols(); ++d) acc += kl_direct(p(i, d), g(i, d));
    EXPECT_NEAR(r.value(i), static_cast<double>(acc), 1e-9);
  }
}

TEST(BernoulliKl, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const MatrixD p = soft_codes(3, 5, rng);
  const MatrixD g = soft_codes(3, 5, rng);
  const KlResult r = bernoulli_kl({p}, {g});
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = p.data()[i];
    const double gg = g.data()[i];
    const double fd = (kl_direct(v + h, gg) - kl_direct(v - h, gg)) / (2 * h);
    EXPECT_LE(rel_err(r.grad_p.data()[i], fd), 1e-6);
  }
}

TEST(BernoulliKl, NonNegativeOnRandomPairs) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(kProbFloor, 1.0 - kProbFloor);
  MatrixD p(100000, 1), g(100000, 1);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    p(i, 0) = u(rng);
    g(i, 0) = u(rng);
  }
  const KlResult r = bernoulli_kl({p}, {g});
  EXPECT_GE(r.value.minCoeff(), 0.0);
  const KlResult same = bernoulli_kl({p}, {p});
  EXPECT_LE(same.value.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CibLoss, BetaZeroIsPureContrastive) {
  std::mt19937_64 rng(1);
  const MatrixD b1 = soft_codes(4, 8, rng), b2 = soft_codes(4, 8, rng);
  const MatrixD p1 = soft_codes(4, 8, rng), p2 = soft_codes(4, 8, rng);
  LossConfig cfg;
  cfg.beta = 0.0;
  const LossOutput out = cib_loss(b1, b2, {p1}, {p2}, cfg);
  EXPECT_EQ(out.total, out.contrastive);
  EXPECT_EQ(out.contrastive, ntxent(b1, b2, cfg.temperature).loss);
  EXPECT_GT(out.kl, 0.0);
}

TEST(CibLoss, EqualDistributionsHaveZeroKl) {
  std::mt19937_64 rng(2);
  const MatrixD b1 = soft_codes(4, 8, rng), b2 = soft_codes(4, 8, rng);
  const MatrixD p = soft_codes(4, 8, rng);
  LossConfig cfg;
  cfg.beta = 3.0;
  const LossOutput out = cib_loss(b1, b2, {p}, {p}, cfg);
  EXPECT_EQ(out.kl, 0.0);
  EXPECT_EQ(out.total, out.contrastive);
}

TEST(CibLoss, KlIsSymmetricAverageOverItems) {
  std::mt19937_64 rng(4);
  const MatrixD b = soft_codes(3, 4, rng);
  const MatrixD p1 = soft_codes(3, 4, rng), p2 = soft_codes(3, 4, rng);
  const LossOutput out = cib_loss(b, b, {p1}, {p2}, LossConfig{});
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p1.size(); ++i)
    acc += kl_direct(p1.data()[i], p2.data()[i]) + kl_direct(p2.data()[i], p1.data()[i]);
  EXPECT_NEAR(out.kl, acc / 6.0, 1e-12);
}

TEST(CibLoss, CompositeGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const MatrixD b1 = soft_codes(4, 6, rng), b2 = soft_codes(4, 6, rng);
  const MatrixD p1 = soft_codes(4, 6, rng), p2 = soft_codes(4, 6, rng);
  LossConfig cfg;
  cfg.beta = 0.7;
  const LossOutput out = cib_loss(b1, b2, {p1}, {p2}, cfg);
  const double n2 = 2.0 * static_cast<double>(b1.rows());

  // The KL target side is a constant: perturbing p1 only moves KL(p1 || p2).
  auto total = [&](const MatrixD& x1, const MatrixD& x2, const MatrixD& q1, const MatrixD& q2) {
    double kl = 0.0;
    for (Eigen::Index i = 0; i < q1.size(); ++i)
      kl += kl_direct(q1.data()[i], p2.data()[i]) + kl_direct(q2.data()[i], p1.data()[i]);
    return oracle::ntxent_direct(x1, x2, cfg.temperature) + cfg.beta * kl / n2;
  };
  const double h = 1e-6;
  double worst = 0.0;
  for (int which = 0; which < 4; ++which) {
    for (Eigen::Index i = 0; i < b1.size(); ++i) {
      MatrixD a[4] = {b1, b2, p1, p2};
      MatrixD m[4] = {b1, b2, p1, p2};
      a[which].data()[i] += h;
      m[which].data()[i] -= h;
      const double fd = (total(a[0], a[1], a[2], a[3]) - total(m[0], m[1], m[2], m[3])) / (2 * h);
      const MatrixD* g[4] = {&out.grad_b1, &out.grad_b2, &out.grad_p1, &out.grad_p2};
      const double an = g[which]->data()[i];
      worst = std::max(worst, rel_err(an, fd));
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(CibLossProperty, InvariantUnderPairPermutation) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 6;
    const MatrixD b1 = soft_codes(n, 5, rng), b2 = soft_codes(n, 5, rng);
    const MatrixD p1 = soft_codes(n, 5, rng), p2 = soft_codes(n, 5, rng);
    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixD q[4] = {b1, b2, p1, p2};
    const MatrixD* src[4] = {&b1, &b2, &p1, &p2};
    for (int k = 0; k < 4; ++k)
      for (Eigen::Index i = 0; i < n; ++i) q[k].row(i) = src[k]->row(perm[i]);
    LossConfig cfg;
    cfg.beta = 0.5;
    const double base = cib_loss(b1, b2, {p1}, {p2}, cfg).total;
    const double permuted = cib_loss(q[0], q[1], {q[2]}, {q[3]}, cfg).total;
    EXPECT_NEAR(base, permuted, 1e-12);
  }
}

TEST(CibLossProperty, SymmetricUnderViewSwap) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixD b1 = soft_codes(5, 7, rng), b2 = soft_codes(5, 7, rng);
    const MatrixD p1 = soft_codes(5, 7, rng), p2 = soft_codes(5, 7, rng);
    LossConfig cfg;
    cfg.beta = 2.0;
    const LossOutput a = cib_loss(b1, b2, {p1}, {p2}, cfg);
    const LossOutput b = cib_loss(b2, b1, {p2}, {p1}, cfg);
    EXPECT_NEAR(a.total, b.total, 1e-12);
    EXPECT_NEAR((a.grad_b1 - b.grad_b2).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR((a.grad_p1 - b.grad_p2).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.temperature = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.temperature = 0.3;
  cfg.beta = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
}
