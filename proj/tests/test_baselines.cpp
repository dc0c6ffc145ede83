#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cibhash/baselines.hpp"
#include "cibhash/retrieval.hpp"
#include "test_util.hpp"

using namespace cibhash;

TEST(Thresholds, ZeroMode) {
  MatrixD r(2, 1);
  r << -1, 2;
  const DeterministicCode c = threshold_binarize(r, fit_thresholds(r, ThresholdMode::zero));
  EXPECT_EQ(c.bits(0, 0), 0);
  EXPECT_EQ(c.bits(1, 0), 1);
}

TEST(Thresholds, LowerMedianOnEvenCount) {
  MatrixD r(4, 2);
  r << 3, 7, 1, 7, 4, 7, 2, 7;
  const ThresholdSpec s = fit_thresholds(r, ThresholdMode::median);
  EXPECT_EQ(s.c(0), 2.0);
  EXPECT_EQ(s.c(1), 7.0);
  const DeterministicCode c = threshold_binarize(r, s);
  EXPECT_EQ(c.bits(0, 0), 1);
  EXPECT_EQ(c.bits(1, 0), 0);
  EXPECT_EQ(c.bits(2, 0), 1);
  EXPECT_EQ(c.bits(3, 0), 1);
  // constant column: every value is >= its own median
  EXPECT_EQ(c.bits.col(1).cast<int>().sum(), 4);
}

TEST(ThresholdsProperty, MedianMatchesSortOracleAndBalancesBits) {
  std::mt19937_64 rng(1);
  for (Eigen::Index n : {1, 2, 7, 100, 101}) {
    const MatrixD r = testutil::random_matrix(n, 5, rng);
    const ThresholdSpec s = fit_thresholds(r, ThresholdMode::median);
    const DeterministicCode c = threshold_binarize(r, s);
    for (Eigen::Index d = 0; d < 5; ++d) {
      std::vector<double> col;
      for (Eigen::Index i = 0; i < n; ++i) col.push_back(r(i, d));
      std::sort(col.begin(), col.end());
      EXPECT_EQ(s.c(d), col[static_cast<std::size_t>((n - 1) / 2)]);
      const auto ones = c.bits.col(d).cast<Eigen::Index>().sum();
      EXPECT_LE(std::abs(2 * ones - n), 2) << n;
    }
  }
}

TEST(Lsh, DeterministicWidthAndSignRule) {
  std::mt19937_64 rng(2);
  const MatrixF x = testutil::random_matrix(50, 6, rng).cast<float>();
  const LshHasher h = LshHasher::fit(x, 24, 7);
  const DeterministicCode a = h.encode(x);
  EXPECT_EQ(a.bits.cols(), 24);
  EXPECT_EQ(lsh(x, 24, 7).bits, a.bits);
  EXPECT_NE(lsh(x, 24, 8).bits, a.bits);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < 24; ++j) {
      double dot = 0.0;
      for (Eigen::Index k = 0; k < 6; ++k) dot += (x(i, k) - h.mean()(k)) * h.planes()(k, j);
      EXPECT_EQ(a.bits(i, j), dot >= 0.0 ? 1 : 0);
    }
}

TEST(LshProperty, PositiveScalingAboutMeanKeepsCode) {
  std::mt19937_64 rng(3);
  const MatrixF x = testutil::random_matrix(40, 5, rng).cast<float>();
  const LshHasher h = LshHasher::fit(x, 16, 1);
  for (double scale : {0.5, 2.0, 7.0}) {
    MatrixF y = x;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index k = 0; k < y.cols(); ++k)
        y(i, k) = static_cast<float>(h.mean()(k) + scale * (x(i, k) - h.mean()(k)));
    // float rounding can flip a bit only when a projection is essentially 0
    const DeterministicCode a = h.encode(x), b = h.encode(y);
    EXPECT_LE((a.bits.cast<int>() - b.bits.cast<int>()).cwiseAbs().sum(), 1);
  }
}

TEST(Lsh, BeatsRandomFloorOnSeparatedClusters) {
  SyntheticSpec spec;
  spec.clusters = 10;
  spec.dim = 32;
  spec.per_cluster = 100;
  const FeatureDataset ds = generate_synthetic(spec);
  const QuerySplit s = split_every(ds, 5);
  const LshHasher h = LshHasher::fit(s.database.features, 16, 0);
  const double map = map_at_n(pack(h.encode(s.queries.features)), pack(h.encode(s.database.features)),
                              s.queries.labels, s.database.labels, 100, Relevance::single);
  EXPECT_GT(map, 1.0 / 10.0 + 0.05);
}

TEST(NaiveCl, DeterministicAndCheckpointConsistent) {
  SyntheticSpec spec;
  spec.clusters = 3;
  spec.dim = 8;
  spec.per_cluster = 20;
  const FeatureDataset ds = generate_synthetic(spec);
  TrainConfig cfg;
  cfg.code_bits = 8;
  cfg.hidden = 16;
  cfg.batch = 8;
  cfg.epochs = 2;
  const NaiveClModel a = naive_cl(ds, cfg);
  const NaiveClModel b = naive_cl(ds, cfg);
  EXPECT_TRUE(a.encoder == b.encoder);
  EXPECT_EQ(a.head_w, b.head_w);
  EXPECT_EQ(a.thresholds.c, b.thresholds.c);
  EXPECT_EQ(a.thresholds.mode, ThresholdMode::median);
  const DeterministicCode codes = a.encode(ds.features);
  EXPECT_EQ(codes.bits.cols(), 8);
  EXPECT_EQ(encode_checkpoint(a.to_checkpoint(), ds.features).bits, codes.bits);
  // bits balanced on the fitting split
  for (Eigen::Index d = 0; d < 8; ++d) {
    const auto ones = codes.bits.col(d).cast<Eigen::Index>().sum();
    EXPECT_LE(std::abs(2 * ones - 60), 2);
  }
}
