#include <gtest/gtest.h>

#include <cmath>

#include "cibhash/binarizer.hpp"

using namespace cibhash;

TEST(Sigmoid, ValuesAndClamp) {
  MatrixD z(1, 5);
  z << 0.0, 2.0, -3.0, 1000.0, -1000.0;
  const MatrixD p = sigmoid(z).p;
  EXPECT_EQ(p(0, 0), 0.5);
  EXPECT_NEAR(p(0, 1), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(p(0, 1), 0.880797, 1e-6);
  EXPECT_NEAR(p(0, 2), 1.0 / (1.0 + std::exp(3.0)), 1e-15);
  EXPECT_EQ(p(0, 3), 1.0 - kProbFloor);
  EXPECT_EQ(p(0, 4), kProbFloor);
}

TEST(SampleSt, NearCertainProbability) {
  RandomStream s(1);
  const CodeProbabilities p{MatrixD::Constant(1000, 1000, 1.0 - kProbFloor)};
  const StochasticCode c = sample_st(p, s);
  EXPECT_GE(c.b.mean(), 1.0 - 1e-6);
}

TEST(SampleSt, EmpiricalMeanWithinBinomialBound) {
  // 10^6 draws at p = 0.3: std of the mean is 4.6e-4, the bound is about 3.3 sigma
  RandomStream s(2);
  const CodeProbabilities p{MatrixD::Constant(1000, 1000, 0.3)};
  const double mean = sample_st(p, s).b.mean();
  EXPECT_GE(mean, 0.2985);
  EXPECT_LE(mean, 0.3015);
}

TEST(SampleSt, DeterministicAndConsistentWithNoise) {
  RandomStream a(3), b(3);
  MatrixD pm(4, 6);
  for (Eigen::Index i = 0; i < pm.size(); ++i) pm.data()[i] = 0.05 + 0.9 * static_cast<double>(i) / pm.size();
  const StochasticCode x = sample_st({pm}, a);
  const StochasticCode y = sample_st({pm}, b);
  EXPECT_EQ(x.b, y.b);
  EXPECT_EQ(x.u, y.u);
  EXPECT_EQ(x.p_ref, pm);
  for (Eigen::Index i = 0; i < pm.size(); ++i) {
    EXPECT_EQ(x.b.data()[i], pm.data()[i] >= x.u.data()[i] ? 1.0 : 0.0);
    EXPECT_GE(x.u.data()[i], 0.0);
    EXPECT_LT(x.u.data()[i], 1.0);
  }
}

TEST(StBackward, PassesThroughSigmoidDerivative) {
  MatrixD pm(2, 2);
  pm << 0.1, 0.5, 0.9, 0.3;
  RandomStream s(4);
  const StochasticCode c = sample_st({pm}, s);
  MatrixD g(2, 2);
  g << 1.0, -2.0, 0.5, 3.0;
  const MatrixD out = st_backward(c, g);
  for (Eigen::Index i = 0; i < 4; ++i)
    EXPECT_DOUBLE_EQ(out.data()[i], g.data()[i] * pm.data()[i] * (1.0 - pm.data()[i]));
  EXPECT_EQ(sigmoid_backward({pm}, g), out);
}

TEST(BinarizeInference, HalfMapsToZero) {
  MatrixD pm(1, 4);
  pm << 0.5, 0.5000001, 0.4999999, 0.9;
  const BitMatrix bits = binarize_inference({pm}).bits;
  EXPECT_EQ(bits(0, 0), 0);
  EXPECT_EQ(bits(0, 1), 1);
  EXPECT_EQ(bits(0, 2), 0);
  EXPECT_EQ(bits(0, 3), 1);
}

TEST(SoftForward, IsIdentityOnProbabilities) {
  MatrixD pm = MatrixD::Constant(2, 3, 0.25);
  EXPECT_EQ(soft_forward({pm}), pm);
}
