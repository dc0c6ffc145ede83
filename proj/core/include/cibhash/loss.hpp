#pragma once

#include <span>

#include "cibhash/binarizer.hpp"
#include "cibhash/types.hpp"

namespace cibhash {

struct LossConfig {
  double temperature = 0.3;
  double beta = 0.001;
  double epsilon = 1e-12;  // norm guard for cosine similarity

  void validate() const;
};

/// a.b / (max(|a|, eps) max(|b|, eps)).
double cosine_sim(std::span<const double> a, std::span<const double> b, double eps = 1e-12);

struct NtXentResult {
  double loss = 0.0;
  MatrixD grad_b1;
  MatrixD grad_b2;
};

/// NT-Xent over N positive pairs (row k of b1 with row k of b2). Each of the
/// 2N rows acts as an anchor against its positive and the 2(N - 1) rows of the
/// other items; the loss is the mean over all 2N anchors. Gradients are exact.
NtXentResult ntxent(const MatrixD& b1, const MatrixD& b2, double temperature, double eps = 1e-12);

struct KlResult {
  VectorD value;  // one KL per row
  MatrixD grad_p; // d(sum of value) / dp with gamma held constant
};

/// Closed-form KL between factorized Bernoulli distributions, row by row:
///   sum_d p log(p / g) + (1 - p) log((1 - p) / (1 - g))
KlResult bernoulli_kl(const CodeProbabilities& p, const CodeProbabilities& gamma);

struct LossOutput {
  double contrastive = 0.0;
  double kl = 0.0;
  double total = 0.0;
  MatrixD grad_b1;
  MatrixD grad_b2;
  MatrixD grad_p1;  // d(beta * kl) / dp, target side held constant
  MatrixD grad_p2;
};

/// contrastive + beta * kl, where kl averages KL(p1 || p2) and KL(p2 || p1)
/// over items and both directions. Each direction treats the other view's
/// distribution as a constant target.
LossOutput cib_loss(const MatrixD& b1, const MatrixD& b2, const CodeProbabilities& p1,
                    const CodeProbabilities& p2, const LossConfig& cfg);

}  // namespace cibhash
