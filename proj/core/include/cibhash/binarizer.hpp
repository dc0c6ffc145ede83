#pragma once

#include "cibhash/random.hpp"
#include "cibhash/types.hpp"

namespace cibhash {

/// Probabilities are clamped into [kProbFloor, 1 - kProbFloor] so the
/// Bernoulli KL stays finite.
inline constexpr double kProbFloor = 1e-7;

/// Per-bit Bernoulli parameters, N x D, every entry inside the clamp range.
struct CodeProbabilities {
  MatrixD p;
};

/// A sampled code together with the noise and probabilities that produced it.
struct StochasticCode {
  MatrixD b;      // {0, 1}
  MatrixD u;      // uniform draws in [0, 1)
  MatrixD p_ref;  // probabilities at sampling time
};

struct DeterministicCode {
  BitMatrix bits;  // N x D, {0, 1}
};

CodeProbabilities sigmoid(const MatrixD& z);

/// b = 1 iff p >= u with u ~ U[0, 1), drawn row-major from `stream`.
StochasticCode sample_st(const CodeProbabilities& probs, RandomStream& stream);

/// Straight-through backward: the binarization passes gradients unchanged,
/// then the sigmoid contributes p (1 - p).
MatrixD st_backward(const StochasticCode& code, const MatrixD& grad_b);

/// Gradient through the sigmoid alone, for terms that depend on p directly.
MatrixD sigmoid_backward(const CodeProbabilities& probs, const MatrixD& grad_p);

/// Bit = 1 iff p > 0.5; an exact 0.5 maps to 0.
DeterministicCode binarize_inference(const CodeProbabilities& probs);

/// Uses the probabilities themselves as codes (b := p). This makes the whole
/// loss pipeline differentiable for gradient checks.
inline MatrixD soft_forward(const CodeProbabilities& probs) { return probs.p; }

}  // namespace cibhash
