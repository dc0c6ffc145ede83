#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "cibhash/types.hpp"

namespace cibhash {

/// One-hidden-layer ReLU head mapping d input features to D code logits:
///   z = relu(x W1 + b1) W2 + b2
struct EncoderParams {
  MatrixD w1;  // d x H
  VectorD b1;  // H
  MatrixD w2;  // H x D
  VectorD b2;  // D

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(w1.rows()); }
  std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(w1.cols()); }
  std::size_t code_bits() const noexcept { return static_cast<std::size_t>(w2.cols()); }

  static EncoderParams zeros(std::size_t d, std::size_t hidden, std::size_t bits);
  bool all_finite() const;
  bool operator==(const EncoderParams& other) const;
};

/// Gradients share the parameter layout.
using EncoderGrads = EncoderParams;

struct ForwardTrace {
  MatrixD input;       // N x d
  MatrixD hidden_pre;  // N x H
  MatrixD hidden;      // N x H, relu(hidden_pre)
  MatrixD logits;      // N x D
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
EncoderParams init_params(std::size_t d, std::size_t hidden, std::size_t bits, std::uint64_t seed);

/// Each output row is computed with the same accumulation order regardless of
/// how many rows are in the batch, so results never depend on batching.
/// Throws ErrorCode::numerical if any logit is non-finite.
ForwardTrace forward(const EncoderParams& params, const MatrixD& batch);

struct BackwardResult {
  EncoderGrads grads;
  MatrixD grad_input;  // empty unless requested
};

/// Exact gradients of sum(z .* grad_z). The ReLU subgradient at 0 is 0.
BackwardResult backward(const EncoderParams& params, const ForwardTrace& trace, const MatrixD& grad_z,
                        bool want_input_grad = false);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  EncoderParams m;
  EncoderParams v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const EncoderParams& params);
  bool operator==(const AdamState&) const = default;
};

/// Bias-corrected Adam on a single parameter block.
template <typename Param, typename Grad, typename Moment>
void adam_update(Param& param, const Grad& grad, Moment& m, Moment& v, std::uint64_t step, const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  m.array() = cfg.beta1 * m.array() + (1.0 - cfg.beta1) * grad.array();
  v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * grad.array().square();
  param.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
}

/// Increments state.step, then updates every block.
void adam_step(EncoderParams& params, const EncoderGrads& grads, AdamState& state, const AdamConfig& cfg);

/// Rounds every parameter to the nearest 32-bit value, which is what a
/// checkpoint stores. After this, save/load is lossless.
void round_to_storage(EncoderParams& params);
void round_to_storage(AdamState& state);

struct Checkpoint {
  EncoderParams params;
  std::optional<AdamState> adam;
  /// Per-bit thresholds on the raw logits. When present, codes are
  /// z >= threshold instead of sigmoid(z) > 0.5 (median-threshold baseline).
  std::optional<VectorD> thresholds;
};

// "CIBM" v1: u32 d, u32 H, u32 D, then W1, b1, W2, b2 as f32; u8 has_adam
// [u64 step, m blocks, v blocks]; u8 has_thresholds [D f32].
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cibhash
