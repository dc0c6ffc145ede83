#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cibhash/binarizer.hpp"
#include "cibhash/dataio.hpp"
#include "cibhash/encoder.hpp"
#include "cibhash/loss.hpp"
#include "cibhash/views.hpp"

namespace cibhash {

enum class TrainMode { cibhash, clhash };

const char* to_string(TrainMode mode) noexcept;
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
  std::size_t code_bits = 64;
  std::size_t hidden = 1024;
  std::size_t batch = 64;
  std::size_t epochs = 30;
  double lr = 0.001;
  LossConfig loss;
  ViewConfig views;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::cibhash;

  /// clhash trains with beta forced to zero.
  double effective_beta() const noexcept { return mode == TrainMode::clhash ? 0.0 : loss.beta; }
  LossConfig effective_loss() const noexcept;
  void validate() const;
};

struct EpochStats {
  double contrastive = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;  // mean over the steps of each epoch
  std::size_t steps = 0;
  double wall_time_s = 0.0;
};

struct TrainResult {
  EncoderParams params;  // rounded to checkpoint precision
  AdamState adam;
  TrainReport report;
};

/// Loss and exact parameter gradient of one training step on fixed views.
struct StepGradient {
  LossOutput loss;
  EncoderGrads grads;
};

/// Soft mode: the probabilities themselves are the codes.
StepGradient step_gradient(const EncoderParams& params, const MatrixD& v1, const MatrixD& v2,
                           const LossConfig& loss_cfg);
/// Straight-through mode with given binary codes for each view.
StepGradient step_gradient(const EncoderParams& params, const MatrixD& v1, const MatrixD& v2,
                           const LossConfig& loss_cfg, const MatrixD& codes1, const MatrixD& codes2);
/// Straight-through mode, sampling one code per view from the given streams.
StepGradient step_gradient(const EncoderParams& params, const MatrixD& v1, const MatrixD& v2,
                           const LossConfig& loss_cfg, RandomStream& rng1, RandomStream& rng2);

/// Runs epochs * floor(n / batch) Adam steps: seeded shuffle, two views,
/// encoder, sigmoid, one Bernoulli sample per view, loss, straight-through
/// backward. The trailing partial batch of each epoch is dropped. Fully
/// determined by (dataset, cfg).
TrainResult train(const FeatureDataset& dataset, const TrainConfig& cfg);

/// sigmoid(f(x)) > 0.5 on the original items, no views or sampling.
DeterministicCode encode_dataset(const EncoderParams& params, const MatrixF& features);

/// Like encode_dataset, but honours checkpoint thresholds when present.
DeterministicCode encode_checkpoint(const Checkpoint& ckpt, const MatrixF& features);

struct GradcheckConfig {
  std::size_t input_dim = 8;
  std::size_t hidden = 12;
  std::size_t code_bits = 6;
  std::size_t batch = 4;
  double temperature = 0.3;
  double beta = 0.5;
  std::size_t coordinates = 120;
  double step = 1e-4;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  /// Test hook: scales the analytic gradient so the check must fail.
  bool inject_fault = false;

  void validate() const;
};

struct GradcheckWorst {
  std::string mode;   // "soft" or "st"
  std::string block;  // w1, b1, w2, b2
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  double soft_max_rel_error = 0.0;
  double st_max_rel_error = 0.0;
  std::size_t checked = 0;        // per mode
  std::size_t skipped_kinks = 0;  // coordinates whose perturbation crossed a ReLU kink
  GradcheckWorst worst;
  bool pass = false;
};

/// Compares analytic gradients with central differences on random parameter
/// coordinates, (a) in soft mode and (b) in straight-through mode against the
/// surrogate b = sigmoid(z) + (b0 - sigmoid(z0)) with the sampled offset held
/// fixed. In both modes the KL target distribution is held at its unperturbed
/// value, matching the stop-gradient used in training.
GradcheckReport gradcheck(const GradcheckConfig& cfg);

}  // namespace cibhash
