#pragma once

#include <cstddef>
#include <cstdint>

#include "cibhash/binarizer.hpp"
#include "cibhash/dataio.hpp"
#include "cibhash/encoder.hpp"
#include "cibhash/trainer.hpp"

namespace cibhash {

enum class ThresholdMode { zero, median };

struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::zero;
  VectorD c;  // one threshold per dimension
};

/// Zero thresholds, or the per-column lower median of `reprs`.
ThresholdSpec fit_thresholds(const MatrixD& reprs, ThresholdMode mode);

/// Bit = 1 iff value >= threshold.
DeterministicCode threshold_binarize(const MatrixD& reprs, const ThresholdSpec& spec);

/// Contrastive learning on continuous representations: the same encoder
/// followed by a linear D -> D projection head, NT-Xent on the head output,
/// then median thresholds on the encoder output.
struct NaiveClModel {
  EncoderParams encoder;
  MatrixD head_w;  // D x D
  VectorD head_b;  // D
  ThresholdSpec thresholds;
  TrainReport report;

  DeterministicCode encode(const MatrixF& features) const;
  /// Encoder plus thresholds, so encode_checkpoint reproduces encode().
  Checkpoint to_checkpoint() const;
};

/// Thresholds are fitted on `dataset`. Uses cfg's views, batch, epochs, lr,
/// temperature and seed; beta is ignored.
NaiveClModel naive_cl(const FeatureDataset& dataset, const TrainConfig& cfg);

/// Random-hyperplane LSH on mean-centred features.
class LshHasher {
 public:
  static LshHasher fit(const MatrixF& features, std::size_t bits, std::uint64_t seed);

  /// Bit j = 1 iff (x - mean) . w_j >= 0.
  DeterministicCode encode(const MatrixF& features) const;

  const VectorD& mean() const noexcept { return mean_; }
  const MatrixD& planes() const noexcept { return planes_; }

 private:
  VectorD mean_;
  MatrixD planes_;  // d x bits
};

DeterministicCode lsh(const MatrixF& features, std::size_t bits, std::uint64_t seed);

}  // namespace cibhash
