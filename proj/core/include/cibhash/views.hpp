#pragma once

#include <cstdint>
#include <vector>

#include "cibhash/random.hpp"
#include "cibhash/types.hpp"

namespace cibhash {

/// Feature-space augmentation: random masking, per-item scaling and additive
/// Gaussian noise proportional to each dimension's dataset std.
struct ViewConfig {
  double mask_prob = 0.2;
  double noise_sigma = 0.1;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ViewPairBatch {
  MatrixD v1;
  MatrixD v2;
  std::vector<std::size_t> source_indices;
};

/// Population std of each column. Computed once on the training set.
VectorD column_std(const MatrixF& features);

/// Applies one independent draw of the transform to every row of `batch`:
///   v = (x .* mask) * scale + noise_sigma * dim_std .* N(0, 1)
/// with mask ~ Bernoulli(1 - mask_prob) per entry and scale ~ U(lo, hi) per row.
MatrixD apply_view(const MatrixD& batch, const ViewConfig& cfg, const VectorD& dim_std, RandomStream& stream);

/// Two views of the same batch drawn back to back from `stream`.
ViewPairBatch make_views(const MatrixD& batch, const ViewConfig& cfg, const VectorD& dim_std,
                         RandomStream& stream);

}  // namespace cibhash
