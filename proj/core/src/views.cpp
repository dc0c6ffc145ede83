#include "cibhash/views.hpp"

#include <cmath>
#include <numeric>

namespace cibhash {

void ViewConfig::validate() const {
  require(mask_prob >= 0.0 && mask_prob < 1.0, "mask_prob must be in [0, 1)");
  require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
  require(scale_lo > 0.0 && scale_lo <= 1.0 && scale_hi >= 1.0, "scale range must satisfy 0 < lo <= 1 <= hi");
}

VectorD column_std(const MatrixF& features) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  VectorD mean = VectorD::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) mean += features.row(i).cast<double>().transpose();
  mean /= static_cast<double>(n);
  VectorD var = VectorD::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorD diff = features.row(i).cast<double>().transpose() - mean;
    var += diff.cwiseProduct(diff);
  }
  return (var / static_cast<double>(n)).cwiseSqrt();
}

MatrixD apply_view(const MatrixD& batch, const ViewConfig& cfg, const VectorD& dim_std, RandomStream& stream) {
  require(batch.rows() >= 1, "view batch must have at least one row");
  require(dim_std.size() == batch.cols(), "dim_std length must match batch width");
  const bool masking = cfg.mask_prob > 0.0;
  const bool scaling = cfg.scale_lo != cfg.scale_hi;
  const bool noisy = cfg.noise_sigma > 0.0;
  MatrixD view = batch;
  for (Eigen::Index i = 0; i < view.rows(); ++i) {
    const double scale = scaling ? stream.uniform(cfg.scale_lo, cfg.scale_hi) : cfg.scale_lo;
    for (Eigen::Index j = 0; j < view.cols(); ++j) {
      double v = view(i, j);
      if (masking && stream.bernoulli(cfg.mask_prob)) v = 0.0;
      v *= scale;
      if (noisy) v += cfg.noise_sigma * dim_std(j) * stream.normal();
      view(i, j) = v;
    }
  }
  return view;
}

ViewPairBatch make_views(const MatrixD& batch, const ViewConfig& cfg, const VectorD& dim_std,
                         RandomStream& stream) {
  ViewPairBatch out;
  out.v1 = apply_view(batch, cfg, dim_std, stream);
  out.v2 = apply_view(batch, cfg, dim_std, stream);
  out.source_indices.resize(static_cast<std::size_t>(batch.rows()));
  std::iota(out.source_indices.begin(), out.source_indices.end(), std::size_t{0});
  return out;
}

}  // namespace cibhash
