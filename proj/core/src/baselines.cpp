#include "cibhash/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "cibhash/random.hpp"

namespace cibhash {

ThresholdSpec fit_thresholds(const MatrixD& reprs, ThresholdMode mode) {
  require(reprs.rows() >= 1 && reprs.cols() >= 1, "need a non-empty representation matrix");
  require(reprs.allFinite(), "representations must be finite");
  ThresholdSpec spec{mode, VectorD::Zero(reprs.cols())};
  if (mode == ThresholdMode::zero) return spec;
  std::vector<double> column(static_cast<std::size_t>(reprs.rows()));
  for (Eigen::Index d = 0; d < reprs.cols(); ++d) {
    for (Eigen::Index i = 0; i < reprs.rows(); ++i) column[static_cast<std::size_t>(i)] = reprs(i, d);
    const auto mid = column.begin() + static_cast<std::ptrdiff_t>((column.size() - 1) / 2);
    std::nth_element(column.begin(), mid, column.end());
    spec.c(d) = *mid;
  }
  return spec;
}

DeterministicCode threshold_binarize(const MatrixD& reprs, const ThresholdSpec& spec) {
  require(spec.c.size() == reprs.cols(), "threshold vector length must match representation width");
  DeterministicCode out{BitMatrix(reprs.rows(), reprs.cols())};
  for (Eigen::Index i = 0; i < reprs.rows(); ++i)
    for (Eigen::Index d = 0; d < reprs.cols(); ++d) out.bits(i, d) = reprs(i, d) >= spec.c(d) ? 1 : 0;
  return out;
}

namespace {

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kHeadStream = 12;
constexpr std::uint64_t kShuffleStream = 13;
constexpr std::uint64_t kViewStream = 14;

MatrixD representations(const EncoderParams& params, const MatrixF& features) {
  return forward(params, features.cast<double>()).logits;
}

}  // namespace

DeterministicCode NaiveClModel::encode(const MatrixF& features) const {
  return threshold_binarize(representations(encoder, features), thresholds);
}

Checkpoint NaiveClModel::to_checkpoint() const { return {encoder, std::nullopt, thresholds.c}; }

NaiveClModel naive_cl(const FeatureDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  require(dataset.size() >= cfg.batch, "dataset has fewer rows than one batch");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = dataset.size();
  const std::size_t steps_per_epoch = n / cfg.batch;
  const VectorD dim_std = column_std(dataset.features);
  const AdamConfig adam_cfg{cfg.lr, 0.9, 0.999, 1e-8};
  const auto bits = static_cast<Eigen::Index>(cfg.code_bits);

  NaiveClModel model;
  model.encoder = init_params(dataset.dim(), cfg.hidden, cfg.code_bits, derive_seed(cfg.seed, {kInitStream}));
  {
    RandomStream rng(derive_seed(cfg.seed, {kHeadStream}));
    const double limit = std::sqrt(6.0 / static_cast<double>(2 * bits));
    model.head_w.resize(bits, bits);
    for (Eigen::Index i = 0; i < model.head_w.size(); ++i) model.head_w.data()[i] = rng.uniform(-limit, limit);
    model.head_b = VectorD::Zero(bits);
  }
  AdamState enc_state = AdamState::zeros_like(model.encoder);
  MatrixD head_w_m = MatrixD::Zero(bits, bits);
  MatrixD head_w_v = MatrixD::Zero(bits, bits);
  VectorD head_b_m = VectorD::Zero(bits);
  VectorD head_b_v = VectorD::Zero(bits);

  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream shuffle_rng(derive_seed(cfg.seed, {kShuffleStream, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    EpochStats stats;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const auto nb = static_cast<Eigen::Index>(cfg.batch);
      MatrixD batch(nb, dataset.features.cols());
      for (Eigen::Index i = 0; i < nb; ++i)
        batch.row(i) = dataset.features.row(static_cast<Eigen::Index>(order[step * cfg.batch + static_cast<std::size_t>(i)])).cast<double>();
      RandomStream view_rng(derive_seed(cfg.seed, {kViewStream, cfg.views.seed, epoch, step}));
      const ViewPairBatch views = make_views(batch, cfg.views, dim_std, view_rng);

      MatrixD stacked(2 * nb, batch.cols());
      stacked.topRows(nb) = views.v1;
      stacked.bottomRows(nb) = views.v2;
      const ForwardTrace trace = forward(model.encoder, stacked);
      MatrixD projected = trace.logits * model.head_w;
      projected.rowwise() += model.head_b.transpose();

      const NtXentResult cl = ntxent(projected.topRows(nb), projected.bottomRows(nb), cfg.loss.temperature,
                                     cfg.loss.epsilon);
      MatrixD grad_h(2 * nb, bits);
      grad_h.topRows(nb) = cl.grad_b1;
      grad_h.bottomRows(nb) = cl.grad_b2;
      const MatrixD grad_head_w = trace.logits.transpose() * grad_h;
      const VectorD grad_head_b = grad_h.colwise().sum().transpose();
      const MatrixD grad_z = grad_h * model.head_w.transpose();
      const EncoderGrads grads = backward(model.encoder, trace, grad_z).grads;

      adam_step(model.encoder, grads, enc_state, adam_cfg);
      adam_update(model.head_w, grad_head_w, head_w_m, head_w_v, enc_state.step, adam_cfg);
      adam_update(model.head_b, grad_head_b, head_b_m, head_b_v, enc_state.step, adam_cfg);
      if (!model.encoder.all_finite() || !model.head_w.allFinite())
        fail(ErrorCode::numerical, "naive-cl training diverged at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(step));
      stats.contrastive += cl.loss;
      stats.total += cl.loss;
      ++model.report.steps;
    }
    stats.contrastive /= static_cast<double>(steps_per_epoch);
    stats.total /= static_cast<double>(steps_per_epoch);
    model.report.epochs.push_back(stats);
  }
  round_to_storage(model.encoder);
  model.thresholds = fit_thresholds(representations(model.encoder, dataset.features), ThresholdMode::median);
  // thresholds are stored as f32 in checkpoints
  for (Eigen::Index d = 0; d < model.thresholds.c.size(); ++d)
    model.thresholds.c(d) = static_cast<double>(static_cast<float>(model.thresholds.c(d)));
  model.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return model;
}

LshHasher LshHasher::fit(const MatrixF& features, std::size_t bits, std::uint64_t seed) {
  require(features.rows() >= 1 && features.cols() >= 1, "lsh needs a non-empty feature matrix");
  require(bits >= 1, "lsh needs at least one bit");
  LshHasher h;
  h.mean_ = features.cast<double>().colwise().mean().transpose();
  h.planes_.resize(features.cols(), static_cast<Eigen::Index>(bits));
  RandomStream rng(seed);
  for (Eigen::Index i = 0; i < h.planes_.size(); ++i) h.planes_.data()[i] = rng.normal();
  return h;
}

DeterministicCode LshHasher::encode(const MatrixF& features) const {
  require(features.cols() == planes_.rows(), "feature width does not match the hyperplanes");
  MatrixD centred = features.cast<double>();
  centred.rowwise() -= mean_.transpose();
  return threshold_binarize(centred * planes_, {ThresholdMode::zero, VectorD::Zero(planes_.cols())});
}

DeterministicCode lsh(const MatrixF& features, std::size_t bits, std::uint64_t seed) {
  return LshHasher::fit(features, bits, seed).encode(features);
}

}  // namespace cibhash
