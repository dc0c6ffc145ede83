#include "cibhash/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "cibhash/parallel.hpp"
#include "cibhash/random.hpp"

namespace cibhash {

namespace {

// stream tags
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kViewStream = 3;
constexpr std::uint64_t kSampleStream = 4;

MatrixD gather_rows(const MatrixF& features, std::span<const std::size_t> rows) {
  MatrixD out(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i])).cast<double>();
  return out;
}

}  // namespace

const char* to_string(TrainMode mode) noexcept {
  return mode == TrainMode::clhash ? "clhash" : "cibhash";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "cibhash") return TrainMode::cibhash;
  if (name == "clhash") return TrainMode::clhash;
  fail(ErrorCode::invalid_argument, "unknown training mode '" + name + "'");
}

LossConfig TrainConfig::effective_loss() const noexcept {
  LossConfig l = loss;
  l.beta = effective_beta();
  return l;
}

void TrainConfig::validate() const {
  require(code_bits >= 8 && code_bits <= 256, "code_bits must be in [8, 256]");
  require(hidden >= 1, "hidden must be at least 1");
  require(batch >= 2, "batch must be at least 2");
  require(epochs >= 1, "epochs must be at least 1");
  require(lr > 0.0, "lr must be positive");
  loss.validate();
  views.validate();
}

namespace {

enum class CodeKind { soft, fixed, sampled };

struct CodeSource {
  CodeKind kind = CodeKind::soft;
  const MatrixD* codes1 = nullptr;
  const MatrixD* codes2 = nullptr;
  RandomStream* rng1 = nullptr;
  RandomStream* rng2 = nullptr;
};

StepGradient step_gradient_impl(const EncoderParams& params, const MatrixD& v1, const MatrixD& v2,
                                const LossConfig& loss_cfg, const CodeSource& source) {
  require(v1.rows() == v2.rows() && v1.cols() == v2.cols(), "views must have the same shape");
  const Eigen::Index n = v1.rows();

  MatrixD stacked(2 * n, v1.cols());
  stacked.topRows(n) = v1;
  stacked.bottomRows(n) = v2;
  const ForwardTrace trace = forward(params, stacked);
  const CodeProbabilities p1 = sigmoid(trace.logits.topRows(n));
  const CodeProbabilities p2 = sigmoid(trace.logits.bottomRows(n));

  StepGradient out;
  MatrixD grad_z(2 * n, trace.logits.cols());
  if (source.kind == CodeKind::soft) {
    out.loss = cib_loss(soft_forward(p1), soft_forward(p2), p1, p2, loss_cfg);
    grad_z.topRows(n) = sigmoid_backward(p1, out.loss.grad_b1);
    grad_z.bottomRows(n) = sigmoid_backward(p2, out.loss.grad_b2);
  } else {
    StochasticCode c1;
    StochasticCode c2;
    if (source.kind == CodeKind::sampled) {
      c1 = sample_st(p1, *source.rng1);
      c2 = sample_st(p2, *source.rng2);
    } else {
      require(source.codes1->rows() == n && source.codes2->rows() == n, "code rows must match the views");
      c1 = {*source.codes1, {}, p1.p};
      c2 = {*source.codes2, {}, p2.p};
    }
    out.loss = cib_loss(c1.b, c2.b, p1, p2, loss_cfg);
    grad_z.topRows(n) = st_backward(c1, out.loss.grad_b1);
    grad_z.bottomRows(n) = st_backward(c2, out.loss.grad_b2);
  }
  grad_z.topRows(n) += sigmoid_backward(p1, out.loss.grad_p1);
  grad_z.bottomRows(n) += sigmoid_backward(p2, out.loss.grad_p2);
  out.grads = backward(params, trace, grad_z).grads;
  return out;
}

}  // namespace

StepGradient step_gradient(const EncoderParams& params, const MatrixD& v1, const MatrixD& v2,
                           const LossConfig& loss_cfg) {
  return step_gradient_impl(params, v1, v2, loss_cfg, {});
}

StepGradient step_gradient(const EncoderParams& params, const MatrixD& v1, const MatrixD& v2,
                           const LossConfig& loss_cfg, const MatrixD& codes1, const MatrixD& codes2) {
  return step_gradient_impl(params, v1, v2, loss_cfg, {CodeKind::fixed, &codes1, &codes2, nullptr, nullptr});
}

StepGradient step_gradient(const EncoderParams& params, const MatrixD& v1, const MatrixD& v2,
                           const LossConfig& loss_cfg, RandomStream& rng1, RandomStream& rng2) {
  return step_gradient_impl(params, v1, v2, loss_cfg, {CodeKind::sampled, nullptr, nullptr, &rng1, &rng2});
}

TrainResult train(const FeatureDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  require(dataset.size() >= cfg.batch, "dataset has fewer rows than one batch");
  require(dataset.features.cols() >= 1, "dataset has no features");
  const auto start = std::chrono::steady_clock::now();

  const std::size_t n = dataset.size();
  const std::size_t steps_per_epoch = n / cfg.batch;
  const VectorD dim_std = column_std(dataset.features);
  const LossConfig loss_cfg = cfg.effective_loss();
  const AdamConfig adam_cfg{cfg.lr, 0.9, 0.999, 1e-8};

  TrainResult result;
  result.params = init_params(dataset.dim(), cfg.hidden, cfg.code_bits, derive_seed(cfg.seed, {kInitStream}));
  result.adam = AdamState::zeros_like(result.params);

  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream shuffle_rng(derive_seed(cfg.seed, {kShuffleStream, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    EpochStats stats;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::span<const std::size_t> rows(order.data() + step * cfg.batch, cfg.batch);
      const MatrixD batch = gather_rows(dataset.features, rows);

      RandomStream view_rng(derive_seed(cfg.seed, {kViewStream, cfg.views.seed, epoch, step}));
      ViewPairBatch views = make_views(batch, cfg.views, dim_std, view_rng);

      try {
        RandomStream sample1(derive_seed(cfg.seed, {kSampleStream, epoch, step, 1}));
        RandomStream sample2(derive_seed(cfg.seed, {kSampleStream, epoch, step, 2}));
        StepGradient g = step_gradient(result.params, views.v1, views.v2, loss_cfg, sample1, sample2);
        adam_step(result.params, g.grads, result.adam, adam_cfg);
        if (!result.params.all_finite())
          fail(ErrorCode::numerical, "parameters became non-finite (contrastive " +
                                         std::to_string(g.loss.contrastive) + ", kl " + std::to_string(g.loss.kl) + ")");
        stats.contrastive += g.loss.contrastive;
        stats.kl += g.loss.kl;
        stats.total += g.loss.total;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::numerical) throw;
        fail(ErrorCode::numerical, "training aborted at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(step) + ": " + e.what());
      }
      ++result.report.steps;
    }
    const double inv = 1.0 / static_cast<double>(steps_per_epoch);
    stats.contrastive *= inv;
    stats.kl *= inv;
    stats.total *= inv;
    result.report.epochs.push_back(stats);
  }
  round_to_storage(result.params);
  round_to_storage(result.adam);
  result.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

DeterministicCode encode_dataset(const EncoderParams& params, const MatrixF& features) {
  require(static_cast<std::size_t>(features.cols()) == params.input_dim(),
          "feature width does not match the encoder input");
  const auto n = static_cast<std::size_t>(features.rows());
  DeterministicCode out{BitMatrix(features.rows(), static_cast<Eigen::Index>(params.code_bits()))};
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, thread_count(), [&](std::size_t c0, std::size_t c1) {
    for (std::size_t c = c0; c < c1; ++c) {
      const auto begin = static_cast<Eigen::Index>(c * kChunk);
      const auto rows = static_cast<Eigen::Index>(std::min(kChunk, n - c * kChunk));
      const MatrixD block = features.middleRows(begin, rows).cast<double>();
      const ForwardTrace trace = forward(params, block);
      out.bits.middleRows(begin, rows) = binarize_inference(sigmoid(trace.logits)).bits;
    }
  });
  return out;
}

DeterministicCode encode_checkpoint(const Checkpoint& ckpt, const MatrixF& features) {
  if (!ckpt.thresholds) return encode_dataset(ckpt.params, features);
  require(static_cast<std::size_t>(features.cols()) == ckpt.params.input_dim(),
          "feature width does not match the encoder input");
  const ForwardTrace trace = forward(ckpt.params, features.cast<double>());
  DeterministicCode out{BitMatrix(trace.logits.rows(), trace.logits.cols())};
  for (Eigen::Index i = 0; i < trace.logits.rows(); ++i)
    for (Eigen::Index d = 0; d < trace.logits.cols(); ++d)
      out.bits(i, d) = trace.logits(i, d) >= (*ckpt.thresholds)(d) ? 1 : 0;
  return out;
}

}  // namespace cibhash
