#include "cibhash/encoder.hpp"

#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "cibhash/random.hpp"

namespace cibhash {

EncoderParams EncoderParams::zeros(std::size_t d, std::size_t hidden, std::size_t bits) {
  const auto di = static_cast<Eigen::Index>(d);
  const auto hi = static_cast<Eigen::Index>(hidden);
  const auto bi = static_cast<Eigen::Index>(bits);
  return {MatrixD::Zero(di, hi), VectorD::Zero(hi), MatrixD::Zero(hi, bi), VectorD::Zero(bi)};
}

bool EncoderParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

bool EncoderParams::operator==(const EncoderParams& o) const {
  return w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && w2.rows() == o.w2.rows() &&
         w2.cols() == o.w2.cols() && w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
}

EncoderParams init_params(std::size_t d, std::size_t hidden, std::size_t bits, std::uint64_t seed) {
  require(d >= 1 && hidden >= 1 && bits >= 1, "encoder dimensions must be at least 1");
  EncoderParams p = EncoderParams::zeros(d, hidden, bits);
  auto fill = [](MatrixD& w, RandomStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
  };
  RandomStream rng1(derive_seed(seed, {1}));
  RandomStream rng2(derive_seed(seed, {2}));
  fill(p.w1, rng1);
  fill(p.w2, rng2);
  return p;
}

ForwardTrace forward(const EncoderParams& params, const MatrixD& batch) {
  require(batch.cols() == params.w1.rows(), "batch width " + std::to_string(batch.cols()) +
                                                " does not match encoder input " +
                                                std::to_string(params.w1.rows()));
  const Eigen::Index n = batch.rows();
  const Eigen::Index d = params.w1.rows();
  const Eigen::Index h = params.w1.cols();
  const Eigen::Index bits = params.w2.cols();

  ForwardTrace t;
  t.input = batch;
  t.hidden_pre.resize(n, h);
  t.logits.resize(n, bits);

  // Row-at-a-time accumulation over the input dimension in a fixed order.
  // Rows are processed four at a time to share each loaded W1 row.
  constexpr Eigen::Index kBlock = 4;
  for (Eigen::Index r0 = 0; r0 < n; r0 += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - r0);
    for (Eigen::Index r = 0; r < rows; ++r) t.hidden_pre.row(r0 + r) = params.b1.transpose();
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto w_row = params.w1.row(k);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double x = batch(r0 + r, k);
        if (x != 0.0) t.hidden_pre.row(r0 + r).noalias() += x * w_row;
      }
    }
  }
  t.hidden = t.hidden_pre.cwiseMax(0.0);
  for (Eigen::Index r = 0; r < n; ++r) {
    auto z = t.logits.row(r);
    z = params.b2.transpose();
    for (Eigen::Index k = 0; k < h; ++k) {
      const double a = t.hidden(r, k);
      if (a != 0.0) z.noalias() += a * params.w2.row(k);
    }
  }
  if (!t.logits.allFinite()) fail(ErrorCode::numerical, "encoder produced non-finite logits");
  return t;
}

BackwardResult backward(const EncoderParams& params, const ForwardTrace& trace, const MatrixD& grad_z,
                        bool want_input_grad) {
  require(grad_z.rows() == trace.logits.rows() && grad_z.cols() == trace.logits.cols(),
          "grad_z shape does not match the forward trace");
  BackwardResult out;
  EncoderGrads& g = out.grads;
  g.w2.noalias() = trace.hidden.transpose() * grad_z;
  g.b2 = grad_z.colwise().sum().transpose();
  MatrixD grad_hidden = grad_z * params.w2.transpose();
  grad_hidden.array() *= (trace.hidden_pre.array() > 0.0).cast<double>();
  g.w1.noalias() = trace.input.transpose() * grad_hidden;
  g.b1 = grad_hidden.colwise().sum().transpose();
  if (want_input_grad) out.grad_input.noalias() = grad_hidden * params.w1.transpose();
  return out;
}

AdamState AdamState::zeros_like(const EncoderParams& params) {
  return {EncoderParams::zeros(params.input_dim(), params.hidden_dim(), params.code_bits()),
          EncoderParams::zeros(params.input_dim(), params.hidden_dim(), params.code_bits()), 0};
}

void adam_step(EncoderParams& params, const EncoderGrads& grads, AdamState& state, const AdamConfig& cfg) {
  require(grads.w1.rows() == params.w1.rows() && grads.w1.cols() == params.w1.cols() &&
              grads.w2.rows() == params.w2.rows() && grads.w2.cols() == params.w2.cols() &&
              state.m.w1.rows() == params.w1.rows() && state.m.w2.cols() == params.w2.cols(),
          "adam_step shape mismatch");
  ++state.step;
  adam_update(params.w1, grads.w1, state.m.w1, state.v.w1, state.step, cfg);
  adam_update(params.b1, grads.b1, state.m.b1, state.v.b1, state.step, cfg);
  adam_update(params.w2, grads.w2, state.m.w2, state.v.w2, state.step, cfg);
  adam_update(params.b2, grads.b2, state.m.b2, state.v.b2, state.step, cfg);
}

namespace {

template <typename M>
void round_block(M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
}

template <typename M>
void write_block(detail::ByteWriter& out, const M& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) out.put<float>(static_cast<float>(m.data()[i]));
}

template <typename M>
void read_block(detail::ByteReader& in, M& m) {
  in.need_bytes(static_cast<std::uint64_t>(m.size()), sizeof(float));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const float v = in.get<float>();
    if (!std::isfinite(v)) fail(ErrorCode::non_finite, "'" + in.path().string() + "' holds a non-finite value");
    m.data()[i] = v;
  }
}

void write_params(detail::ByteWriter& out, const EncoderParams& p) {
  write_block(out, p.w1);
  write_block(out, p.b1);
  write_block(out, p.w2);
  write_block(out, p.b2);
}

void read_params(detail::ByteReader& in, EncoderParams& p) {
  read_block(in, p.w1);
  read_block(in, p.b1);
  read_block(in, p.w2);
  read_block(in, p.b2);
}

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void round_to_storage(EncoderParams& p) {
  round_block(p.w1);
  round_block(p.b1);
  round_block(p.w2);
  round_block(p.b2);
}

void round_to_storage(AdamState& state) {
  round_to_storage(state.m);
  round_to_storage(state.v);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const EncoderParams& p = ckpt.params;
  if (ckpt.thresholds) require(ckpt.thresholds->size() == p.w2.cols(), "threshold vector length must equal code bits");
  if (!p.all_finite() || (ckpt.thresholds && !ckpt.thresholds->allFinite()))
    fail(ErrorCode::non_finite, "refusing to save a checkpoint with non-finite values");
  detail::ByteWriter out(path);
  out.magic("CIBM");
  out.put<std::uint32_t>(kCheckpointVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(p.input_dim()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(p.hidden_dim()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(p.code_bits()));
  write_params(out, p);
  out.put<std::uint8_t>(ckpt.adam ? 1 : 0);
  if (ckpt.adam) {
    out.put<std::uint64_t>(ckpt.adam->step);
    write_params(out, ckpt.adam->m);
    write_params(out, ckpt.adam->v);
  }
  out.put<std::uint8_t>(ckpt.thresholds ? 1 : 0);
  if (ckpt.thresholds) write_block(out, *ckpt.thresholds);
  out.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  detail::ByteReader in(path);
  in.expect_magic("CIBM");
  in.expect_version(kCheckpointVersion);
  const auto d = in.get<std::uint32_t>();
  const auto h = in.get<std::uint32_t>();
  const auto bits = in.get<std::uint32_t>();
  if (d == 0 || h == 0 || bits == 0) fail(ErrorCode::malformed, "'" + path.string() + "' has a zero dimension");
  // W1 alone must fit in what is left of the file
  in.need_bytes(static_cast<std::uint64_t>(d) * h, sizeof(float));
  Checkpoint ckpt;
  ckpt.params = EncoderParams::zeros(d, h, bits);
  read_params(in, ckpt.params);
  const auto has_adam = in.get<std::uint8_t>();
  if (has_adam > 1) fail(ErrorCode::malformed, "'" + path.string() + "' has an invalid adam flag");
  if (has_adam) {
    AdamState state = AdamState::zeros_like(ckpt.params);
    state.step = in.get<std::uint64_t>();
    read_params(in, state.m);
    read_params(in, state.v);
    ckpt.adam = std::move(state);
  }
  const auto has_thresholds = in.get<std::uint8_t>();
  if (has_thresholds > 1) fail(ErrorCode::malformed, "'" + path.string() + "' has an invalid threshold flag");
  if (has_thresholds) {
    VectorD c(static_cast<Eigen::Index>(bits));
    read_block(in, c);
    ckpt.thresholds = std::move(c);
  }
  in.expect_end();
  return ckpt;
}

}  // namespace cibhash
