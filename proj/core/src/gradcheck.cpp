#include <algorithm>
#include <cmath>

#include "cibhash/random.hpp"
#include "cibhash/trainer.hpp"

namespace cibhash {

void GradcheckConfig::validate() const {
  require(input_dim >= 1 && input_dim <= 16, "gradcheck input_dim must be in [1, 16]");
  require(hidden >= 1 && hidden <= 16, "gradcheck hidden must be in [1, 16]");
  require(code_bits >= 1 && code_bits <= 64, "gradcheck code_bits must be in [1, 64]");
  require(batch >= 2 && batch <= 8, "gradcheck batch must be in [2, 8]");
  require(temperature > 0.0, "temperature must be positive");
  require(beta >= 0.0, "beta must be non-negative");
  require(coordinates >= 1, "coordinates must be at least 1");
  require(step > 0.0 && tolerance > 0.0, "step and tolerance must be positive");
}

namespace {

struct BlockRef {
  const char* name;
  double* data;
  std::size_t size;
};

std::vector<BlockRef> blocks_of(EncoderParams& p) {
  return {{"w1", p.w1.data(), static_cast<std::size_t>(p.w1.size())},
          {"b1", p.b1.data(), static_cast<std::size_t>(p.b1.size())},
          {"w2", p.w2.data(), static_cast<std::size_t>(p.w2.size())},
          {"b2", p.b2.data(), static_cast<std::size_t>(p.b2.size())}};
}

double kl_rows(const MatrixD& p, const MatrixD& gamma) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double a = p.data()[i];
    const double g = gamma.data()[i];
    acc += a * std::log(a / g) + (1.0 - a) * std::log((1.0 - a) / (1.0 - g));
  }
  return acc;
}

/// Independent re-evaluation of the objective whose gradient the trainer
/// computes: targets of the KL are frozen at the base probabilities, and in
/// straight-through mode the codes are sigmoid(z) plus a frozen offset.
struct Objective {
  const MatrixD* v1;
  const MatrixD* v2;
  const MatrixD* gamma1;  // base p1
  const MatrixD* gamma2;  // base p2
  const MatrixD* offset1 = nullptr;
  const MatrixD* offset2 = nullptr;
  double temperature;
  double beta;

  double operator()(const EncoderParams& params) const {
    const MatrixD p1 = sigmoid(forward(params, *v1).logits).p;
    const MatrixD p2 = sigmoid(forward(params, *v2).logits).p;
    MatrixD b1 = p1;
    MatrixD b2 = p2;
    if (offset1 != nullptr) {
      b1 += *offset1;
      b2 += *offset2;
    }
    const double cl = ntxent(b1, b2, temperature).loss;
    const double kl = (kl_rows(p1, *gamma2) + kl_rows(p2, *gamma1)) / (2.0 * static_cast<double>(p1.rows()));
    return cl + beta * kl;
  }
};

BitMatrix relu_pattern(const EncoderParams& params, const MatrixD& v1, const MatrixD& v2) {
  const ForwardTrace t1 = forward(params, v1);
  const ForwardTrace t2 = forward(params, v2);
  BitMatrix mask(t1.hidden_pre.rows() + t2.hidden_pre.rows(), t1.hidden_pre.cols());
  mask.topRows(t1.hidden_pre.rows()) = (t1.hidden_pre.array() > 0.0).cast<std::uint8_t>().matrix();
  mask.bottomRows(t2.hidden_pre.rows()) = (t2.hidden_pre.array() > 0.0).cast<std::uint8_t>().matrix();
  return mask;
}

struct ModeResult {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  GradcheckWorst worst;
};

ModeResult check_mode(const char* mode, const EncoderParams& base, EncoderGrads analytic, const Objective& objective,
                      const GradcheckConfig& cfg, RandomStream& pick) {
  ModeResult r;
  r.worst.mode = mode;
  if (cfg.inject_fault) {
    analytic.w1 *= 1.1;
    analytic.b1 *= 1.1;
    analytic.w2 *= 1.1;
    analytic.b2 *= 1.1;
  }
  EncoderParams probe = base;
  auto probe_blocks = blocks_of(probe);
  auto grad_blocks = blocks_of(analytic);
  const BitMatrix base_pattern = relu_pattern(base, *objective.v1, *objective.v2);

  const std::size_t attempts_limit = cfg.coordinates * 20;
  std::size_t attempts = 0;
  while (r.checked < cfg.coordinates && attempts++ < attempts_limit) {
    // cycle through the blocks so small bias blocks are always covered
    const std::size_t b = r.checked % probe_blocks.size();
    const std::size_t idx = static_cast<std::size_t>(pick.next_u64() % probe_blocks[b].size);
    double& coord = probe_blocks[b].data[idx];
    const double saved = coord;

    coord = saved + cfg.step;
    const bool kink_plus = relu_pattern(probe, *objective.v1, *objective.v2) != base_pattern;
    const double f_plus = objective(probe);
    coord = saved - cfg.step;
    const bool kink_minus = relu_pattern(probe, *objective.v1, *objective.v2) != base_pattern;
    const double f_minus = objective(probe);
    coord = saved;
    if (kink_plus || kink_minus) {
      ++r.skipped;
      continue;
    }

    const double numeric = (f_plus - f_minus) / (2.0 * cfg.step);
    const double a = grad_blocks[b].data[idx];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    ++r.checked;
    if (rel >= r.max_rel) {
      r.max_rel = rel;
      r.worst = {mode, probe_blocks[b].name, idx, a, numeric, rel};
    }
  }
  return r;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckConfig& cfg) {
  cfg.validate();
  const EncoderParams params = init_params(cfg.input_dim, cfg.hidden, cfg.code_bits, derive_seed(cfg.seed, {1}));
  RandomStream data_rng(derive_seed(cfg.seed, {2}));
  const auto n = static_cast<Eigen::Index>(cfg.batch);
  const auto d = static_cast<Eigen::Index>(cfg.input_dim);
  MatrixD v1(n, d);
  MatrixD v2(n, d);
  for (Eigen::Index i = 0; i < v1.size(); ++i) v1.data()[i] = data_rng.normal();
  for (Eigen::Index i = 0; i < v2.size(); ++i) v2.data()[i] = v1.data()[i] + 0.3 * data_rng.normal();

  LossConfig loss_cfg;
  loss_cfg.temperature = cfg.temperature;
  loss_cfg.beta = cfg.beta;

  const MatrixD p1 = sigmoid(forward(params, v1).logits).p;
  const MatrixD p2 = sigmoid(forward(params, v2).logits).p;
  RandomStream pick(derive_seed(cfg.seed, {3}));

  GradcheckReport report;

  // (a) soft mode
  const StepGradient soft = step_gradient(params, v1, v2, loss_cfg);
  Objective soft_obj{&v1, &v2, &p1, &p2, nullptr, nullptr, cfg.temperature, cfg.beta};
  const ModeResult soft_r = check_mode("soft", params, soft.grads, soft_obj, cfg, pick);

  // (b) straight-through mode against the fixed-offset surrogate
  RandomStream s1(derive_seed(cfg.seed, {4, 1}));
  RandomStream s2(derive_seed(cfg.seed, {4, 2}));
  const MatrixD c1 = sample_st({p1}, s1).b;
  const MatrixD c2 = sample_st({p2}, s2).b;
  const MatrixD off1 = c1 - p1;
  const MatrixD off2 = c2 - p2;
  const StepGradient st = step_gradient(params, v1, v2, loss_cfg, c1, c2);
  Objective st_obj{&v1, &v2, &p1, &p2, &off1, &off2, cfg.temperature, cfg.beta};
  const ModeResult st_r = check_mode("st", params, st.grads, st_obj, cfg, pick);

  report.soft_max_rel_error = soft_r.max_rel;
  report.st_max_rel_error = st_r.max_rel;
  report.checked = std::min(soft_r.checked, st_r.checked);
  report.skipped_kinks = soft_r.skipped + st_r.skipped;
  report.worst = soft_r.max_rel >= st_r.max_rel ? soft_r.worst : st_r.worst;
  report.pass = soft_r.checked == cfg.coordinates && st_r.checked == cfg.coordinates &&
                soft_r.max_rel <= cfg.tolerance && st_r.max_rel <= cfg.tolerance;
  return report;
}

}  // namespace cibhash
