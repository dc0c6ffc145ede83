#include "cibhash/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cibhash {

void LossConfig::validate() const {
  require(std::isfinite(temperature) && temperature > 0.0, "temperature must be positive");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be non-negative");
  require(epsilon > 0.0, "epsilon must be positive");
}

double cosine_sim(std::span<const double> a, std::span<const double> b, double eps) {
  require(a.size() == b.size(), "cosine_sim needs equal-length vectors");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::max(std::sqrt(na), eps) * std::max(std::sqrt(nb), eps));
}

NtXentResult ntxent(const MatrixD& b1, const MatrixD& b2, double temperature, double eps) {
  require(b1.rows() == b2.rows() && b1.cols() == b2.cols(), "ntxent views must have the same shape");
  require(b1.rows() >= 2, "ntxent needs at least two pairs (one negative)");
  require(temperature > 0.0, "temperature must be positive");
  const Eigen::Index n = b1.rows();
  const Eigen::Index m = 2 * n;

  MatrixD u(m, b1.cols());
  u.topRows(n) = b1;
  u.bottomRows(n) = b2;
  VectorD norms = u.rowwise().norm();
  VectorD scale = norms.cwiseMax(eps);
  MatrixD unit = scale.cwiseInverse().asDiagonal() * u;
  MatrixD sim = unit * unit.transpose();

  // G(a, b) = dL / d sim(a, b) seen from anchor a
  MatrixD g = MatrixD::Zero(m, m);
  double total = 0.0;
  const double inv_t = 1.0 / temperature;
  for (Eigen::Index a = 0; a < m; ++a) {
    const Eigen::Index pos = (a + n) % m;
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < m; ++b)
      if (b != a) peak = std::max(peak, sim(a, b) * inv_t);
    double z = 0.0;
    for (Eigen::Index b = 0; b < m; ++b)
      if (b != a) z += std::exp(sim(a, b) * inv_t - peak);
    const double log_z = peak + std::log(z);
    total += log_z - sim(a, pos) * inv_t;
    for (Eigen::Index b = 0; b < m; ++b) {
      if (b == a) continue;
      const double pi = std::exp(sim(a, b) * inv_t - log_z);
      g(a, b) = (pi - (b == pos ? 1.0 : 0.0)) * inv_t;
    }
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  NtXentResult out;
  out.loss = total * inv_m;
  if (!std::isfinite(out.loss)) fail(ErrorCode::numerical, "ntxent loss is not finite");

  MatrixD grad_unit = ((g + g.transpose()) * unit) * inv_m;
  MatrixD grad_u(m, u.cols());
  for (Eigen::Index a = 0; a < m; ++a) {
    if (norms(a) > eps) {
      const double proj = unit.row(a).dot(grad_unit.row(a));
      grad_u.row(a) = (grad_unit.row(a) - proj * unit.row(a)) / norms(a);
    } else {
      grad_u.row(a) = grad_unit.row(a) / eps;
    }
  }
  out.grad_b1 = grad_u.topRows(n);
  out.grad_b2 = grad_u.bottomRows(n);
  return out;
}

KlResult bernoulli_kl(const CodeProbabilities& p, const CodeProbabilities& gamma) {
  require(p.p.rows() == gamma.p.rows() && p.p.cols() == gamma.p.cols(), "bernoulli_kl shape mismatch");
  KlResult out;
  out.value = VectorD::Zero(p.p.rows());
  out.grad_p.resize(p.p.rows(), p.p.cols());
  for (Eigen::Index i = 0; i < p.p.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index d = 0; d < p.p.cols(); ++d) {
      const double pv = p.p(i, d);
      const double gv = gamma.p(i, d);
      const double log_ratio_one = std::log(pv / gv);
      const double log_ratio_zero = std::log((1.0 - pv) / (1.0 - gv));
      acc += pv * log_ratio_one + (1.0 - pv) * log_ratio_zero;
      out.grad_p(i, d) = log_ratio_one - log_ratio_zero;
    }
    out.value(i) = acc;
  }
  return out;
}

LossOutput cib_loss(const MatrixD& b1, const MatrixD& b2, const CodeProbabilities& p1,
                    const CodeProbabilities& p2, const LossConfig& cfg) {
  cfg.validate();
  require(p1.p.rows() == b1.rows() && p1.p.cols() == b1.cols() && p2.p.rows() == b2.rows() &&
              p2.p.cols() == b2.cols(),
          "cib_loss probability shapes must match the codes");
  NtXentResult cl = ntxent(b1, b2, cfg.temperature, cfg.epsilon);

  LossOutput out;
  out.contrastive = cl.loss;
  out.grad_b1 = std::move(cl.grad_b1);
  out.grad_b2 = std::move(cl.grad_b2);

  const double inv = 1.0 / (2.0 * static_cast<double>(b1.rows()));
  KlResult forward_kl = bernoulli_kl(p1, p2);
  KlResult reverse_kl = bernoulli_kl(p2, p1);
  out.kl = (forward_kl.value.sum() + reverse_kl.value.sum()) * inv;
  out.total = out.contrastive + cfg.beta * out.kl;
  out.grad_p1 = forward_kl.grad_p * (cfg.beta * inv);
  out.grad_p2 = reverse_kl.grad_p * (cfg.beta * inv);
  if (!std::isfinite(out.total))
    fail(ErrorCode::numerical, "cib loss is not finite (contrastive " + std::to_string(out.contrastive) +
                                   ", kl " + std::to_string(out.kl) + ")");
  return out;
}

}  // namespace cibhash
