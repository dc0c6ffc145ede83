#include "cibhash/binarizer.hpp"

#include <algorithm>
#include <cmath>

namespace cibhash {

CodeProbabilities sigmoid(const MatrixD& z) {
  CodeProbabilities out;
  out.p = z.unaryExpr([](double v) {
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return std::clamp(s, kProbFloor, 1.0 - kProbFloor);
  });
  return out;
}

StochasticCode sample_st(const CodeProbabilities& probs, RandomStream& stream) {
  StochasticCode code;
  code.p_ref = probs.p;
  code.u.resize(probs.p.rows(), probs.p.cols());
  code.b.resize(probs.p.rows(), probs.p.cols());
  for (Eigen::Index i = 0; i < probs.p.size(); ++i) {
    const double u = stream.uniform();
    code.u.data()[i] = u;
    code.b.data()[i] = probs.p.data()[i] >= u ? 1.0 : 0.0;
  }
  return code;
}

MatrixD st_backward(const StochasticCode& code, const MatrixD& grad_b) {
  require(grad_b.rows() == code.b.rows() && grad_b.cols() == code.b.cols(), "grad_b shape mismatch");
  return grad_b.cwiseProduct(code.p_ref.cwiseProduct((1.0 - code.p_ref.array()).matrix()));
}

MatrixD sigmoid_backward(const CodeProbabilities& probs, const MatrixD& grad_p) {
  require(grad_p.rows() == probs.p.rows() && grad_p.cols() == probs.p.cols(), "grad_p shape mismatch");
  return grad_p.cwiseProduct(probs.p.cwiseProduct((1.0 - probs.p.array()).matrix()));
}

DeterministicCode binarize_inference(const CodeProbabilities& probs) {
  return {(probs.p.array() > 0.5).cast<std::uint8_t>().matrix()};
}

}  // namespace cibhash
