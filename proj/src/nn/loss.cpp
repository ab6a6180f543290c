#include "fairvfl/nn/loss.hpp"

#include "fairvfl/error.hpp"

#include <cmath>

namespace fairvfl::nn {

Tensor2D softmax_rows(const Tensor2D& logits) {
  Tensor2D out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

LossGrad softmax_cross_entropy(const Tensor2D& logits, std::span<const int> targets) {
  if (static_cast<Index>(targets.size()) != logits.rows()) {
    throw Error(ErrorKind::Dimension, "softmax_cross_entropy: " + std::to_string(targets.size()) +
                                          " targets for logits " + shape_string(logits));
  }
  const Index rows = logits.rows();
  LossGrad out;
  out.grad.resize(rows, logits.cols());
  double total = 0.0;
  for (Index r = 0; r < rows; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= logits.cols()) {
      throw Error(ErrorKind::Label, "class index " + std::to_string(t) + " at row " + std::to_string(r) +
                                        " outside [0, " + std::to_string(logits.cols()) + ")");
    }
    const double mx = logits.row(r).maxCoeff();
    const auto shifted = (logits.row(r).array() - mx).eval();
    const double log_z = std::log(shifted.exp().sum());
    total += log_z - shifted(t);
    out.grad.row(r) = (shifted - log_z).exp();
    out.grad(r, t) -= 1.0;
  }
  const double inv = rows > 0 ? 1.0 / static_cast<double>(rows) : 0.0;
  out.loss = total * inv;
  out.grad *= inv;
  return out;
}

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

PairLossGrad pairwise_softmax_loss(const Tensor2D& positive, const Tensor2D& negative) {
  require_same_shape(positive, negative, "pairwise_softmax_loss");
  if (positive.cols() != 1) {
    throw Error(ErrorKind::Dimension, "pairwise_softmax_loss expects single-column scores, got " +
                                          shape_string(positive));
  }
  const Index rows = positive.rows();
  PairLossGrad out;
  out.grad_positive.resize(rows, 1);
  out.grad_negative.resize(rows, 1);
  const double inv = rows > 0 ? 1.0 / static_cast<double>(rows) : 0.0;
  double total = 0.0;
  for (Index r = 0; r < rows; ++r) {
    const double margin = negative(r, 0) - positive(r, 0);
    total += softplus(margin);
    const double w = sigmoid(margin) * inv;
    out.grad_positive(r, 0) = -w;
    out.grad_negative(r, 0) = w;
  }
  out.loss = total * inv;
  return out;
}

std::vector<int> argmax_rows(const Tensor2D& t) {
  std::vector<int> out(static_cast<std::size_t>(t.rows()));
  for (Index r = 0; r < t.rows(); ++r) {
    Index best = 0;
    t.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace fairvfl::nn
