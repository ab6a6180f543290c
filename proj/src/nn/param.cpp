#include "fairvfl/nn/param.hpp"

#include "fairvfl/error.hpp"

#include <cmath>

namespace fairvfl::nn {

ParamBlock::ParamBlock(std::string block_name, Index rows, Index cols, bool with_bias)
    : name(std::move(block_name)),
      weights(Tensor2D::Zero(rows, cols)),
      bias(RowVector::Zero(with_bias ? cols : 0)),
      grad_weights(Tensor2D::Zero(rows, cols)),
      grad_bias(RowVector::Zero(with_bias ? cols : 0)) {}

void ParamBlock::zero_grad() {
  grad_weights.setZero();
  grad_bias.setZero();
}

void ParamBlock::glorot_init(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(weights.rows() + weights.cols()));
  for (Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.uniform(-limit, limit);
  bias.setZero();
}

void ParamBlock::set_zero() {
  weights.setZero();
  bias.setZero();
}

void zero_grads(const BlockList& blocks) {
  for (auto* b : blocks) b->zero_grad();
}

GradientSet capture_grads(const BlockList& blocks) {
  GradientSet out;
  out.reserve(blocks.size());
  for (const auto* b : blocks) out.push_back({b->grad_weights, b->grad_bias});
  return out;
}

void load_grads(const BlockList& blocks, const GradientSet& grads) {
  if (blocks.size() != grads.size()) {
    throw Error(ErrorKind::Dimension, "gradient set has " + std::to_string(grads.size()) +
                                          " entries for " + std::to_string(blocks.size()) + " blocks");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    require_same_shape(blocks[i]->grad_weights, grads[i].weights, "load_grads");
    blocks[i]->grad_weights = grads[i].weights;
    blocks[i]->grad_bias = grads[i].bias;
  }
}

GradientSet scale(const GradientSet& grads, double factor) {
  GradientSet out = grads;
  for (auto& g : out) {
    g.weights *= factor;
    g.bias *= factor;
  }
  return out;
}

double max_abs_diff(const GradientSet& a, const GradientSet& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::Dimension, "gradient sets differ in length");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require_same_shape(a[i].weights, b[i].weights, "max_abs_diff");
    if (a[i].weights.size() > 0) worst = std::max(worst, (a[i].weights - b[i].weights).cwiseAbs().maxCoeff());
    if (a[i].bias.size() > 0) worst = std::max(worst, (a[i].bias - b[i].bias).cwiseAbs().maxCoeff());
  }
  return worst;
}

double max_abs(const GradientSet& g) {
  double worst = 0.0;
  for (const auto& b : g) {
    if (b.weights.size() > 0) worst = std::max(worst, b.weights.cwiseAbs().maxCoeff());
    if (b.bias.size() > 0) worst = std::max(worst, b.bias.cwiseAbs().maxCoeff());
  }
  return worst;
}

Eigen::VectorXd flatten_params(const ConstBlockList& blocks) {
  Index total = 0;
  for (const auto* b : blocks) total += b->size();
  Eigen::VectorXd flat(total);
  Index k = 0;
  for (const auto* b : blocks) {
    flat.segment(k, b->weights.size()) = Eigen::Map<const Eigen::VectorXd>(b->weights.data(), b->weights.size());
    k += b->weights.size();
    flat.segment(k, b->bias.size()) = b->bias.transpose();
    k += b->bias.size();
  }
  return flat;
}

void unflatten_params(const BlockList& blocks, const Eigen::VectorXd& flat) {
  Index k = 0;
  for (auto* b : blocks) {
    Eigen::Map<Eigen::VectorXd>(b->weights.data(), b->weights.size()) = flat.segment(k, b->weights.size());
    k += b->weights.size();
    b->bias = flat.segment(k, b->bias.size()).transpose();
    k += b->bias.size();
  }
  if (k != flat.size()) throw Error(ErrorKind::Dimension, "flat parameter vector has the wrong length");
}

Eigen::VectorXd flatten_grads(const ConstBlockList& blocks) {
  Index total = 0;
  for (const auto* b : blocks) total += b->size();
  Eigen::VectorXd flat(total);
  Index k = 0;
  for (const auto* b : blocks) {
    flat.segment(k, b->grad_weights.size()) =
        Eigen::Map<const Eigen::VectorXd>(b->grad_weights.data(), b->grad_weights.size());
    k += b->grad_weights.size();
    flat.segment(k, b->grad_bias.size()) = b->grad_bias.transpose();
    k += b->grad_bias.size();
  }
  return flat;
}

ConstBlockList as_const(const BlockList& blocks) { return ConstBlockList(blocks.begin(), blocks.end()); }

}  // namespace fairvfl::nn
