#include "fairvfl/models/aggregator.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/nn/loss.hpp"

#include <cmath>

namespace fairvfl::models {

using nn::Index;
using nn::Tensor2D;

Aggregator::Aggregator(std::size_t positions, const RepWidths& widths, const ArchConfig& arch, Rng& init_rng)
    : positions_(positions), heads_(arch.attention_heads), width_(widths.unified) {
  if (positions < 1) throw Error(ErrorKind::Config, "aggregator needs at least one local representation");
  arch.validate(widths);
  const auto d = static_cast<Index>(width_);
  query_ = nn::ParamBlock("aggregator.query", d, d);
  key_ = nn::ParamBlock("aggregator.key", d, d);
  value_ = nn::ParamBlock("aggregator.value", d, d);
  output_ = nn::ParamBlock("aggregator.output", d, d);
  pool_proj_ = nn::ParamBlock("aggregator.pool_proj", d, static_cast<Index>(arch.pooling_hidden));
  pool_query_ = nn::ParamBlock("aggregator.pool_query", static_cast<Index>(arch.pooling_hidden), 1, false);
  for (auto* b : blocks()) b->glorot_init(init_rng);
}

Tensor2D Aggregator::forward(const std::vector<Tensor2D>& local_reps, AggregatorTrace& tr) const {
  if (local_reps.size() != positions_) {
    throw Error(ErrorKind::Protocol, "aggregator expects " + std::to_string(positions_) + " local representations, got " +
                                         std::to_string(local_reps.size()));
  }
  const Index n = static_cast<Index>(positions_);
  const Index batch = local_reps.front().rows();
  const Index d = static_cast<Index>(width_);
  for (const auto& rep : local_reps) {
    if (rep.rows() != batch || rep.cols() != d) {
      throw Error(ErrorKind::Protocol, "local representation " + nn::shape_string(rep) + " does not match [" +
                                           std::to_string(batch) + "x" + std::to_string(d) + "]");
    }
  }
  tr.batch = batch;
  tr.positions = n;
  tr.stacked.resize(batch * n, d);
  for (Index b = 0; b < batch; ++b) {
    for (Index i = 0; i < n; ++i) tr.stacked.row(b * n + i) = local_reps[static_cast<std::size_t>(i)].row(b);
  }
  tr.queries = nn::linear_forward(tr.stacked, query_);
  tr.keys = nn::linear_forward(tr.stacked, key_);
  tr.values = nn::linear_forward(tr.stacked, value_);

  const Index h_count = static_cast<Index>(heads_);
  const Index dh = d / h_count;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  tr.heads.resize(batch * n, d);
  tr.attention.resize(static_cast<std::size_t>(batch * h_count));
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < h_count; ++h) {
      const auto q = tr.queries.block(b * n, h * dh, n, dh);
      const auto k = tr.keys.block(b * n, h * dh, n, dh);
      const auto v = tr.values.block(b * n, h * dh, n, dh);
      Tensor2D probs = nn::softmax_rows((q * k.transpose()) * inv_sqrt);
      tr.heads.block(b * n, h * dh, n, dh).noalias() = probs * v;
      tr.attention[static_cast<std::size_t>(b * h_count + h)] = std::move(probs);
    }
  }
  tr.contextual = nn::linear_forward(tr.heads, output_);
  tr.pooling_hidden = nn::linear_forward(tr.contextual, pool_proj_).array().tanh();
  const Tensor2D scores = tr.pooling_hidden * pool_query_.weights;  // (batch*n) x 1

  tr.pooling_weights.resize(batch, n);
  Tensor2D unified = Tensor2D::Zero(batch, d);
  for (Index b = 0; b < batch; ++b) {
    const double mx = scores.block(b * n, 0, n, 1).maxCoeff();
    double z = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double e = std::exp(scores(b * n + i, 0) - mx);
      tr.pooling_weights(b, i) = e;
      z += e;
    }
    for (Index i = 0; i < n; ++i) {
      tr.pooling_weights(b, i) /= z;
      unified.row(b) += tr.pooling_weights(b, i) * tr.contextual.row(b * n + i);
    }
  }
  return unified;
}

Tensor2D Aggregator::forward(const std::vector<Tensor2D>& local_reps) const {
  AggregatorTrace tr;
  return forward(local_reps, tr);
}

std::vector<Tensor2D> Aggregator::backward(const Tensor2D& grad_unified, const AggregatorTrace& tr,
                                           nn::ParamGrads mode) {
  const Index n = tr.positions;
  const Index batch = tr.batch;
  const Index d = static_cast<Index>(width_);
  if (grad_unified.rows() != batch || grad_unified.cols() != d) {
    throw Error(ErrorKind::Dimension, "aggregator backward: gradient " + nn::shape_string(grad_unified) +
                                          " for batch " + std::to_string(batch));
  }

  // Pooling: s_b = sum_i alpha_bi c_bi, alpha_b = softmax(tanh(c W + b) q).
  Tensor2D d_contextual(batch * n, d);
  Tensor2D d_scores(batch * n, 1);
  for (Index b = 0; b < batch; ++b) {
    double weighted = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double alpha = tr.pooling_weights(b, i);
      d_contextual.row(b * n + i) = alpha * grad_unified.row(b);
      const double d_alpha = grad_unified.row(b).dot(tr.contextual.row(b * n + i));
      d_scores(b * n + i, 0) = d_alpha;
      weighted += alpha * d_alpha;
    }
    for (Index i = 0; i < n; ++i) {
      d_scores(b * n + i, 0) = tr.pooling_weights(b, i) * (d_scores(b * n + i, 0) - weighted);
    }
  }
  if (mode == nn::ParamGrads::Accumulate) pool_query_.grad_weights.noalias() += tr.pooling_hidden.transpose() * d_scores;
  Tensor2D d_hidden = d_scores * pool_query_.weights.transpose();
  d_hidden.array() *= 1.0 - tr.pooling_hidden.array().square();
  d_contextual += nn::linear_backward(tr.contextual, d_hidden, pool_proj_, mode);

  const Tensor2D d_heads = nn::linear_backward(tr.heads, d_contextual, output_, mode);

  const Index h_count = static_cast<Index>(heads_);
  const Index dh = d / h_count;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor2D dq(batch * n, d), dk(batch * n, d), dv(batch * n, d);
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < h_count; ++h) {
      const auto& probs = tr.attention[static_cast<std::size_t>(b * h_count + h)];
      const auto q = tr.queries.block(b * n, h * dh, n, dh);
      const auto k = tr.keys.block(b * n, h * dh, n, dh);
      const auto v = tr.values.block(b * n, h * dh, n, dh);
      const auto d_out = d_heads.block(b * n, h * dh, n, dh);
      const Tensor2D d_probs = d_out * v.transpose();
      dv.block(b * n, h * dh, n, dh).noalias() = probs.transpose() * d_out;
      Tensor2D d_logits = probs.cwiseProduct(d_probs);
      const Eigen::VectorXd row_dot = d_logits.rowwise().sum();
      d_logits -= probs.cwiseProduct(row_dot.replicate(1, n));
      d_logits *= inv_sqrt;
      dq.block(b * n, h * dh, n, dh).noalias() = d_logits * k;
      dk.block(b * n, h * dh, n, dh).noalias() = d_logits.transpose() * q;
    }
  }
  Tensor2D d_stacked = nn::linear_backward(tr.stacked, dq, query_, mode);
  d_stacked += nn::linear_backward(tr.stacked, dk, key_, mode);
  d_stacked += nn::linear_backward(tr.stacked, dv, value_, mode);

  std::vector<Tensor2D> out(static_cast<std::size_t>(n), Tensor2D(batch, d));
  for (Index b = 0; b < batch; ++b) {
    for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)].row(b) = d_stacked.row(b * n + i);
  }
  return out;
}

}  // namespace fairvfl::models
