#include "fairvfl/models/components.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/nn/loss.hpp"

namespace fairvfl::models {

using nn::Index;
using nn::Tensor2D;

namespace {

void require_feature(std::size_t feature, const RepWidths& widths) {
  if (feature >= widths.protected_widths.size()) {
    throw Error(ErrorKind::Config, "sensitive feature index " + std::to_string(feature) + " out of range (m = " +
                                       std::to_string(widths.protected_widths.size()) + ")");
  }
}

}  // namespace

TaskHead::TaskHead(const RepWidths& widths, const ArchConfig& arch, int num_classes, Rng& init_rng)
    : mlp_("task_head", static_cast<Index>(widths.unified), static_cast<Index>(arch.head_hidden), num_classes,
           arch.dropout, init_rng) {}

Tensor2D TaskHead::logits(const Tensor2D& unified, const nn::ForwardMode& mode, nn::MlpTrace& trace) const {
  return mlp_.forward(unified, mode, trace);
}

Tensor2D TaskHead::backward(const Tensor2D& grad_logits, const nn::MlpTrace& trace, nn::ParamGrads mode) {
  return mlp_.backward(grad_logits, trace, mode);
}

Tensor2D TaskHead::predict(const Tensor2D& unified) const { return nn::softmax_rows(mlp_.forward(unified)); }

Mapper::Mapper(std::size_t feature, const RepWidths& widths, const ArchConfig& arch, Rng& init_rng) {
  require_feature(feature, widths);
  mlp_ = nn::Mlp2("mapper" + std::to_string(feature), static_cast<Index>(widths.unified),
                  static_cast<Index>(arch.mapper_hidden), static_cast<Index>(widths.protected_widths[feature]), 0.0,
                  init_rng);
}

Tensor2D Mapper::forward(const Tensor2D& unified, nn::MlpTrace& trace) const {
  return mlp_.forward(unified, nn::ForwardMode::eval(), trace);
}

Tensor2D Mapper::forward(const Tensor2D& unified) const { return mlp_.forward(unified); }

Tensor2D Mapper::backward(const Tensor2D& grad_protected, const nn::MlpTrace& trace, nn::ParamGrads mode) {
  return mlp_.backward(grad_protected, trace, mode);
}

ContrastiveDiscriminator::ContrastiveDiscriminator(std::size_t feature, const RepWidths& widths,
                                                   const ArchConfig& arch, Rng& init_rng) {
  require_feature(feature, widths);
  protected_width_ = widths.protected_widths[feature];
  mlp_ = nn::Mlp2("contrastive" + std::to_string(feature), static_cast<Index>(protected_width_ + widths.unified),
                  static_cast<Index>(arch.contrastive_hidden), 1, 0.0, init_rng);
}

Tensor2D ContrastiveDiscriminator::score(const Tensor2D& protected_rep, const Tensor2D& unified,
                                         nn::MlpTrace& trace) const {
  if (protected_rep.rows() != unified.rows()) {
    throw Error(ErrorKind::Dimension, "contrastive pair rows differ: " + nn::shape_string(protected_rep) + " vs " +
                                          nn::shape_string(unified));
  }
  nn::require_cols(protected_rep, static_cast<Index>(protected_width_), "contrastive discriminator (protected)");
  Tensor2D x(protected_rep.rows(), protected_rep.cols() + unified.cols());
  x << protected_rep, unified;
  return mlp_.forward(x, nn::ForwardMode::eval(), trace);
}

Tensor2D ContrastiveDiscriminator::score(const Tensor2D& protected_rep, const Tensor2D& unified) const {
  nn::MlpTrace trace;
  return score(protected_rep, unified, trace);
}

PairGrad ContrastiveDiscriminator::backward(const Tensor2D& grad_score, const nn::MlpTrace& trace,
                                            nn::ParamGrads mode) {
  Tensor2D dx = mlp_.backward(grad_score, trace, mode);
  const auto h = static_cast<Index>(protected_width_);
  return {dx.leftCols(h), dx.rightCols(dx.cols() - h)};
}

Tensor2D Mapper::input_grad(const Tensor2D& grad_protected, const nn::MlpTrace& trace) const {
  return mlp_.input_grad(grad_protected, trace);
}

PairGrad ContrastiveDiscriminator::input_grad(const Tensor2D& grad_score, const nn::MlpTrace& trace) const {
  Tensor2D dx = mlp_.input_grad(grad_score, trace);
  const auto h = static_cast<Index>(protected_width_);
  return {dx.leftCols(h), dx.rightCols(dx.cols() - h)};
}

Tensor2D BiasDiscriminator::input_grad(const Tensor2D& grad_logits, const nn::MlpTrace& trace) const {
  return mlp_.input_grad(grad_logits, trace);
}

BiasDiscriminator::BiasDiscriminator(std::size_t feature, const RepWidths& widths, const ArchConfig& arch,
                                     int num_classes, Rng& init_rng) {
  require_feature(feature, widths);
  if (num_classes < 2) throw Error(ErrorKind::Config, "bias discriminator needs at least 2 classes");
  mlp_ = nn::Mlp2("bias" + std::to_string(feature), static_cast<Index>(widths.protected_widths[feature]),
                  static_cast<Index>(arch.bias_hidden), num_classes, 0.0, init_rng);
}

Tensor2D BiasDiscriminator::logits(const Tensor2D& protected_rep, nn::MlpTrace& trace) const {
  return mlp_.forward(protected_rep, nn::ForwardMode::eval(), trace);
}

Tensor2D BiasDiscriminator::backward(const Tensor2D& grad_logits, const nn::MlpTrace& trace, nn::ParamGrads mode) {
  return mlp_.backward(grad_logits, trace, mode);
}

Tensor2D BiasDiscriminator::predict(const Tensor2D& protected_rep) const {
  return nn::softmax_rows(mlp_.forward(protected_rep));
}

}  // namespace fairvfl::models
