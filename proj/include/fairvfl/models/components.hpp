#pragma once

#include "fairvfl/models/config.hpp"
#include "fairvfl/nn/layers.hpp"

namespace fairvfl::models {

/// Task model M^t: unified rep -> class logits.
class TaskHead {
 public:
  TaskHead() = default;
  TaskHead(const RepWidths& widths, const ArchConfig& arch, int num_classes, Rng& init_rng);

  nn::Tensor2D logits(const nn::Tensor2D& unified, const nn::ForwardMode& mode, nn::MlpTrace& trace) const;
  nn::Tensor2D backward(const nn::Tensor2D& grad_logits, const nn::MlpTrace& trace, nn::ParamGrads mode);

  // Softmax class distribution, eval mode.
  nn::Tensor2D predict(const nn::Tensor2D& unified) const;

  nn::BlockList blocks() { return mlp_.blocks(); }
  nn::ConstBlockList blocks() const { return mlp_.blocks(); }
  nn::Mlp2& mlp() noexcept { return mlp_; }

 private:
  nn::Mlp2 mlp_;
};

/// A_i: unified rep -> protected rep of width H_i. Deterministic (no dropout).
class Mapper {
 public:
  Mapper() = default;
  Mapper(std::size_t feature, const RepWidths& widths, const ArchConfig& arch, Rng& init_rng);

  nn::Tensor2D forward(const nn::Tensor2D& unified, nn::MlpTrace& trace) const;
  nn::Tensor2D forward(const nn::Tensor2D& unified) const;
  nn::Tensor2D backward(const nn::Tensor2D& grad_protected, const nn::MlpTrace& trace, nn::ParamGrads mode);
  nn::Tensor2D input_grad(const nn::Tensor2D& grad_protected, const nn::MlpTrace& trace) const;

  nn::BlockList blocks() { return mlp_.blocks(); }
  nn::ConstBlockList blocks() const { return mlp_.blocks(); }
  std::size_t out_width() const noexcept { return static_cast<std::size_t>(mlp_.out_width()); }

 private:
  nn::Mlp2 mlp_;
};

struct PairGrad {
  nn::Tensor2D protected_rep;
  nn::Tensor2D unified;
};

/// D^c_i: scores whether a unified rep is the preimage of a protected rep.
class ContrastiveDiscriminator {
 public:
  ContrastiveDiscriminator() = default;
  ContrastiveDiscriminator(std::size_t feature, const RepWidths& widths, const ArchConfig& arch, Rng& init_rng);

  // One score per row of (protected_rep | unified).
  nn::Tensor2D score(const nn::Tensor2D& protected_rep, const nn::Tensor2D& unified, nn::MlpTrace& trace) const;
  nn::Tensor2D score(const nn::Tensor2D& protected_rep, const nn::Tensor2D& unified) const;
  PairGrad backward(const nn::Tensor2D& grad_score, const nn::MlpTrace& trace, nn::ParamGrads mode);
  PairGrad input_grad(const nn::Tensor2D& grad_score, const nn::MlpTrace& trace) const;

  nn::BlockList blocks() { return mlp_.blocks(); }
  nn::ConstBlockList blocks() const { return mlp_.blocks(); }

 private:
  std::size_t protected_width_ = 0;
  nn::Mlp2 mlp_;
};

/// D^a_i: protected rep -> sensitive-class logits.
class BiasDiscriminator {
 public:
  BiasDiscriminator() = default;
  BiasDiscriminator(std::size_t feature, const RepWidths& widths, const ArchConfig& arch, int num_classes,
                    Rng& init_rng);

  nn::Tensor2D logits(const nn::Tensor2D& protected_rep, nn::MlpTrace& trace) const;
  nn::Tensor2D backward(const nn::Tensor2D& grad_logits, const nn::MlpTrace& trace, nn::ParamGrads mode);
  nn::Tensor2D input_grad(const nn::Tensor2D& grad_logits, const nn::MlpTrace& trace) const;
  nn::Tensor2D predict(const nn::Tensor2D& protected_rep) const;

  int num_classes() const noexcept { return static_cast<int>(mlp_.out_width()); }
  nn::BlockList blocks() { return mlp_.blocks(); }
  nn::ConstBlockList blocks() const { return mlp_.blocks(); }

 private:
  nn::Mlp2 mlp_;
};

}  // namespace fairvfl::models
