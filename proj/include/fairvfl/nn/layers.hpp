#pragma once

#include "fairvfl/nn/param.hpp"
#include "fairvfl/nn/tensor.hpp"
#include "fairvfl/rng.hpp"

namespace fairvfl::nn {

// Whether a backward pass accumulates into parameter gradients or only
// propagates to its inputs (frozen module).
enum class ParamGrads { Accumulate, Skip };

struct ForwardMode {
  bool training = false;
  Rng* dropout_rng = nullptr;  // required when training with dropout > 0

  static ForwardMode eval() { return {}; }
  static ForwardMode train(Rng& rng) { return {true, &rng}; }
};

// y = x W + b, bias broadcast over rows.
Tensor2D linear_forward(const Tensor2D& x, const ParamBlock& p);

// Returns dL/dx; accumulates dL/dW = x^T dy and dL/db = colsum(dy) unless skipped.
Tensor2D linear_backward(const Tensor2D& x, const Tensor2D& dy, ParamBlock& p, ParamGrads mode);

// dL/dx only; parameters are read, never written.
Tensor2D linear_input_grad(const Tensor2D& dy, const ParamBlock& p);

Tensor2D relu(const Tensor2D& x);
// dy masked by (pre_activation > 0).
Tensor2D relu_backward(const Tensor2D& pre_activation, const Tensor2D& dy);

// Inverted dropout. In training mode entries survive with probability 1 - p_drop
// and are scaled by 1/(1 - p_drop); in eval mode the input is returned unchanged.
// When mask is non-null it receives the per-entry multiplier.
Tensor2D dropout_apply(const Tensor2D& x, double p_drop, Rng& rng, bool training,
                       Tensor2D* mask = nullptr);

struct MlpTrace {
  Tensor2D input;
  Tensor2D hidden_pre;
  Tensor2D hidden;  // post-ReLU, post-dropout
  Tensor2D dropout_mask;
};

/// Two-layer perceptron: in -> hidden (ReLU, optional dropout) -> out.
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(const std::string& name, Index in, Index hidden, Index out, double dropout, Rng& init_rng);

  Tensor2D forward(const Tensor2D& x, const ForwardMode& mode, MlpTrace& trace) const;
  Tensor2D forward(const Tensor2D& x) const;  // eval, no trace
  Tensor2D backward(const Tensor2D& dy, const MlpTrace& trace, ParamGrads mode);
  // Frozen-module backward: gradient on the input only.
  Tensor2D input_grad(const Tensor2D& dy, const MlpTrace& trace) const;

  BlockList blocks() { return {&fc1_, &fc2_}; }
  ConstBlockList blocks() const { return {&fc1_, &fc2_}; }

  Index in_width() const noexcept { return fc1_.weights.rows(); }
  Index out_width() const noexcept { return fc2_.weights.cols(); }
  double dropout() const noexcept { return dropout_; }

  ParamBlock& first() noexcept { return fc1_; }
  ParamBlock& second() noexcept { return fc2_; }

 private:
  ParamBlock fc1_;
  ParamBlock fc2_;
  double dropout_ = 0.0;
};

}  // namespace fairvfl::nn
