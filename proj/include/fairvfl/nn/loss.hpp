#pragma once

#include "fairvfl/nn/tensor.hpp"

#include <span>
#include <vector>

namespace fairvfl::nn {

struct LossGrad {
  double loss = 0.0;
  Tensor2D grad;  // dLoss/dinput, same shape as the input
};

// Row-wise softmax with max subtraction.
Tensor2D softmax_rows(const Tensor2D& logits);

// Mean over rows of -log softmax(logits)[target]; grad = (softmax - onehot) / rows.
LossGrad softmax_cross_entropy(const Tensor2D& logits, std::span<const int> targets);

struct PairLossGrad {
  double loss = 0.0;
  Tensor2D grad_positive;
  Tensor2D grad_negative;
};

// Mean over rows of -log(exp(p) / (exp(p) + exp(n))) for single-column score
// tensors p (preimage) and n (negative). Evaluated as softplus(n - p).
PairLossGrad pairwise_softmax_loss(const Tensor2D& positive, const Tensor2D& negative);

std::vector<int> argmax_rows(const Tensor2D& t);

}  // namespace fairvfl::nn
