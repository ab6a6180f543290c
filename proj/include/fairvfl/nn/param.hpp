#pragma once

#include "fairvfl/nn/tensor.hpp"
#include "fairvfl/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fairvfl::nn {

/// Weights, bias and their gradient accumulators.
///
/// Gradients accumulate additively across backward passes; callers zero them
/// at batch boundaries. Embedding tables use an empty bias.
struct ParamBlock {
  std::string name;
  Tensor2D weights;
  RowVector bias;
  Tensor2D grad_weights;
  RowVector grad_bias;

  ParamBlock() = default;
  ParamBlock(std::string block_name, Index rows, Index cols, bool with_bias = true);

  void zero_grad();
  Index size() const noexcept { return weights.size() + bias.size(); }

  // Uniform in +-sqrt(6/(fan_in+fan_out)); bias zero.
  void glorot_init(Rng& rng);
  void set_zero();
};

using BlockList = std::vector<ParamBlock*>;
using ConstBlockList = std::vector<const ParamBlock*>;

// Captured gradient of one block.
struct BlockGrad {
  Tensor2D weights;
  RowVector bias;
};

// Gradients of a module's blocks, aligned with its block list.
using GradientSet = std::vector<BlockGrad>;

void zero_grads(const BlockList& blocks);
GradientSet capture_grads(const BlockList& blocks);
void load_grads(const BlockList& blocks, const GradientSet& grads);
GradientSet scale(const GradientSet& grads, double factor);

// max |a - b| over every entry; shapes must agree.
double max_abs_diff(const GradientSet& a, const GradientSet& b);
double max_abs(const GradientSet& g);

// Flattened parameter vector view helpers used by the gradient oracle.
Eigen::VectorXd flatten_params(const ConstBlockList& blocks);
void unflatten_params(const BlockList& blocks, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_grads(const ConstBlockList& blocks);

ConstBlockList as_const(const BlockList& blocks);

}  // namespace fairvfl::nn
