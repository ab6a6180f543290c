#include "fairvfl/nn/adam.hpp"

#include "fairvfl/error.hpp"

#include <cmath>

namespace fairvfl::nn {

void adam_update(const BlockList& blocks, AdamState& state) {
  if (state.moments.empty()) {
    state.moments.reserve(blocks.size());
    for (const auto* b : blocks) {
      state.moments.push_back({Tensor2D::Zero(b->weights.rows(), b->weights.cols()),
                               Tensor2D::Zero(b->weights.rows(), b->weights.cols()),
                               RowVector::Zero(b->bias.size()), RowVector::Zero(b->bias.size())});
    }
  }
  if (state.moments.size() != blocks.size()) {
    throw Error(ErrorKind::Dimension, "Adam state tracks " + std::to_string(state.moments.size()) +
                                          " blocks but " + std::to_string(blocks.size()) + " were given");
  }

  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  auto step = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    param.array() -= cfg.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + cfg.epsilon);
  };

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto* b = blocks[i];
    auto& mo = state.moments[i];
    if (mo.first_weights.rows() != b->weights.rows() || mo.first_weights.cols() != b->weights.cols() ||
        mo.first_bias.size() != b->bias.size()) {
      throw Error(ErrorKind::Dimension, "Adam moments for '" + b->name + "' do not match its shape " +
                                            shape_string(b->weights));
    }
    step(b->weights, b->grad_weights, mo.first_weights, mo.second_weights);
    if (b->bias.size() > 0) step(b->bias, b->grad_bias, mo.first_bias, mo.second_bias);
  }
}

}  // namespace fairvfl::nn
