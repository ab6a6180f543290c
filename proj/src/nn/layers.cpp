#include "fairvfl/nn/layers.hpp"

#include "fairvfl/error.hpp"

namespace fairvfl::nn {

Tensor2D linear_forward(const Tensor2D& x, const ParamBlock& p) {
  if (x.cols() != p.weights.rows()) {
    throw Error(ErrorKind::Dimension, "linear '" + p.name + "': input " + shape_string(x) +
                                          " incompatible with weights " + shape_string(p.weights));
  }
  Tensor2D y = x * p.weights;
  if (p.bias.size() > 0) y.rowwise() += p.bias;
  return y;
}

Tensor2D linear_backward(const Tensor2D& x, const Tensor2D& dy, ParamBlock& p, ParamGrads mode) {
  if (dy.cols() != p.weights.cols() || dy.rows() != x.rows()) {
    throw Error(ErrorKind::Dimension, "linear '" + p.name + "' backward: upstream " + shape_string(dy) +
                                          " vs input " + shape_string(x) + " and weights " +
                                          shape_string(p.weights));
  }
  if (mode == ParamGrads::Accumulate) {
    p.grad_weights.noalias() += x.transpose() * dy;
    if (p.bias.size() > 0) p.grad_bias += dy.colwise().sum();
  }
  return dy * p.weights.transpose();
}

Tensor2D linear_input_grad(const Tensor2D& dy, const ParamBlock& p) {
  if (dy.cols() != p.weights.cols()) {
    throw Error(ErrorKind::Dimension, "linear '" + p.name + "' input gradient: upstream " + shape_string(dy) +
                                          " vs weights " + shape_string(p.weights));
  }
  return dy * p.weights.transpose();
}

Tensor2D relu(const Tensor2D& x) { return x.cwiseMax(0.0); }

Tensor2D relu_backward(const Tensor2D& pre_activation, const Tensor2D& dy) {
  return (pre_activation.array() > 0.0).select(dy, 0.0);
}

Tensor2D dropout_apply(const Tensor2D& x, double p_drop, Rng& rng, bool training, Tensor2D* mask) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) {
    throw Error(ErrorKind::Config, "dropout probability " + std::to_string(p_drop) + " outside [0, 1)");
  }
  if (!training || p_drop == 0.0) {
    if (mask) *mask = Tensor2D::Ones(x.rows(), x.cols());
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - p_drop);
  Tensor2D m(x.rows(), x.cols());
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p_drop ? 0.0 : keep_scale;
  Tensor2D y = x.cwiseProduct(m);
  if (mask) *mask = std::move(m);
  return y;
}

Mlp2::Mlp2(const std::string& name, Index in, Index hidden, Index out, double dropout, Rng& init_rng)
    : fc1_(name + ".fc1", in, hidden), fc2_(name + ".fc2", hidden, out), dropout_(dropout) {
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorKind::Config, name + ": dropout " + std::to_string(dropout) + " outside [0, 1)");
  }
  fc1_.glorot_init(init_rng);
  fc2_.glorot_init(init_rng);
}

Tensor2D Mlp2::forward(const Tensor2D& x, const ForwardMode& mode, MlpTrace& trace) const {
  trace.input = x;
  trace.hidden_pre = linear_forward(x, fc1_);
  Tensor2D h = relu(trace.hidden_pre);
  if (mode.training && dropout_ > 0.0) {
    if (mode.dropout_rng == nullptr) throw Error(ErrorKind::Config, fc1_.name + ": training mode without an RNG");
    trace.hidden = dropout_apply(h, dropout_, *mode.dropout_rng, true, &trace.dropout_mask);
  } else {
    trace.hidden = std::move(h);
    trace.dropout_mask.resize(0, 0);
  }
  return linear_forward(trace.hidden, fc2_);
}

Tensor2D Mlp2::forward(const Tensor2D& x) const {
  return linear_forward(relu(linear_forward(x, fc1_)), fc2_);
}

Tensor2D Mlp2::backward(const Tensor2D& dy, const MlpTrace& trace, ParamGrads mode) {
  Tensor2D dh = linear_backward(trace.hidden, dy, fc2_, mode);
  if (trace.dropout_mask.size() > 0) dh = dh.cwiseProduct(trace.dropout_mask);
  dh = relu_backward(trace.hidden_pre, dh);
  return linear_backward(trace.input, dh, fc1_, mode);
}

Tensor2D Mlp2::input_grad(const Tensor2D& dy, const MlpTrace& trace) const {
  Tensor2D dh = linear_input_grad(dy, fc2_);
  if (trace.dropout_mask.size() > 0) dh = dh.cwiseProduct(trace.dropout_mask);
  dh = relu_backward(trace.hidden_pre, dh);
  return linear_input_grad(dh, fc1_);
}

}  // namespace fairvfl::nn
