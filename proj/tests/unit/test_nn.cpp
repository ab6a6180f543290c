#include "support.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/nn/adam.hpp"
#include "fairvfl/nn/layers.hpp"
#include "fairvfl/nn/loss.hpp"

#include <doctest.h>

#include <cmath>

using namespace fairvfl;
using namespace fairvfl::nn;
using fvt::random_tensor;

constexpr int kSeeds = 20;
constexpr double kTol = 1e-4;

TEST_CASE("linear forward: identity and zero-input cases") {
  ParamBlock p("fc", 2, 2);
  p.weights.setIdentity();
  p.bias.setZero();
  Tensor2D x = Tensor2D::Identity(2, 2);
  CHECK(linear_forward(x, p) == Tensor2D::Identity(2, 2));

  Rng rng(3);
  ParamBlock q("fc", 3, 2);
  q.glorot_init(rng);
  q.bias << 1.0, 1.0;
  const Tensor2D y = linear_forward(Tensor2D::Zero(4, 3), q);
  for (Index r = 0; r < y.rows(); ++r) CHECK(y.row(r) == q.bias);
}

TEST_CASE("linear rejects mismatched input width") {
  ParamBlock p("fc", 3, 2);
  CHECK_THROWS_AS(linear_forward(Tensor2D::Zero(2, 4), p), Error);
}

TEST_CASE("linear backward matches finite differences over 20 seeds") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed);
    ParamBlock p("fc", 5, 4);
    p.glorot_init(rng);
    p.bias = random_tensor(rng, 1, 4).row(0);
    const Tensor2D x = random_tensor(rng, 6, 5);
    const Tensor2D w = random_tensor(rng, 6, 4);
    const double perr = fvt::param_grad_error(
        {&p}, [&] { return fvt::readout(linear_forward(x, p), w); },
        [&] { linear_backward(x, w, p, ParamGrads::Accumulate); });
    CHECK(perr < kTol);
    const Tensor2D dx = linear_input_grad(w, p);
    const double xerr = fvt::input_grad_error(x, dx, [&](const Tensor2D& v) { return fvt::readout(linear_forward(v, p), w); });
    CHECK(xerr < kTol);
    ParamBlock copy = p;
    copy.zero_grad();
    CHECK(linear_backward(x, w, copy, ParamGrads::Skip) == dx);
    CHECK(copy.grad_weights.isZero());
  }
}

TEST_CASE("relu backward matches finite differences over 20 seeds") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(100 + seed);
    const Tensor2D x = random_tensor(rng, 5, 7);
    const Tensor2D w = random_tensor(rng, 5, 7);
    const Tensor2D dx = relu_backward(x, w);
    CHECK(fvt::input_grad_error(x, dx, [&](const Tensor2D& v) { return fvt::readout(relu(v), w); }) < kTol);
  }
}

TEST_CASE("two-layer perceptron with dropout matches finite differences over 20 seeds") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng init(200 + seed);
    Mlp2 mlp("mlp", 4, 6, 3, 0.2, init);
    Rng data(300 + seed);
    const Tensor2D x = random_tensor(data, 5, 4);
    const Tensor2D w = random_tensor(data, 5, 3);
    auto loss = [&](const Tensor2D& in) {
      Rng drop(seed);
      MlpTrace t;
      return fvt::readout(mlp.forward(in, ForwardMode::train(drop), t), w);
    };
    MlpTrace trace;
    Rng drop(seed);
    mlp.forward(x, ForwardMode::train(drop), trace);
    const double perr = fvt::param_grad_error(
        mlp.blocks(), [&] { return loss(x); }, [&] { mlp.backward(w, trace, ParamGrads::Accumulate); });
    CHECK(perr < kTol);
    const Tensor2D dx = mlp.input_grad(w, trace);
    CHECK(fvt::input_grad_error(x, dx, loss) < kTol);
  }
}

TEST_CASE("softmax cross-entropy: closed-form values") {
  Tensor2D logits(1, 2);
  logits << 0.0, 0.0;
  const std::vector<int> y{0};
  CHECK(softmax_cross_entropy(logits, y).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  logits << 30.0, 0.0;
  CHECK(softmax_cross_entropy(logits, y).loss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(softmax_cross_entropy(logits, y).loss < 1e-12);
}

TEST_CASE("softmax cross-entropy rejects out-of-range labels") {
  const std::vector<int> y{2};
  CHECK_THROWS_AS(softmax_cross_entropy(Tensor2D::Zero(1, 2), y), Error);
}

TEST_CASE("softmax cross-entropy gradient matches finite differences over 20 seeds") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(400 + seed);
    const Tensor2D logits = random_tensor(rng, 6, 5, 3.0);
    const auto y = fvt::random_labels(rng, 6, 5);
    const LossGrad lg = softmax_cross_entropy(logits, y);
    CHECK(fvt::input_grad_error(logits, lg.grad, [&](const Tensor2D& v) { return softmax_cross_entropy(v, y).loss; }) <
          kTol);
  }
}

TEST_CASE("pairwise softmax loss: value and gradient") {
  Tensor2D p = Tensor2D::Zero(3, 1), n = Tensor2D::Zero(3, 1);
  CHECK(pairwise_softmax_loss(p, n).loss == doctest::Approx(std::log(2.0)));
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(500 + seed);
    p = random_tensor(rng, 7, 1, 4.0);
    n = random_tensor(rng, 7, 1, 4.0);
    const auto pl = pairwise_softmax_loss(p, n);
    // -log(e^p / (e^p + e^n)), evaluated naively as the oracle.
    double naive = 0.0;
    for (Index r = 0; r < 7; ++r) naive += -std::log(std::exp(p(r, 0)) / (std::exp(p(r, 0)) + std::exp(n(r, 0))));
    CHECK(pl.loss == doctest::Approx(naive / 7.0).epsilon(1e-12));
    CHECK(fvt::input_grad_error(p, pl.grad_positive, [&](const Tensor2D& v) { return pairwise_softmax_loss(v, n).loss; }) <
          kTol);
    CHECK(fvt::input_grad_error(n, pl.grad_negative, [&](const Tensor2D& v) { return pairwise_softmax_loss(p, v).loss; }) <
          kTol);
  }
}

TEST_CASE("softmax rows are non-negative and sum to one") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(600 + seed);
    const Tensor2D probs = softmax_rows(random_tensor(rng, 9, 4, 1e3));
    CHECK((probs.array() >= 0.0).all());
    for (Index r = 0; r < probs.rows(); ++r) CHECK(std::abs(probs.row(r).sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("adam: zero gradient is a fixed point") {
  Rng rng(1);
  ParamBlock p("w", 3, 3);
  p.glorot_init(rng);
  const Tensor2D before = p.weights;
  p.zero_grad();
  AdamState state(AdamConfig{});
  for (int k = 0; k < 5; ++k) adam_update({&p}, state);
  CHECK(p.weights == before);
}

TEST_CASE("adam: first two steps follow the closed form") {
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  ParamBlock p("w", 1, 1, false);
  p.weights(0, 0) = 0.5;
  p.grad_weights(0, 0) = 2.0;
  AdamState state(cfg);
  adam_update({&p}, state);
  const double step1 = cfg.learning_rate * 2.0 / (2.0 + cfg.epsilon);
  CHECK(0.5 - p.weights(0, 0) == doctest::Approx(step1).epsilon(1e-12));
  adam_update({&p}, state);
  CHECK(std::abs((0.5 - p.weights(0, 0)) - 2.0 * cfg.learning_rate) < 1e-6);
}

TEST_CASE("dropout: degenerate cases and empirical rate") {
  Rng rng(9);
  const Tensor2D x = random_tensor(rng, 400, 300);
  CHECK(dropout_apply(x, 0.0, rng, true) == x);
  CHECK(dropout_apply(x, 0.7, rng, false) == x);
  const Tensor2D y = dropout_apply(x, 0.2, rng, true);
  const double dropped = static_cast<double>((y.array() == 0.0).count()) / static_cast<double>(y.size());
  CHECK(std::abs(dropped - 0.2) < 0.02);
  // Survivors are scaled by 1/(1-p).
  for (Index k = 0; k < 50; ++k) {
    if (y.data()[k] != 0.0) CHECK(y.data()[k] == doctest::Approx(x.data()[k] / 0.8).epsilon(1e-12));
  }
}

TEST_CASE("finite-difference oracle: analytic functions") {
  Eigen::VectorXd x(1);
  x << 3.0;
  const auto g = finite_difference_gradient([](const Eigen::VectorXd& v) { return v(0) * v(0); }, x, 1e-4);
  CHECK(std::abs(g(0) - 6.0) < 1e-6);
  const auto c = finite_difference_gradient([](const Eigen::VectorXd&) { return 4.2; }, x, 1e-4);
  CHECK(std::abs(c(0)) < 1e-12);
}

TEST_CASE("finite-difference oracle agrees with a composed two-layer loss") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng init(700 + seed);
    Mlp2 mlp("m", 3, 5, 4, 0.0, init);
    Rng data(800 + seed);
    const Tensor2D x = random_tensor(data, 6, 3);
    const auto y = fvt::random_labels(data, 6, 4);
    MlpTrace trace;
    const LossGrad lg = softmax_cross_entropy(mlp.forward(x, ForwardMode::eval(), trace), y);
    const double err = fvt::param_grad_error(
        mlp.blocks(), [&] { return softmax_cross_entropy(mlp.forward(x), y).loss; },
        [&] { mlp.backward(lg.grad, trace, ParamGrads::Accumulate); });
    CHECK(err < kTol);
  }
}

TEST_CASE("forward and backward stay finite for inputs bounded by 1e3") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(900 + seed);
    Mlp2 mlp("m", 6, 8, 3, 0.2, rng);
    const Tensor2D x = random_tensor(rng, 10, 6, 1e3);
    MlpTrace trace;
    const Tensor2D logits = mlp.forward(x, ForwardMode::train(rng), trace);
    CHECK(all_finite(logits));
    const auto lg = softmax_cross_entropy(logits, fvt::random_labels(rng, 10, 3));
    CHECK(std::isfinite(lg.loss));
    CHECK(all_finite(mlp.backward(lg.grad, trace, ParamGrads::Accumulate)));
    const auto pl = pairwise_softmax_loss(random_tensor(rng, 10, 1, 1e3), random_tensor(rng, 10, 1, 1e3));
    CHECK(std::isfinite(pl.loss));
    CHECK(all_finite(pl.grad_positive));
  }
}

TEST_CASE("gradients accumulate across backward passes until zeroed") {
  Rng rng(11);
  ParamBlock p("fc", 3, 2);
  p.glorot_init(rng);
  const Tensor2D x = random_tensor(rng, 4, 3), dy = random_tensor(rng, 4, 2);
  p.zero_grad();
  linear_backward(x, dy, p, ParamGrads::Accumulate);
  const Tensor2D once = p.grad_weights;
  linear_backward(x, dy, p, ParamGrads::Accumulate);
  CHECK((p.grad_weights - 2.0 * once).cwiseAbs().maxCoeff() < 1e-12);
  p.zero_grad();
  CHECK(p.grad_weights.isZero());
}

TEST_CASE("glorot init stays inside its bound and is seeded") {
  Rng a(5), b(5);
  ParamBlock p("w", 30, 20), q("w", 30, 20);
  p.glorot_init(a);
  q.glorot_init(b);
  CHECK(p.weights == q.weights);
  CHECK(p.weights.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 50.0));
  CHECK(p.bias.isZero());
}
