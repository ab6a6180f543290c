#include "support.hpp"

#include "fairvfl/adversarial/adversarial.hpp"
#include "fairvfl/error.hpp"
#include "fairvfl/eval/eval.hpp"
#include "fairvfl/nn/adam.hpp"
#include "fairvfl/nn/loss.hpp"

#include <doctest.h>

#include <cmath>

using namespace fairvfl;
using namespace fairvfl::models;
using fvt::random_tensor;
using nn::Tensor2D;

constexpr int kSeeds = 20;
constexpr double kTol = 1e-4;

TEST_CASE("local encoder: embedding width and seeded determinism") {
  auto w = fvt::make_world(1);
  const auto& enc = w.bundle.encoders[0];
  CHECK(ArchConfig{}.embedding_width == 32);
  const auto ids = w.train_ids();
  const std::vector<std::uint64_t> batch(ids.begin(), ids.begin() + 8);
  auto pb = w.shards->insensitive[0].batch(batch);
  pb.numeric.setZero();
  if (pb.categorical.cols() > 0) pb.categorical.setConstant(1);
  const Tensor2D a = enc.forward(pb);
  auto again = fvt::make_world(1);
  CHECK(again.bundle.encoders[0].forward(pb) == a);
  for (Eigen::Index r = 1; r < a.rows(); ++r) CHECK(a.row(r) == a.row(0));
}

TEST_CASE("local encoder backward matches finite differences over 20 seeds") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    auto w = fvt::make_world(fvt::small_spec(seed, 200), 2, fvt::tiny_widths(), fvt::tiny_arch(), seed);
    auto& enc = w.bundle.encoders[seed % 2];
    const auto ids = w.train_ids();
    const std::vector<std::uint64_t> batch(ids.begin(), ids.begin() + 5);
    const auto pb = w.shards->insensitive[seed % 2].batch(batch);
    Rng rng(seed);
    const Tensor2D g = random_tensor(rng, 5, 8);
    auto loss = [&] {
      Rng drop(seed);
      EncoderTrace t;
      return fvt::readout(enc.forward(pb, nn::ForwardMode::train(drop), t), g);
    };
    EncoderTrace trace;
    Rng drop(seed);
    enc.forward(pb, nn::ForwardMode::train(drop), trace);
    CHECK(fvt::param_grad_error(enc.blocks(), loss, [&] { enc.backward(g, trace, nn::ParamGrads::Accumulate); }) < kTol);
  }
}

TEST_CASE("local encoder maps unseen codes to the unknown slot at eval, rejects them in training") {
  auto w = fvt::make_world(2);
  for (std::size_t p = 0; p < w.bundle.encoders.size(); ++p) {
    auto& enc = w.bundle.encoders[p];
    if (enc.categorical_count() == 0) continue;
    const auto ids = w.train_ids();
    const std::vector<std::uint64_t> batch(ids.begin(), ids.begin() + 3);
    auto pb = w.shards->insensitive[p].batch(batch);
    pb.categorical(0, 0) = 100000;
    auto unk = pb;
    unk.categorical(0, 0) = data::kUnknownCode;
    CHECK(enc.forward(pb) == enc.forward(unk));
    EncoderTrace t;
    Rng drop(0);
    CHECK_THROWS_AS(enc.forward(pb, nn::ForwardMode::train(drop), t), Error);
    return;
  }
  FAIL("no platform with a categorical field");
}

TEST_CASE("aggregator: a single position gets pooling weight exactly 1") {
  Rng rng(3);
  RepWidths widths = fvt::tiny_widths();
  Aggregator agg(1, widths, fvt::tiny_arch(), rng);
  AggregatorTrace trace;
  agg.forward({random_tensor(rng, 4, 8)}, trace);
  for (Eigen::Index b = 0; b < 4; ++b) CHECK(trace.pooling_weights(b, 0) == 1.0);
}

TEST_CASE("aggregator: pooling weights are a distribution and the gradient matches finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(50 + seed);
    Aggregator agg(3, fvt::tiny_widths(), fvt::tiny_arch(), rng);
    std::vector<Tensor2D> reps{random_tensor(rng, 4, 8), random_tensor(rng, 4, 8), random_tensor(rng, 4, 8)};
    const Tensor2D g = random_tensor(rng, 4, 8);
    AggregatorTrace trace;
    agg.forward(reps, trace);
    CHECK((trace.pooling_weights.array() >= 0.0).all());
    for (Eigen::Index b = 0; b < 4; ++b) CHECK(std::abs(trace.pooling_weights.row(b).sum() - 1.0) < 1e-6);

    CHECK(fvt::param_grad_error(
              agg.blocks(), [&] { return fvt::readout(agg.forward(reps), g); },
              [&] { agg.backward(g, trace, nn::ParamGrads::Accumulate); }) < kTol);
    AggregatorTrace t2;
    agg.forward(reps, t2);
    const auto dreps = agg.backward(g, t2, nn::ParamGrads::Skip);
    for (std::size_t p = 0; p < 3; ++p) {
      CHECK(fvt::input_grad_error(reps[p], dreps[p], [&](const Tensor2D& v) {
              auto r = reps;
              r[p] = v;
              return fvt::readout(agg.forward(r), g);
            }) < kTol);
    }
  }
}

TEST_CASE("aggregator rejects the wrong number of local representations") {
  Rng rng(4);
  Aggregator agg(2, fvt::tiny_widths(), fvt::tiny_arch(), rng);
  CHECK_THROWS_AS(agg.forward({random_tensor(rng, 3, 8)}), Error);
  CHECK_THROWS_AS(agg.forward({random_tensor(rng, 3, 8), random_tensor(rng, 2, 8)}), Error);
}

TEST_CASE("task head: zero init is uniform, rows sum to one, gradient matches finite differences") {
  Rng rng(5);
  TaskHead head(fvt::tiny_widths(), fvt::tiny_arch(), 2, rng);
  const Tensor2D s = random_tensor(rng, 6, 8, 5.0);
  for (Eigen::Index r = 0; r < 6; ++r) CHECK(std::abs(head.predict(s).row(r).sum() - 1.0) < 1e-6);
  for (auto* b : head.blocks()) b->set_zero();
  const Tensor2D p = head.predict(s);
  CHECK((p.array() == 0.5).all());

  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng r2(100 + seed);
    TaskHead h(fvt::tiny_widths(), fvt::tiny_arch(), 2, r2);
    const Tensor2D x = random_tensor(r2, 5, 8);
    const auto y = fvt::random_labels(r2, 5, 2);
    auto loss = [&](const Tensor2D& in) {
      Rng drop(seed);
      nn::MlpTrace t;
      return nn::softmax_cross_entropy(h.logits(in, nn::ForwardMode::train(drop), t), y).loss;
    };
    nn::MlpTrace trace;
    Rng drop(seed);
    const auto lg = nn::softmax_cross_entropy(h.logits(x, nn::ForwardMode::train(drop), trace), y);
    CHECK(fvt::param_grad_error(h.blocks(), [&] { return loss(x); },
                                [&] { h.backward(lg.grad, trace, nn::ParamGrads::Accumulate); }) < kTol);
  }
}

TEST_CASE("plain federated training reaches accuracy above 0.9 on synthetic data within 2000 steps") {
  RepWidths widths;
  widths.unified = 32;
  widths.protected_widths = {8, 8};
  ArchConfig arch = fvt::tiny_arch();
  arch.embedding_width = 8;
  arch.encoder_hidden = 32;
  arch.attention_heads = 4;
  arch.pooling_hidden = 16;
  arch.head_hidden = 16;
  auto spec = fvt::small_spec(0, 3000);
  auto w = fvt::make_world(spec, 3, widths, arch, 0);
  auto cfg = fvt::fed_config(0);
  cfg.fairness = false;
  cfg.weights = adversarial::LossWeights::zeros(2);
  protocol::Federation fed(*w.shards, w.bundle, cfg);
  std::size_t steps = 0;
  for (std::size_t epoch = 0; steps < 2000; ++epoch) {
    for (const auto& b : data::iterate_batches(w.ds, data::Split::Train, 32, 0, epoch)) {
      if (steps++ >= 2000) break;
      fed.run_training_round(b);
    }
  }
  const auto test = w.ds.ids_in(data::Split::Test);
  const auto pred = nn::argmax_rows(protocol::compose_predict(w.bundle, *w.shards, test));
  std::vector<int> truth;
  for (auto r : w.ds.rows_in(data::Split::Test)) truth.push_back(w.ds.task_labels[r]);
  const double acc = eval::task_metrics(pred, truth).accuracy;
  MESSAGE("synthetic test accuracy " << acc);
  CHECK(acc > 0.9);
}

TEST_CASE("mapper: default widths 32/64, deterministic, gradient matches finite differences") {
  Rng rng(6);
  const RepWidths def;
  ArchConfig arch;
  CHECK(Mapper(0, def, arch, rng).out_width() == 32);
  CHECK(Mapper(1, def, arch, rng).out_width() == 64);
  CHECK_THROWS_AS(Mapper(2, def, arch, rng), Error);

  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng r(200 + seed);
    Mapper m(seed % 2, fvt::tiny_widths(), fvt::tiny_arch(), r);
    const Tensor2D s = random_tensor(r, 5, 8);
    const Tensor2D g = random_tensor(r, 5, static_cast<Eigen::Index>(m.out_width()));
    CHECK(m.forward(s) == m.forward(s));
    nn::MlpTrace t;
    m.forward(s, t);
    CHECK(fvt::param_grad_error(m.blocks(), [&] { return fvt::readout(m.forward(s), g); },
                                [&] { m.backward(g, t, nn::ParamGrads::Accumulate); }) < kTol);
    CHECK(fvt::input_grad_error(s, m.input_grad(g, t), [&](const Tensor2D& v) { return fvt::readout(m.forward(v), g); }) <
          kTol);
  }
}

TEST_CASE("contrastive discriminator: zero init scores 0, gradient on (a, s, params)") {
  Rng rng(7);
  ContrastiveDiscriminator d(0, fvt::tiny_widths(), fvt::tiny_arch(), rng);
  const Tensor2D a = random_tensor(rng, 6, 4, 1e3), s = random_tensor(rng, 6, 8, 1e3);
  CHECK(nn::all_finite(d.score(a, s)));
  for (auto* b : d.blocks()) b->set_zero();
  CHECK(d.score(a, s).isZero());
  auto pool = Rng(1);
  const auto ctx = adversarial::ContrastiveContext::build(a, s, 5, pool);
  CHECK(adversarial::contrastive_loss(ctx, d) == doctest::Approx(std::log(2.0)));

  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng r(300 + seed);
    ContrastiveDiscriminator disc(1, fvt::tiny_widths(), fvt::tiny_arch(), r);
    const Tensor2D pa = random_tensor(r, 5, 6), ps = random_tensor(r, 5, 8), g = random_tensor(r, 5, 1);
    nn::MlpTrace t;
    disc.score(pa, ps, t);
    CHECK(fvt::param_grad_error(disc.blocks(), [&] { return fvt::readout(disc.score(pa, ps), g); },
                                [&] { disc.backward(g, t, nn::ParamGrads::Accumulate); }) < kTol);
    const PairGrad pg = disc.input_grad(g, t);
    CHECK(fvt::input_grad_error(pa, pg.protected_rep,
                                [&](const Tensor2D& v) { return fvt::readout(disc.score(v, ps), g); }) < kTol);
    CHECK(fvt::input_grad_error(ps, pg.unified, [&](const Tensor2D& v) { return fvt::readout(disc.score(pa, v), g); }) <
          kTol);
  }
}

TEST_CASE("bias discriminator: zero init uniform, gradient check, one-hot inputs become separable") {
  Rng rng(8);
  RepWidths widths = fvt::tiny_widths();
  BiasDiscriminator d(1, widths, fvt::tiny_arch(), 5, rng);
  const Tensor2D a = random_tensor(rng, 7, 6, 3.0);
  for (Eigen::Index r = 0; r < 7; ++r) CHECK(std::abs(d.predict(a).row(r).sum() - 1.0) < 1e-6);
  for (auto* b : d.blocks()) b->set_zero();
  CHECK((d.predict(a).array() == 0.2).all());

  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng r(400 + seed);
    BiasDiscriminator disc(0, widths, fvt::tiny_arch(), 3, r);
    const Tensor2D x = random_tensor(r, 6, 4);
    const auto y = fvt::random_labels(r, 6, 3);
    nn::MlpTrace t;
    const auto lg = nn::softmax_cross_entropy(disc.logits(x, t), y);
    CHECK(fvt::param_grad_error(disc.blocks(),
                                [&] {
                                  nn::MlpTrace tt;
                                  return nn::softmax_cross_entropy(disc.logits(x, tt), y).loss;
                                },
                                [&] { disc.backward(lg.grad, t, nn::ParamGrads::Accumulate); }) < kTol);
  }

  // a_i = one-hot of a 3-class label.
  RepWidths onehot;
  onehot.unified = 8;
  onehot.protected_widths = {3};
  Rng r(9);
  BiasDiscriminator disc(0, onehot, fvt::tiny_arch(), 3, r);
  nn::AdamConfig cfg;
  cfg.learning_rate = 1e-2;
  nn::AdamState adam(cfg);
  const auto y = fvt::random_labels(r, 64, 3);
  Tensor2D x = Tensor2D::Zero(64, 3);
  for (int k = 0; k < 64; ++k) x(k, y[k]) = 1.0;
  for (int step = 0; step < 300; ++step) adversarial::bias_discriminator_step(x, y, disc, adam);
  const auto pred = nn::argmax_rows(disc.predict(x));
  CHECK(eval::task_metrics(pred, y).accuracy == doctest::Approx(1.0));
}

TEST_CASE("map_protected and predict are pure") {
  auto w = fvt::make_world(10);
  const auto ids = w.train_ids();
  const std::vector<std::uint64_t> batch(ids.begin(), ids.begin() + 16);
  const Tensor2D s = protocol::compose_unified(w.bundle, *w.shards, batch);
  CHECK(protocol::compose_unified(w.bundle, *w.shards, batch) == s);
  CHECK(map_protected(w.bundle, s, 0) == map_protected(w.bundle, s, 0));
  CHECK(w.bundle.task_head.predict(s) == w.bundle.task_head.predict(s));
  CHECK_THROWS_AS(map_protected(w.bundle, s, 2), Error);
}

TEST_CASE("changing only sensitive labels changes no forward value") {
  auto w = fvt::make_world(11);
  auto flipped = w.ds;
  for (auto& col : flipped.sensitive) {
    for (auto& y : col.labels) y = (y + 1) % col.num_classes;
  }
  const auto shards2 = data::partition_vertical(flipped, w.assignment);
  const auto ids = w.ds.ids_in(data::Split::Test);
  const Tensor2D s1 = protocol::compose_unified(w.bundle, *w.shards, ids);
  const Tensor2D s2 = protocol::compose_unified(w.bundle, shards2, ids);
  CHECK(s1 == s2);
  CHECK(protocol::compose_predict(w.bundle, *w.shards, ids) == protocol::compose_predict(w.bundle, shards2, ids));
}

TEST_CASE("checkpoint round trip is bitwise and width mismatches are rejected") {
  const auto dir = fvt::scratch_dir("models_ckpt");
  auto w = fvt::make_world(12);
  const auto path = dir / "b.bin";
  save_checkpoint(w.bundle, path);
  auto other = ModelBundle::create(protocol::layout_for(*w.shards), fvt::tiny_widths(), fvt::tiny_arch(), 99);
  CHECK(bundle_digest(other) != bundle_digest(w.bundle));
  load_checkpoint(other, path);
  CHECK(bundle_digest(other) == bundle_digest(w.bundle));
  CHECK(read_checkpoint_widths(path) == fvt::tiny_widths());

  RepWidths wide = fvt::tiny_widths();
  wide.protected_widths = {4, 8};
  auto mismatched = ModelBundle::create(protocol::layout_for(*w.shards), wide, fvt::tiny_arch(), 0);
  try {
    load_checkpoint(mismatched, path);
    FAIL("expected a checkpoint error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Checkpoint);
  }
  fvt::slurp(path);
  {
    std::ofstream trunc(dir / "short.bin", std::ios::binary);
    trunc << fvt::slurp(path).substr(0, 40);
  }
  CHECK_THROWS_AS(load_checkpoint(other, dir / "short.bin"), Error);
}

TEST_CASE("config validation rejects inconsistent widths") {
  RepWidths w;
  w.unified = 0;
  CHECK_THROWS_AS(w.validate(), Error);
  ArchConfig a;
  a.attention_heads = 3;  // 400 is not divisible by 3
  CHECK_THROWS_AS(a.validate(RepWidths{}), Error);
  a.attention_heads = 4;
  a.dropout = 1.0;
  CHECK_THROWS_AS(a.validate(RepWidths{}), Error);
  const RepWidths def;
  CHECK(RepWidths::from_json(def.to_json()) == def);
  CHECK(ArchConfig::from_json(ArchConfig{}.to_json()) == ArchConfig{});
}
