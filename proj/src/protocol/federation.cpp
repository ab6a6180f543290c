#include "fairvfl/protocol/federation.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/nn/loss.hpp"

#include <cmath>
#include <limits>

namespace fairvfl::protocol {

using nn::Tensor2D;
namespace adv = fairvfl::adversarial;

TaskPlatform::TaskPlatform(const data::TaskShard& shard, models::TaskHead& head, const nn::AdamConfig& adam,
                           Rng dropout)
    : shard_(&shard), head_(&head), adam_(adam), dropout_(dropout) {}

TaskPlatform::Step TaskPlatform::train(std::span<const std::uint64_t> ids, const Tensor2D& unified, bool instrument) {
  const std::vector<int> labels = shard_->labels(ids);
  nn::MlpTrace trace;
  const Tensor2D logits = head_->logits(unified, nn::ForwardMode::train(dropout_), trace);
  const nn::LossGrad lg = nn::softmax_cross_entropy(logits, labels);
  Step out;
  out.loss = lg.loss;
  const auto blocks = head_->blocks();
  if (instrument) {
    models::TaskHead copy = *head_;
    nn::zero_grads(copy.blocks());
    copy.backward(lg.grad, trace, nn::ParamGrads::Accumulate);
    out.component = nn::capture_grads(copy.blocks());
  }
  nn::zero_grads(blocks);
  out.grad_unified = head_->backward(lg.grad, trace, nn::ParamGrads::Accumulate);
  if (instrument) out.applied = nn::capture_grads(blocks);
  nn::adam_update(blocks, adam_);
  return out;
}

InsensitivePlatform::InsensitivePlatform(const data::InsensitiveShard& shard, models::LocalEncoder& encoder,
                                         const nn::AdamConfig& adam, Rng dropout)
    : shard_(&shard), encoder_(&encoder), adam_(adam), dropout_(dropout) {}

Tensor2D InsensitivePlatform::encode(std::span<const std::uint64_t> ids, bool training) {
  const data::PlatformBatch batch = shard_->batch(ids);
  if (training) return encoder_->forward(batch, nn::ForwardMode::train(dropout_), trace_);
  return encoder_->forward(batch);
}

nn::GradientSet InsensitivePlatform::term_gradient(const Tensor2D& grad_local) {
  const auto blocks = encoder_->blocks();
  nn::zero_grads(blocks);
  encoder_->backward(grad_local, trace_, nn::ParamGrads::Accumulate);
  auto g = nn::capture_grads(blocks);
  nn::zero_grads(blocks);
  return g;
}

nn::GradientSet InsensitivePlatform::apply(const Tensor2D& grad_local) {
  const auto blocks = encoder_->blocks();
  nn::zero_grads(blocks);
  encoder_->backward(grad_local, trace_, nn::ParamGrads::Accumulate);
  auto applied = nn::capture_grads(blocks);
  nn::adam_update(blocks, adam_);
  return applied;
}

SensitivePlatform::SensitivePlatform(const data::SensitiveShard& shard, models::BiasDiscriminator& disc,
                                     const nn::AdamConfig& adam)
    : shard_(&shard), disc_(&disc), adam_(adam) {}

SensitivePlatform::Step SensitivePlatform::discriminator_step(std::span<const std::uint64_t> ids,
                                                              const Tensor2D& protected_reps, bool instrument) {
  const std::vector<int> labels = shard_->labels(ids);
  Step out;
  if (instrument) {
    models::BiasDiscriminator copy = *disc_;
    nn::MlpTrace trace;
    const auto lg = nn::softmax_cross_entropy(copy.logits(protected_reps, trace), labels);
    nn::zero_grads(copy.blocks());
    copy.backward(lg.grad, trace, nn::ParamGrads::Accumulate);
    out.component = nn::capture_grads(copy.blocks());
  }
  out.result = adv::bias_discriminator_step(protected_reps, labels, *disc_, adam_);
  if (instrument) out.applied = nn::capture_grads(disc_->blocks());
  return out;
}

adv::ProtectedGrad SensitivePlatform::adversarial_grad(std::span<const std::uint64_t> ids,
                                                       const Tensor2D& protected_reps) const {
  const std::vector<int> labels = shard_->labels(ids);
  return adv::adversarial_grad_on_protected(protected_reps, labels, *disc_);
}

namespace {

std::vector<InsensitivePlatform> make_insensitive(const data::Shards& shards, models::ModelBundle& bundle,
                                                  const FederationConfig& cfg) {
  std::vector<InsensitivePlatform> out;
  for (std::size_t p = 0; p < shards.insensitive.size(); ++p) {
    out.emplace_back(shards.insensitive[p], bundle.encoders[p], cfg.adam,
                     Rng::stream(cfg.seed, "dropout/encoder/" + std::to_string(p)));
  }
  return out;
}

std::vector<SensitivePlatform> make_sensitive(const data::Shards& shards, models::ModelBundle& bundle,
                                              const FederationConfig& cfg) {
  std::vector<SensitivePlatform> out;
  for (std::size_t i = 0; i < shards.sensitive.size(); ++i) out.emplace_back(shards.sensitive[i], bundle.bias[i], cfg.adam);
  return out;
}

const data::Shards& checked(const data::Shards& shards, const models::ModelBundle& bundle,
                            const FederationConfig& cfg) {
  if (shards.insensitive.size() != bundle.insensitive_count()) {
    throw Error(ErrorKind::Config, std::to_string(shards.insensitive.size()) + " insensitive shards but " +
                                       std::to_string(bundle.insensitive_count()) + " encoders");
  }
  if (shards.sensitive.size() != bundle.sensitive_count()) {
    throw Error(ErrorKind::Config, std::to_string(shards.sensitive.size()) + " sensitive shards but " +
                                       std::to_string(bundle.sensitive_count()) + " mappers");
  }
  if (shards.insensitive.empty() || shards.sensitive.empty()) {
    throw Error(ErrorKind::Config, "a federation needs at least one insensitive and one sensitive platform");
  }
  cfg.weights.validate(shards.sensitive.size());
  cfg.ldp.validate();
  cfg.gradient_dp.validate();
  if (cfg.negative_pool < 1) throw Error(ErrorKind::Config, "negative pool size must be >= 1");
  return shards;
}

}  // namespace

Federation::Federation(const data::Shards& shards, models::ModelBundle& bundle, FederationConfig config)
    : shards_(&checked(shards, bundle, config)),
      bundle_(&bundle),
      config_(std::move(config)),
      ledger_(adv::SignLedger::fairvfl(shards.insensitive.size(), shards.sensitive.size(), config_.weights)),
      bus_(transcript_),
      task_(shards.task, bundle.task_head, config_.adam, Rng::stream(config_.seed, "dropout/task")),
      insensitive_(make_insensitive(shards, bundle, config_)),
      sensitive_(make_sensitive(shards, bundle, config_)),
      aggregator_adam_(config_.adam),
      mapper_adam_(shards.sensitive.size(), nn::AdamState(config_.adam)),
      contrastive_adam_(shards.sensitive.size(), nn::AdamState(config_.adam)),
      negatives_rng_(Rng::stream(config_.seed, "negatives")),
      ldp_train_rng_(Rng::stream(config_.seed, "ldp/train")),
      ldp_serve_rng_(Rng::stream(config_.seed, "ldp/serve")),
      gradient_dp_rng_(Rng::stream(config_.seed, "ldp/gradients")) {}

Message Federation::make(PlatformId from, PlatformId to, PayloadKind kind, Tensor2D payload) const {
  Message m;
  m.round = current_round_;
  m.sender = from;
  m.receiver = to;
  m.kind = kind;
  m.tensor = std::move(payload);
  return m;
}

Tensor2D Federation::maybe_gradient_noise(const Tensor2D& g, bool& perturbed) {
  perturbed = config_.gradient_dp.enabled;
  if (!perturbed) return g;
  return ldp_perturb(g, config_.gradient_dp, gradient_dp_rng_);
}

void Federation::check(const std::string& group, const nn::GradientSet& applied, const adv::NamedGradients& parts,
                       RoundReport& report) const {
  const double dev = ledger_.verify(group, applied, parts);
  report.ledger_max_deviation = std::max(report.ledger_max_deviation, dev);
  ++report.ledger_checks;
}

void Federation::fairness_step(std::size_t i, const Tensor2D& unified,
                               const RoundOptions& options, RoundReport& report, Tensor2D& adversarial_grad) {
  const bool instrument = options.instrument_ledger;
  const PlatformId server = PlatformId::server();
  const PlatformId sensitive = PlatformId::sensitive(i);
  const auto idx = std::to_string(i);
  models::Mapper& mapper = bundle_->mappers[i];
  models::ContrastiveDiscriminator& disc = bundle_->contrastive[i];
  const auto mapper_blocks = mapper.blocks();

  const Message ids_msg = bus_.receive(sensitive, PayloadKind::SampleIds, PlatformId::task());

  nn::MlpTrace mtrace;
  Tensor2D a = mapper.forward(unified, mtrace);
  const auto ctx = adv::ContrastiveContext::build(a, unified, config_.negative_pool, negatives_rng_);

  nn::GradientSet disc_component;
  if (instrument) {
    models::ContrastiveDiscriminator copy = disc;
    nn::MlpTrace tp, tn;
    const auto pos = copy.score(ctx.protected_reps, ctx.unified, tp);
    const auto neg = copy.score(ctx.protected_reps, ctx.negative_unified(), tn);
    const auto pl = nn::pairwise_softmax_loss(pos, neg);
    nn::zero_grads(copy.blocks());
    copy.backward(pl.grad_positive, tp, nn::ParamGrads::Accumulate);
    copy.backward(pl.grad_negative, tn, nn::ParamGrads::Accumulate);
    disc_component = nn::capture_grads(copy.blocks());
  }
  report.contrastive_disc[i] = adv::contrastive_discriminator_step(ctx, disc, contrastive_adam_[i]);
  if (instrument) {
    check("contrastive" + idx, nn::capture_grads(disc.blocks()), {{adv::contrastive_disc_loss(i), disc_component}},
          report);
  }

  const double gamma = config_.weights.gamma[i];
  if (gamma > 0.0) {
    const auto contrib = adv::contrastive_adversarial_grad(ctx, disc, mapper, mtrace, gamma);
    report.contrastive_adv[i] = contrib.loss;
    nn::GradientSet raw;
    if (instrument) {
      raw = adv::mapper_descent_grads(mapper, mtrace, adv::contrastive_grad_on_protected(ctx, disc).grad_protected);
    }
    nn::load_grads(mapper_blocks, contrib.grads);
    nn::adam_update(mapper_blocks, mapper_adam_[i]);
    if (instrument) check("mapper" + idx, contrib.grads, {{adv::contrastive_adv_loss(i), raw}}, report);
    a = mapper.forward(unified, mtrace);
  } else {
    report.contrastive_adv[i] = std::numeric_limits<double>::quiet_NaN();
  }

  bus_.send(make(server, sensitive, PayloadKind::ProtectedRepUpload, a));
  {
    const Message up = bus_.receive(sensitive, PayloadKind::ProtectedRepUpload, server);
    const auto step = sensitive_[i].discriminator_step(ids_msg.ids, up.tensor, instrument);
    report.bias_disc[i] = step.result.loss;
    if (instrument) check("bias" + idx, step.applied, {{adv::bias_disc_loss(i), step.component}}, report);
    bool perturbed = false;
    Message down = make(sensitive, server, PayloadKind::BiasDiscGradDown,
                        maybe_gradient_noise(step.result.grad_protected, perturbed));
    down.perturbed = perturbed;
    bus_.send(std::move(down));
  }
  {
    const Message down = bus_.receive(server, PayloadKind::BiasDiscGradDown, sensitive);
    const nn::GradientSet applied = adv::mapper_descent_grads(mapper, mtrace, down.tensor);
    nn::GradientSet component;
    if (instrument) {
      models::Mapper copy = mapper;
      nn::zero_grads(copy.blocks());
      copy.backward(down.tensor, mtrace, nn::ParamGrads::Accumulate);
      component = nn::capture_grads(copy.blocks());
    }
    nn::load_grads(mapper_blocks, applied);
    nn::adam_update(mapper_blocks, mapper_adam_[i]);
    if (instrument) check("mapper" + idx, applied, {{adv::bias_disc_loss(i), component}}, report);
  }

  a = mapper.forward(unified, mtrace);
  bus_.send(make(server, sensitive, PayloadKind::ProtectedRepUpload, a));
  {
    const Message up = bus_.receive(sensitive, PayloadKind::ProtectedRepUpload, server);
    const auto g = sensitive_[i].adversarial_grad(ids_msg.ids, up.tensor);
    report.adversarial[i] = g.loss;
    bool perturbed = false;
    Message down = make(sensitive, server, PayloadKind::AdvGradDown, maybe_gradient_noise(g.grad_protected, perturbed));
    down.perturbed = perturbed;
    bus_.send(std::move(down));
  }
  const Message down = bus_.receive(server, PayloadKind::AdvGradDown, sensitive);
  adversarial_grad = mapper.input_grad(down.tensor, mtrace);
}

RoundReport Federation::run_training_round(std::span<const std::uint64_t> ids, const RoundOptions& options) {
  if (ids.size() < 2) throw Error(ErrorKind::Protocol, "contrastive learning requires >=2 samples");
  if (options.instrument_ledger && config_.gradient_dp.enabled) {
    throw Error(ErrorKind::Config, "ledger instrumentation needs noise-free gradients (disable gradient DP)");
  }
  current_round_ = next_round_++;
  const std::size_t n = insensitive_.size();
  const std::size_t m = sensitive_.size();
  const bool instrument = options.instrument_ledger;
  const PlatformId task = PlatformId::task();
  const PlatformId server = PlatformId::server();

  RoundReport report;
  report.round = current_round_;
  report.contrastive_disc.assign(m, std::numeric_limits<double>::quiet_NaN());
  report.contrastive_adv = report.bias_disc = report.adversarial = report.contrastive_disc;

  try {
    const std::vector<std::uint64_t> id_list(ids.begin(), ids.end());
    auto ids_message = [&](PlatformId to) {
      Message msg;
      msg.round = current_round_;
      msg.sender = task;
      msg.receiver = to;
      msg.kind = PayloadKind::SampleIds;
      msg.ids = id_list;
      return msg;
    };
    for (std::size_t p = 0; p < n; ++p) bus_.send(ids_message(PlatformId::insensitive(p)));
    if (config_.fairness) {
      for (std::size_t i = 0; i < m; ++i) bus_.send(ids_message(PlatformId::sensitive(i)));
    }

    for (std::size_t p = 0; p < n; ++p) {
      const PlatformId me = PlatformId::insensitive(p);
      const Message msg = bus_.receive(me, PayloadKind::SampleIds, task);
      bus_.send(make(me, server, PayloadKind::LocalRepUpload, insensitive_[p].encode(msg.ids, true)));
    }
    std::vector<Tensor2D> local(n);
    for (std::size_t p = 0; p < n; ++p) {
      local[p] = bus_.receive(server, PayloadKind::LocalRepUpload, PlatformId::insensitive(p)).tensor;
    }
    models::AggregatorTrace atrace;
    const Tensor2D s = bundle_->aggregator.forward(local, atrace);

    {
      Message up = make(server, task, PayloadKind::UnifiedRepToTask, s);
      if (config_.ldp.enabled && config_.ldp.perturb_training) {
        up.tensor = ldp_perturb(s, config_.ldp, ldp_train_rng_);
        up.perturbed = true;
      }
      bus_.send(std::move(up));
    }
    {
      const Message up = bus_.receive(task, PayloadKind::UnifiedRepToTask, server);
      auto step = task_.train(id_list, up.tensor, instrument);
      report.task_loss = step.loss;
      if (!std::isfinite(step.loss)) {
        throw NumericFailure("non-finite task loss", static_cast<long long>(current_round_));
      }
      if (instrument) check("task_head", step.applied, {{adv::task_loss(), step.component}}, report);
      bool perturbed = false;
      Message down = make(task, server, PayloadKind::TaskGradDown, maybe_gradient_noise(step.grad_unified, perturbed));
      down.perturbed = perturbed;
      bus_.send(std::move(down));
    }
    Tensor2D task_grad = bus_.receive(server, PayloadKind::TaskGradDown, task).tensor;
    if (options.detach_task_grad) task_grad.setZero();

    std::vector<Tensor2D> adversarial_grads(m);
    Tensor2D overall;
    if (config_.fairness) {
      for (std::size_t i = 0; i < m; ++i) fairness_step(i, s, options, report, adversarial_grads[i]);
      overall = adv::combine_overall_grad(task_grad, adversarial_grads, config_.weights);
    } else {
      overall = task_grad;
    }
    if (!nn::all_finite(overall)) {
      throw NumericFailure("non-finite gradient on the unified representation", static_cast<long long>(current_round_));
    }

    auto& aggregator = bundle_->aggregator;
    const auto agg_blocks = aggregator.blocks();
    std::vector<std::pair<std::string, std::vector<Tensor2D>>> local_terms;
    adv::NamedGradients agg_parts;
    if (instrument) {
      auto term = [&](const std::string& name, const Tensor2D& g) {
        nn::zero_grads(agg_blocks);
        local_terms.emplace_back(name, aggregator.backward(g, atrace, nn::ParamGrads::Accumulate));
        agg_parts.emplace_back(name, nn::capture_grads(agg_blocks));
      };
      term(adv::task_loss(), task_grad);
      if (config_.fairness) {
        for (std::size_t i = 0; i < m; ++i) term(adv::adversarial_loss(i), adversarial_grads[i]);
      }
    }
    nn::zero_grads(agg_blocks);
    const std::vector<Tensor2D> local_grads = aggregator.backward(overall, atrace, nn::ParamGrads::Accumulate);
    if (instrument) check("aggregator", nn::capture_grads(agg_blocks), agg_parts, report);
    nn::adam_update(agg_blocks, aggregator_adam_);

    for (std::size_t p = 0; p < n; ++p) {
      bool perturbed = false;
      Message down = make(server, PlatformId::insensitive(p), PayloadKind::LocalRepGradDown,
                          maybe_gradient_noise(local_grads[p], perturbed));
      down.perturbed = perturbed;
      bus_.send(std::move(down));
    }
    for (std::size_t p = 0; p < n; ++p) {
      const Message down = bus_.receive(PlatformId::insensitive(p), PayloadKind::LocalRepGradDown, server);
      adv::NamedGradients parts;
      if (instrument) {
        for (const auto& [name, grads] : local_terms) parts.emplace_back(name, insensitive_[p].term_gradient(grads[p]));
      }
      const auto applied = insensitive_[p].apply(down.tensor);
      if (instrument) check("encoder" + std::to_string(p), applied, parts, report);
    }
    if (!bus_.idle()) throw ProtocolViolation("undelivered messages at the end of round " + std::to_string(current_round_));
  } catch (const NumericFailure& e) {
    // Inner failures may carry a sample index; report the round instead.
    std::string what = e.what();
    const std::string prefix = std::string(to_string(ErrorKind::Numeric)) + " error: ";
    if (what.starts_with(prefix)) what.erase(0, prefix.size());
    throw NumericFailure(what + " (round " + std::to_string(current_round_) + ")", static_cast<long long>(current_round_));
  }
  return report;
}

Tensor2D Federation::serve(std::span<const std::uint64_t> ids) {
  current_round_ = next_round_++;
  const std::size_t n = insensitive_.size();
  const PlatformId task = PlatformId::task();
  const PlatformId server = PlatformId::server();
  const std::vector<std::uint64_t> id_list(ids.begin(), ids.end());
  for (std::size_t p = 0; p < n; ++p) {
    Message msg;
    msg.round = current_round_;
    msg.sender = task;
    msg.receiver = PlatformId::insensitive(p);
    msg.kind = PayloadKind::SampleIds;
    msg.ids = id_list;
    bus_.send(std::move(msg));
  }
  for (std::size_t p = 0; p < n; ++p) {
    const PlatformId me = PlatformId::insensitive(p);
    const Message msg = bus_.receive(me, PayloadKind::SampleIds, task);
    bus_.send(make(me, server, PayloadKind::LocalRepUpload, insensitive_[p].encode(msg.ids, false)));
  }
  std::vector<Tensor2D> local(n);
  for (std::size_t p = 0; p < n; ++p) {
    local[p] = bus_.receive(server, PayloadKind::LocalRepUpload, PlatformId::insensitive(p)).tensor;
  }
  Message up = make(server, task, PayloadKind::UnifiedRepToTask, bundle_->aggregator.forward(local));
  if (config_.ldp.enabled) {
    up.tensor = ldp_perturb(up.tensor, config_.ldp, ldp_serve_rng_);
    up.perturbed = true;
  }
  bus_.send(std::move(up));
  const Message got = bus_.receive(task, PayloadKind::UnifiedRepToTask, server);
  return task_.predict(got.tensor);
}

Tensor2D compose_unified(const models::ModelBundle& bundle, const data::Shards& shards,
                         std::span<const std::uint64_t> ids) {
  std::vector<Tensor2D> local;
  for (std::size_t p = 0; p < bundle.encoders.size(); ++p) {
    local.push_back(bundle.encoders[p].forward(shards.insensitive.at(p).batch(ids)));
  }
  return bundle.aggregator.forward(local);
}

Tensor2D compose_predict(const models::ModelBundle& bundle, const data::Shards& shards,
                         std::span<const std::uint64_t> ids) {
  return bundle.task_head.predict(compose_unified(bundle, shards, ids));
}

models::BundleLayout layout_for(const data::Shards& shards) {
  models::BundleLayout layout;
  for (const auto& s : shards.insensitive) layout.platform_schemas.push_back(s.schema());
  for (const auto& s : shards.sensitive) layout.sensitive_classes.push_back(s.column().num_classes);
  layout.task_classes = shards.task.num_classes();
  return layout;
}

}  // namespace fairvfl::protocol
