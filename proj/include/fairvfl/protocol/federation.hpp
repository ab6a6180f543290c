#pragma once

#include "fairvfl/adversarial/adversarial.hpp"
#include "fairvfl/data/batching.hpp"
#include "fairvfl/data/partition.hpp"
#include "fairvfl/models/bundle.hpp"
#include "fairvfl/nn/adam.hpp"
#include "fairvfl/protocol/audit.hpp"
#include "fairvfl/protocol/message.hpp"

#include <span>
#include <vector>

namespace fairvfl::protocol {

struct FederationConfig {
  adversarial::LossWeights weights;
  bool fairness = true;          // false: plain VFL, the sensitive platforms stay idle
  LdpConfig ldp;
  LdpConfig gradient_dp{1.0, 8.0, false, true};  // noise on gradient messages, off by default
  nn::AdamConfig adam;
  std::size_t negative_pool = 5;
  std::uint64_t seed = 0;
};

struct RoundOptions {
  bool detach_task_grad = false;   // server ignores dL^t/ds
  bool instrument_ledger = false;  // verify every update against the sign ledger
};

struct RoundReport {
  std::uint64_t round = 0;
  double task_loss = 0.0;
  std::vector<double> contrastive_disc;  // L^p per feature
  std::vector<double> contrastive_adv;   // L^c per feature (NaN when gamma = 0)
  std::vector<double> bias_disc;         // L^d per feature
  std::vector<double> adversarial;       // L^a per feature
  std::size_t ledger_checks = 0;
  double ledger_max_deviation = 0.0;
};

/// P^t: task labels and the task head.
class TaskPlatform {
 public:
  TaskPlatform(const data::TaskShard& shard, models::TaskHead& head, const nn::AdamConfig& adam, Rng dropout);

  struct Step {
    double loss = 0.0;
    nn::Tensor2D grad_unified;
    nn::GradientSet applied;
    nn::GradientSet component;
  };
  Step train(std::span<const std::uint64_t> ids, const nn::Tensor2D& unified, bool instrument);
  nn::Tensor2D predict(const nn::Tensor2D& unified) const { return head_->predict(unified); }

 private:
  const data::TaskShard* shard_;
  models::TaskHead* head_;
  nn::AdamState adam_;
  Rng dropout_;
};

/// P^b_i: a feature slice and its local encoder.
class InsensitivePlatform {
 public:
  InsensitivePlatform(const data::InsensitiveShard& shard, models::LocalEncoder& encoder, const nn::AdamConfig& adam,
                      Rng dropout);

  nn::Tensor2D encode(std::span<const std::uint64_t> ids, bool training);
  // Gradient that upstream would produce, without touching the parameters.
  nn::GradientSet term_gradient(const nn::Tensor2D& grad_local);
  // Backprop the received gradient and take one Adam step; returns what was applied.
  nn::GradientSet apply(const nn::Tensor2D& grad_local);

 private:
  const data::InsensitiveShard* shard_;
  models::LocalEncoder* encoder_;
  nn::AdamState adam_;
  Rng dropout_;
  models::EncoderTrace trace_;
};

/// P^a_i: sensitive labels and the bias discriminator.
class SensitivePlatform {
 public:
  SensitivePlatform(const data::SensitiveShard& shard, models::BiasDiscriminator& disc, const nn::AdamConfig& adam);

  struct Step {
    adversarial::ProtectedGrad result;
    nn::GradientSet applied;
    nn::GradientSet component;
  };
  Step discriminator_step(std::span<const std::uint64_t> ids, const nn::Tensor2D& protected_reps, bool instrument);
  adversarial::ProtectedGrad adversarial_grad(std::span<const std::uint64_t> ids,
                                              const nn::Tensor2D& protected_reps) const;

 private:
  const data::SensitiveShard* shard_;
  models::BiasDiscriminator* disc_;
  nn::AdamState adam_;
};

/// The simulated federation over one model bundle. Every exchange goes
/// through the bus and is logged in the transcript.
class Federation {
 public:
  Federation(const data::Shards& shards, models::ModelBundle& bundle, FederationConfig config);
  Federation(const Federation&) = delete;
  Federation& operator=(const Federation&) = delete;

  RoundReport run_training_round(std::span<const std::uint64_t> ids, const RoundOptions& options = {});
  // Class probabilities from P^t for the given ids.
  nn::Tensor2D serve(std::span<const std::uint64_t> ids);

  const Transcript& transcript() const noexcept { return transcript_; }
  Transcript& transcript() noexcept { return transcript_; }
  const FederationConfig& config() const noexcept { return config_; }
  const adversarial::SignLedger& ledger() const noexcept { return ledger_; }
  std::uint64_t rounds() const noexcept { return next_round_; }
  AuditPolicy audit_policy() const { return {config_.ldp.enabled}; }

 private:
  Message make(PlatformId from, PlatformId to, PayloadKind kind, nn::Tensor2D payload) const;
  nn::Tensor2D maybe_gradient_noise(const nn::Tensor2D& g, bool& perturbed);
  void fairness_step(std::size_t i, const nn::Tensor2D& unified,
                     const RoundOptions& options, RoundReport& report, nn::Tensor2D& adversarial_grad);
  void check(const std::string& group, const nn::GradientSet& applied, const adversarial::NamedGradients& parts,
             RoundReport& report) const;

  const data::Shards* shards_;
  models::ModelBundle* bundle_;
  FederationConfig config_;
  adversarial::SignLedger ledger_;
  Transcript transcript_;
  Bus bus_;
  TaskPlatform task_;
  std::vector<InsensitivePlatform> insensitive_;
  std::vector<SensitivePlatform> sensitive_;
  nn::AdamState aggregator_adam_;
  std::vector<nn::AdamState> mapper_adam_;
  std::vector<nn::AdamState> contrastive_adam_;
  Rng negatives_rng_;
  Rng ldp_train_rng_;
  Rng ldp_serve_rng_;
  Rng gradient_dp_rng_;
  std::uint64_t next_round_ = 0;
  std::uint64_t current_round_ = 0;
};

// Direct composition outside the protocol, eval mode: s for the given ids.
nn::Tensor2D compose_unified(const models::ModelBundle& bundle, const data::Shards& shards,
                             std::span<const std::uint64_t> ids);
// Direct composition of the task prediction (class probabilities).
nn::Tensor2D compose_predict(const models::ModelBundle& bundle, const data::Shards& shards,
                             std::span<const std::uint64_t> ids);

// Layout of the bundle that matches these shards.
models::BundleLayout layout_for(const data::Shards& shards);

}  // namespace fairvfl::protocol
