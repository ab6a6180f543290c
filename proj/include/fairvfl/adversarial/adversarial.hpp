#pragma once

#include "fairvfl/models/components.hpp"
#include "fairvfl/nn/adam.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fairvfl::adversarial {

/// Per-sensitive-feature weights: lambda scales the adversarial gradient on s,
/// gamma scales the contrastive ascent on the mapper.
struct LossWeights {
  std::vector<double> lambda;
  std::vector<double> gamma;

  static LossWeights zeros(std::size_t m) { return {std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)}; }
  void validate(std::size_t m) const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
  bool operator==(const LossWeights&) const = default;
};

// Candidate negatives for one query: the pool_size others with the highest
// a_query . a_j, ties to the lower index. Self is never a candidate.
std::vector<std::size_t> top_relevance_pool(const nn::Tensor2D& protected_reps, std::size_t query,
                                            std::size_t pool_size);

// Uniform draw from top_relevance_pool.
std::size_t rank_and_select_negative(const nn::Tensor2D& protected_reps, std::size_t query, std::size_t pool_size,
                                     Rng& rng);

/// A batch of (a_i, s) pairs with one selected negative per row.
struct ContrastiveContext {
  nn::Tensor2D protected_reps;
  nn::Tensor2D unified;
  std::size_t pool_size = 5;
  std::vector<std::size_t> negatives;

  // Queries are processed in row order, each drawing from rng.
  static ContrastiveContext build(nn::Tensor2D protected_reps, nn::Tensor2D unified, std::size_t pool_size,
                                  Rng& rng);
  nn::Tensor2D negative_unified() const;
  std::size_t rows() const noexcept { return static_cast<std::size_t>(protected_reps.rows()); }
};

// Contrastive discrimination loss of the pairs under disc (no update).
double contrastive_loss(const ContrastiveContext& ctx, const models::ContrastiveDiscriminator& disc);

struct ProtectedGrad {
  double loss = 0.0;
  nn::Tensor2D grad_protected;
};

// Same loss with disc frozen, differentiated w.r.t. the protected reps only.
ProtectedGrad contrastive_grad_on_protected(const ContrastiveContext& ctx,
                                            const models::ContrastiveDiscriminator& frozen);

// One Adam descent step on disc. Returns the loss before the step.
double contrastive_discriminator_step(const ContrastiveContext& ctx, models::ContrastiveDiscriminator& disc,
                                      nn::AdamState& adam);

struct MapperContribution {
  double loss = 0.0;
  nn::GradientSet grads;  // aligned with mapper.blocks()
};

// -gamma * dL^c/dA for the mapper that produced ctx.protected_reps via trace.
// Leaves the mapper's gradient accumulators zeroed.
MapperContribution contrastive_adversarial_grad(const ContrastiveContext& ctx,
                                                const models::ContrastiveDiscriminator& frozen,
                                                models::Mapper& mapper, const nn::MlpTrace& mapper_trace,
                                                double gamma);

// Bias discriminator: loss, dL^d/da from the pre-step parameters, then one
// Adam step on disc.
ProtectedGrad bias_discriminator_step(const nn::Tensor2D& protected_reps, std::span<const int> labels,
                                      models::BiasDiscriminator& disc, nn::AdamState& adam);

// dL/dA for an upstream gradient on the mapper output. Leaves the mapper's
// gradient accumulators zeroed.
nn::GradientSet mapper_descent_grads(models::Mapper& mapper, const nn::MlpTrace& mapper_trace,
                                     const nn::Tensor2D& grad_protected);

// Adversarial loss with disc frozen; gradient on the protected reps.
ProtectedGrad adversarial_grad_on_protected(const nn::Tensor2D& protected_reps, std::span<const int> labels,
                                            const models::BiasDiscriminator& frozen);

struct UnifiedGrad {
  double loss = 0.0;
  nn::Tensor2D grad_unified;
};

// Both blocks frozen: a = A(s), L^a = CE(D(a), y), returns dL^a/ds.
UnifiedGrad adversarial_grad_on_unified(const nn::Tensor2D& unified, std::span<const int> labels,
                                        const models::BiasDiscriminator& frozen_disc,
                                        const models::Mapper& frozen_mapper);

// dL^t/ds - sum_i lambda_i dL^a_i/ds.
nn::Tensor2D combine_overall_grad(const nn::Tensor2D& task_grad, const std::vector<nn::Tensor2D>& adversarial_grads,
                                  const LossWeights& weights);

// Loss-term names used by the ledger.
std::string task_loss();
std::string contrastive_disc_loss(std::size_t feature);
std::string contrastive_adv_loss(std::size_t feature);
std::string bias_disc_loss(std::size_t feature);
std::string adversarial_loss(std::size_t feature);

enum class Direction { Descend, Ascend };

struct LedgerEntry {
  std::string loss;
  Direction direction = Direction::Descend;
  double weight = 1.0;
};

using NamedGradients = std::vector<std::pair<std::string, nn::GradientSet>>;

/// Which loss terms may move each parameter group, and in which direction.
class SignLedger {
 public:
  void declare(const std::string& group, const std::string& loss, Direction direction, double weight = 1.0);
  const std::vector<LedgerEntry>& entries(const std::string& group) const;
  bool has_group(const std::string& group) const { return groups_.count(group) > 0; }
  std::vector<std::string> groups() const;

  // Checks applied == sum over components of (+/-) weight * component, where
  // every component must be declared for the group. Tolerance is tol times
  // max(1, max |expected|). Returns the max deviation; throws a protocol
  // error on any mismatch.
  double verify(const std::string& group, const nn::GradientSet& applied, const NamedGradients& components,
                double tol = 1e-9) const;

  // Ledger of the full method for n encoders and m sensitive features.
  static SignLedger fairvfl(std::size_t insensitive, std::size_t sensitive, const LossWeights& weights);

 private:
  std::map<std::string, std::vector<LedgerEntry>> groups_;
};

}  // namespace fairvfl::adversarial
