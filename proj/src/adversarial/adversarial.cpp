#include "fairvfl/adversarial/adversarial.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fairvfl::adversarial {

using nn::Index;
using nn::Tensor2D;

void LossWeights::validate(std::size_t m) const {
  if (lambda.size() != m || gamma.size() != m) {
    throw Error(ErrorKind::Config, "loss weights for " + std::to_string(lambda.size()) + "/" +
                                       std::to_string(gamma.size()) + " features, expected " + std::to_string(m));
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(lambda[i] >= 0.0) || !std::isfinite(lambda[i])) {
      throw Error(ErrorKind::Config, "lambda[" + std::to_string(i) + "] must be finite and >= 0");
    }
    if (!(gamma[i] >= 0.0) || !std::isfinite(gamma[i])) {
      throw Error(ErrorKind::Config, "gamma[" + std::to_string(i) + "] must be finite and >= 0");
    }
  }
}

nlohmann::json LossWeights::to_json() const { return {{"lambda", lambda}, {"gamma", gamma}}; }

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  try {
    w.lambda = j.at("lambda").get<std::vector<double>>();
    w.gamma = j.at("gamma").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("loss weights: ") + e.what());
  }
  return w;
}

std::vector<std::size_t> top_relevance_pool(const Tensor2D& protected_reps, std::size_t query,
                                            std::size_t pool_size) {
  const auto batch = static_cast<std::size_t>(protected_reps.rows());
  if (batch < 2) throw Error(ErrorKind::Protocol, "contrastive learning requires >=2 samples");
  if (query >= batch) throw Error(ErrorKind::Dimension, "query index " + std::to_string(query) + " outside batch");
  if (pool_size < 1) throw Error(ErrorKind::Config, "negative pool size must be >= 1");
  Eigen::VectorXd r = protected_reps * protected_reps.row(static_cast<Index>(query)).transpose();
  r[static_cast<Index>(query)] = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order;
  order.reserve(batch - 1);
  for (std::size_t j = 0; j < batch; ++j) {
    if (j != query) order.push_back(j);
  }
  const std::size_t k = std::min(pool_size, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ra = r[static_cast<Index>(a)];
                      const double rb = r[static_cast<Index>(b)];
                      return ra != rb ? ra > rb : a < b;
                    });
  order.resize(k);
  return order;
}

std::size_t rank_and_select_negative(const Tensor2D& protected_reps, std::size_t query, std::size_t pool_size,
                                     Rng& rng) {
  const auto pool = top_relevance_pool(protected_reps, query, pool_size);
  return pool[rng.below(pool.size())];
}

ContrastiveContext ContrastiveContext::build(Tensor2D protected_reps, Tensor2D unified, std::size_t pool_size,
                                             Rng& rng) {
  if (protected_reps.rows() != unified.rows()) {
    throw Error(ErrorKind::Dimension, "contrastive batch: protected " + nn::shape_string(protected_reps) +
                                          " vs unified " + nn::shape_string(unified));
  }
  ContrastiveContext ctx;
  ctx.protected_reps = std::move(protected_reps);
  ctx.unified = std::move(unified);
  ctx.pool_size = pool_size;
  ctx.negatives.resize(ctx.rows());
  for (std::size_t j = 0; j < ctx.rows(); ++j) {
    ctx.negatives[j] = rank_and_select_negative(ctx.protected_reps, j, pool_size, rng);
  }
  return ctx;
}

Tensor2D ContrastiveContext::negative_unified() const {
  if (negatives.size() != rows()) throw Error(ErrorKind::Protocol, "negatives not selected for every sample");
  return nn::gather_rows(unified, negatives);
}

namespace {

struct PairScores {
  Tensor2D positive;
  Tensor2D negative;
  nn::MlpTrace positive_trace;
  nn::MlpTrace negative_trace;
  nn::PairLossGrad loss;
};

void require_finite_rows(const Tensor2D& t, const std::string& what) {
  for (Index r = 0; r < t.rows(); ++r) {
    if (!t.row(r).allFinite()) {
      throw NumericFailure(what + " is non-finite at sample " + std::to_string(r), static_cast<long long>(r));
    }
  }
}

PairScores score_pairs(const ContrastiveContext& ctx, const models::ContrastiveDiscriminator& disc) {
  PairScores out;
  out.positive = disc.score(ctx.protected_reps, ctx.unified, out.positive_trace);
  out.negative = disc.score(ctx.protected_reps, ctx.negative_unified(), out.negative_trace);
  require_finite_rows(out.positive, "contrastive score (preimage)");
  require_finite_rows(out.negative, "contrastive score (negative)");
  out.loss = nn::pairwise_softmax_loss(out.positive, out.negative);
  if (!std::isfinite(out.loss.loss)) {
    // Locate the offending pair for the diagnostic.
    for (Index r = 0; r < out.positive.rows(); ++r) {
      const double d = out.negative(r, 0) - out.positive(r, 0);
      if (!std::isfinite(d)) throw NumericFailure("contrastive loss non-finite at sample " + std::to_string(r), r);
    }
    throw NumericFailure("contrastive loss non-finite", -1);
  }
  return out;
}

void require_rows(const Tensor2D& reps, std::span<const int> labels, const char* what) {
  if (static_cast<std::size_t>(reps.rows()) != labels.size()) {
    throw Error(ErrorKind::Dimension, std::string(what) + ": " + std::to_string(reps.rows()) + " rows but " +
                                          std::to_string(labels.size()) + " labels");
  }
}

double checked_loss(double loss, const Tensor2D& logits, const char* what) {
  if (!std::isfinite(loss)) {
    for (Index r = 0; r < logits.rows(); ++r) {
      if (!logits.row(r).allFinite()) {
        throw NumericFailure(std::string(what) + " non-finite at sample " + std::to_string(r), r);
      }
    }
    throw NumericFailure(std::string(what) + " non-finite", -1);
  }
  return loss;
}

}  // namespace

double contrastive_loss(const ContrastiveContext& ctx, const models::ContrastiveDiscriminator& disc) {
  return score_pairs(ctx, disc).loss.loss;
}

ProtectedGrad contrastive_grad_on_protected(const ContrastiveContext& ctx,
                                            const models::ContrastiveDiscriminator& frozen) {
  const PairScores ps = score_pairs(ctx, frozen);
  const auto gp = frozen.input_grad(ps.loss.grad_positive, ps.positive_trace);
  const auto gn = frozen.input_grad(ps.loss.grad_negative, ps.negative_trace);
  return {ps.loss.loss, gp.protected_rep + gn.protected_rep};
}

double contrastive_discriminator_step(const ContrastiveContext& ctx, models::ContrastiveDiscriminator& disc,
                                      nn::AdamState& adam) {
  const PairScores ps = score_pairs(ctx, disc);
  const auto blocks = disc.blocks();
  nn::zero_grads(blocks);
  disc.backward(ps.loss.grad_positive, ps.positive_trace, nn::ParamGrads::Accumulate);
  disc.backward(ps.loss.grad_negative, ps.negative_trace, nn::ParamGrads::Accumulate);
  nn::adam_update(blocks, adam);
  return ps.loss.loss;
}

MapperContribution contrastive_adversarial_grad(const ContrastiveContext& ctx,
                                                const models::ContrastiveDiscriminator& frozen,
                                                models::Mapper& mapper, const nn::MlpTrace& mapper_trace,
                                                double gamma) {
  if (!(gamma >= 0.0)) throw Error(ErrorKind::Config, "gamma must be >= 0");
  const ProtectedGrad g = contrastive_grad_on_protected(ctx, frozen);
  MapperContribution out;
  out.loss = g.loss;
  out.grads = nn::scale(mapper_descent_grads(mapper, mapper_trace, g.grad_protected), -gamma);
  return out;
}

ProtectedGrad bias_discriminator_step(const Tensor2D& protected_reps, std::span<const int> labels,
                                      models::BiasDiscriminator& disc, nn::AdamState& adam) {
  require_rows(protected_reps, labels, "bias discriminator");
  nn::MlpTrace trace;
  const Tensor2D logits = disc.logits(protected_reps, trace);
  const nn::LossGrad lg = nn::softmax_cross_entropy(logits, labels);
  ProtectedGrad out;
  out.loss = checked_loss(lg.loss, logits, "bias discrimination loss");
  const auto blocks = disc.blocks();
  nn::zero_grads(blocks);
  out.grad_protected = disc.backward(lg.grad, trace, nn::ParamGrads::Accumulate);
  nn::adam_update(blocks, adam);
  return out;
}

nn::GradientSet mapper_descent_grads(models::Mapper& mapper, const nn::MlpTrace& mapper_trace,
                                     const Tensor2D& grad_protected) {
  const auto blocks = mapper.blocks();
  nn::zero_grads(blocks);
  mapper.backward(grad_protected, mapper_trace, nn::ParamGrads::Accumulate);
  nn::GradientSet g = nn::capture_grads(blocks);
  nn::zero_grads(blocks);
  return g;
}

ProtectedGrad adversarial_grad_on_protected(const Tensor2D& protected_reps, std::span<const int> labels,
                                            const models::BiasDiscriminator& frozen) {
  require_rows(protected_reps, labels, "adversarial loss");
  nn::MlpTrace trace;
  const Tensor2D logits = frozen.logits(protected_reps, trace);
  const nn::LossGrad lg = nn::softmax_cross_entropy(logits, labels);
  return {checked_loss(lg.loss, logits, "adversarial loss"), frozen.input_grad(lg.grad, trace)};
}

UnifiedGrad adversarial_grad_on_unified(const Tensor2D& unified, std::span<const int> labels,
                                        const models::BiasDiscriminator& frozen_disc,
                                        const models::Mapper& frozen_mapper) {
  nn::MlpTrace mapper_trace;
  const Tensor2D a = frozen_mapper.forward(unified, mapper_trace);
  const ProtectedGrad g = adversarial_grad_on_protected(a, labels, frozen_disc);
  return {g.loss, frozen_mapper.input_grad(g.grad_protected, mapper_trace)};
}

Tensor2D combine_overall_grad(const Tensor2D& task_grad, const std::vector<Tensor2D>& adversarial_grads,
                              const LossWeights& weights) {
  const std::size_t m = weights.lambda.size();
  if (adversarial_grads.size() != m) {
    throw Error(ErrorKind::Protocol, "adversarial gradients for " + std::to_string(adversarial_grads.size()) +
                                         " sensitive features, expected " + std::to_string(m));
  }
  Tensor2D out = task_grad;
  for (std::size_t i = 0; i < m; ++i) {
    const Tensor2D& g = adversarial_grads[i];
    if (g.size() == 0) throw Error(ErrorKind::Protocol, "missing adversarial gradient for sensitive feature " + std::to_string(i));
    nn::require_same_shape(g, task_grad, "adversarial gradient on s");
    if (weights.lambda[i] != 0.0) out -= weights.lambda[i] * g;
  }
  return out;
}

std::string task_loss() { return "task"; }
std::string contrastive_disc_loss(std::size_t i) { return "contrastive_disc/" + std::to_string(i); }
std::string contrastive_adv_loss(std::size_t i) { return "contrastive_adv/" + std::to_string(i); }
std::string bias_disc_loss(std::size_t i) { return "bias_disc/" + std::to_string(i); }
std::string adversarial_loss(std::size_t i) { return "adversarial/" + std::to_string(i); }

void SignLedger::declare(const std::string& group, const std::string& loss, Direction direction, double weight) {
  auto& entries = groups_[group];
  for (const auto& e : entries) {
    if (e.loss == loss) throw Error(ErrorKind::Config, "loss '" + loss + "' declared twice for '" + group + "'");
  }
  entries.push_back({loss, direction, weight});
}

const std::vector<LedgerEntry>& SignLedger::entries(const std::string& group) const {
  const auto it = groups_.find(group);
  if (it == groups_.end()) throw Error(ErrorKind::Lookup, "no ledger entries for parameter group '" + group + "'");
  return it->second;
}

std::vector<std::string> SignLedger::groups() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : groups_) out.push_back(name);
  return out;
}

double SignLedger::verify(const std::string& group, const nn::GradientSet& applied, const NamedGradients& components,
                          double tol) const {
  const auto& declared = entries(group);
  nn::GradientSet expected = nn::scale(applied, 0.0);
  for (const auto& [loss, grads] : components) {
    const auto it = std::find_if(declared.begin(), declared.end(), [&](const LedgerEntry& e) { return e.loss == loss; });
    if (it == declared.end()) {
      throw Error(ErrorKind::Protocol, "parameter group '" + group + "' updated by undeclared loss '" + loss + "'");
    }
    if (grads.size() != applied.size()) {
      throw Error(ErrorKind::Dimension, "ledger component '" + loss + "' has " + std::to_string(grads.size()) +
                                            " blocks, update has " + std::to_string(applied.size()));
    }
    const double coeff = (it->direction == Direction::Descend ? 1.0 : -1.0) * it->weight;
    for (std::size_t b = 0; b < grads.size(); ++b) {
      nn::require_same_shape(grads[b].weights, expected[b].weights, "ledger component");
      expected[b].weights += coeff * grads[b].weights;
      if (expected[b].bias.size() > 0) expected[b].bias += coeff * grads[b].bias;
    }
  }
  const double deviation = nn::max_abs_diff(applied, expected);
  const double bound = tol * std::max(1.0, nn::max_abs(expected));
  if (!(deviation <= bound)) {
    throw Error(ErrorKind::Protocol, "sign ledger mismatch on '" + group + "': deviation " +
                                         std::to_string(deviation) + " exceeds " + std::to_string(bound));
  }
  return deviation;
}

SignLedger SignLedger::fairvfl(std::size_t insensitive, std::size_t sensitive, const LossWeights& weights) {
  weights.validate(sensitive);
  SignLedger ledger;
  auto shared = [&](const std::string& group) {
    ledger.declare(group, task_loss(), Direction::Descend);
    for (std::size_t i = 0; i < sensitive; ++i) {
      ledger.declare(group, adversarial_loss(i), Direction::Ascend, weights.lambda[i]);
    }
  };
  ledger.declare("task_head", task_loss(), Direction::Descend);
  shared("aggregator");
  for (std::size_t p = 0; p < insensitive; ++p) shared("encoder" + std::to_string(p));
  for (std::size_t i = 0; i < sensitive; ++i) {
    const auto idx = std::to_string(i);
    ledger.declare("contrastive" + idx, contrastive_disc_loss(i), Direction::Descend);
    ledger.declare("mapper" + idx, contrastive_adv_loss(i), Direction::Ascend, weights.gamma[i]);
    ledger.declare("mapper" + idx, bias_disc_loss(i), Direction::Descend);
    ledger.declare("bias" + idx, bias_disc_loss(i), Direction::Descend);
  }
  return ledger;
}

}  // namespace fairvfl::adversarial
