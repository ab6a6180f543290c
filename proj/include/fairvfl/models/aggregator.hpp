#pragma once

#include "fairvfl/models/config.hpp"
#include "fairvfl/nn/layers.hpp"

#include <vector>

namespace fairvfl::models {

struct AggregatorTrace {
  nn::Index batch = 0;
  nn::Index positions = 0;
  nn::Tensor2D stacked;   // (batch*positions) x width, sample-major
  nn::Tensor2D queries, keys, values;
  std::vector<nn::Tensor2D> attention;  // batch*heads matrices of positions x positions
  nn::Tensor2D heads;     // concatenated head outputs
  nn::Tensor2D contextual;
  nn::Tensor2D pooling_hidden;  // tanh activations
  nn::Tensor2D pooling_weights; // batch x positions
};

/// Server-side aggregation: multi-head self-attention across the platform
/// positions, then additive attention pooling into one unified vector per
/// sample. No positional encoding; platform order is fixed by configuration.
class Aggregator {
 public:
  Aggregator() = default;
  Aggregator(std::size_t positions, const RepWidths& widths, const ArchConfig& arch, Rng& init_rng);

  // Throws a protocol error unless exactly `positions()` reps of equal batch
  // size and the unified width are given.
  nn::Tensor2D forward(const std::vector<nn::Tensor2D>& local_reps, AggregatorTrace& trace) const;
  nn::Tensor2D forward(const std::vector<nn::Tensor2D>& local_reps) const;

  std::vector<nn::Tensor2D> backward(const nn::Tensor2D& grad_unified, const AggregatorTrace& trace,
                                     nn::ParamGrads mode);

  nn::BlockList blocks() { return {&query_, &key_, &value_, &output_, &pool_proj_, &pool_query_}; }
  nn::ConstBlockList blocks() const { return {&query_, &key_, &value_, &output_, &pool_proj_, &pool_query_}; }

  std::size_t positions() const noexcept { return positions_; }
  std::size_t heads() const noexcept { return heads_; }

 private:
  std::size_t positions_ = 0;
  std::size_t heads_ = 1;
  std::size_t width_ = 0;
  nn::ParamBlock query_, key_, value_, output_;
  nn::ParamBlock pool_proj_;
  nn::ParamBlock pool_query_;
};

}  // namespace fairvfl::models
