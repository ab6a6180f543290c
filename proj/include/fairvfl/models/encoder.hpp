#pragma once

#include "fairvfl/data/dataset.hpp"
#include "fairvfl/models/config.hpp"
#include "fairvfl/nn/layers.hpp"

#include <vector>

namespace fairvfl::models {

struct EncoderTrace {
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> codes;
  nn::MlpTrace mlp;
};

/// Local model of one fairness-insensitive platform: per-field embeddings
/// concatenated with the numeric fields, then a two-layer network.
class LocalEncoder {
 public:
  LocalEncoder() = default;
  LocalEncoder(std::size_t platform, std::vector<data::FieldSchema> schema, const RepWidths& widths,
               const ArchConfig& arch, Rng& init_rng);

  // Out-of-vocabulary codes raise a vocabulary error in training mode and map
  // to the unknown slot in eval mode.
  nn::Tensor2D forward(const data::PlatformBatch& batch, const nn::ForwardMode& mode, EncoderTrace& trace) const;
  nn::Tensor2D forward(const data::PlatformBatch& batch) const;

  // Returns the gradient on the concatenated input row (embeddings | numerics).
  nn::Tensor2D backward(const nn::Tensor2D& grad_out, const EncoderTrace& trace, nn::ParamGrads mode);

  nn::BlockList blocks();
  nn::ConstBlockList blocks() const;
  const std::vector<data::FieldSchema>& schema() const noexcept { return schema_; }
  std::size_t categorical_count() const noexcept { return embeddings_.size(); }
  std::size_t numeric_count() const noexcept { return numeric_count_; }

 private:
  nn::Tensor2D assemble_input(const data::PlatformBatch& batch, bool training, EncoderTrace* trace) const;

  std::vector<data::FieldSchema> schema_;
  std::vector<nn::ParamBlock> embeddings_;
  std::size_t numeric_count_ = 0;
  std::size_t embedding_width_ = 0;
  nn::Mlp2 mlp_;
};

}  // namespace fairvfl::models
