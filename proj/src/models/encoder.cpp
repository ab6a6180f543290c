#include "fairvfl/models/encoder.hpp"

#include "fairvfl/error.hpp"

namespace fairvfl::models {

using nn::Index;
using nn::Tensor2D;

LocalEncoder::LocalEncoder(std::size_t platform, std::vector<data::FieldSchema> schema, const RepWidths& widths,
                           const ArchConfig& arch, Rng& init_rng)
    : schema_(std::move(schema)), embedding_width_(arch.embedding_width) {
  const std::string prefix = "encoder" + std::to_string(platform);
  for (const auto& f : schema_) {
    if (f.kind == data::FieldKind::Categorical) {
      if (f.cardinality < 1) throw Error(ErrorKind::Config, "field '" + f.name + "' has an empty vocabulary");
      nn::ParamBlock table(prefix + ".emb." + f.name, static_cast<Index>(f.cardinality),
                           static_cast<Index>(arch.embedding_width), false);
      table.glorot_init(init_rng);
      embeddings_.push_back(std::move(table));
    } else {
      ++numeric_count_;
    }
  }
  const auto in = static_cast<Index>(embeddings_.size() * embedding_width_ + numeric_count_);
  mlp_ = nn::Mlp2(prefix, in, static_cast<Index>(arch.encoder_hidden), static_cast<Index>(widths.unified),
                  arch.dropout, init_rng);
}

Tensor2D LocalEncoder::assemble_input(const data::PlatformBatch& batch, bool training, EncoderTrace* trace) const {
  const Index rows = batch.rows();
  if (batch.categorical.cols() != static_cast<Index>(embeddings_.size()) ||
      batch.numeric.cols() != static_cast<Index>(numeric_count_) ||
      (embeddings_.size() > 0 && batch.categorical.rows() != rows) ||
      (numeric_count_ > 0 && batch.numeric.rows() != rows)) {
    throw Error(ErrorKind::Dimension, "feature slice with " + std::to_string(batch.categorical.cols()) +
                                          " categorical and " + std::to_string(batch.numeric.cols()) +
                                          " numeric columns does not match the platform schema (" +
                                          std::to_string(embeddings_.size()) + " + " +
                                          std::to_string(numeric_count_) + ")");
  }
  const auto w = static_cast<Index>(embedding_width_);
  Tensor2D x(rows, static_cast<Index>(embeddings_.size()) * w + static_cast<Index>(numeric_count_));
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> codes = batch.categorical;
  for (std::size_t f = 0; f < embeddings_.size(); ++f) {
    const auto& table = embeddings_[f];
    for (Index r = 0; r < rows; ++r) {
      int& code = codes(r, static_cast<Index>(f));
      if (code < 0 || code >= table.weights.rows()) {
        if (training) {
          throw Error(ErrorKind::Vocabulary, "code " + std::to_string(code) + " outside the vocabulary of '" +
                                                 table.name + "' (" + std::to_string(table.weights.rows()) + " entries)");
        }
        code = data::kUnknownCode;
      }
      x.block(r, static_cast<Index>(f) * w, 1, w) = table.weights.row(code);
    }
  }
  if (numeric_count_ > 0) x.rightCols(static_cast<Index>(numeric_count_)) = batch.numeric;
  if (trace) trace->codes = std::move(codes);
  return x;
}

Tensor2D LocalEncoder::forward(const data::PlatformBatch& batch, const nn::ForwardMode& mode,
                               EncoderTrace& trace) const {
  Tensor2D x = assemble_input(batch, mode.training, &trace);
  return mlp_.forward(x, mode, trace.mlp);
}

Tensor2D LocalEncoder::forward(const data::PlatformBatch& batch) const {
  return mlp_.forward(assemble_input(batch, false, nullptr));
}

Tensor2D LocalEncoder::backward(const Tensor2D& grad_out, const EncoderTrace& trace, nn::ParamGrads mode) {
  Tensor2D dx = mlp_.backward(grad_out, trace.mlp, mode);
  if (mode == nn::ParamGrads::Accumulate) {
    const auto w = static_cast<Index>(embedding_width_);
    for (std::size_t f = 0; f < embeddings_.size(); ++f) {
      auto& table = embeddings_[f];
      for (Index r = 0; r < dx.rows(); ++r) {
        table.grad_weights.row(trace.codes(r, static_cast<Index>(f))) += dx.block(r, static_cast<Index>(f) * w, 1, w);
      }
    }
  }
  return dx;
}

nn::BlockList LocalEncoder::blocks() {
  nn::BlockList out;
  for (auto& e : embeddings_) out.push_back(&e);
  for (auto* b : mlp_.blocks()) out.push_back(b);
  return out;
}

nn::ConstBlockList LocalEncoder::blocks() const {
  nn::ConstBlockList out;
  for (const auto& e : embeddings_) out.push_back(&e);
  for (const auto* b : mlp_.blocks()) out.push_back(b);
  return out;
}

}  // namespace fairvfl::models
