#pragma once

#include "fairvfl/data/dataset.hpp"
#include "fairvfl/models/aggregator.hpp"
#include "fairvfl/models/components.hpp"
#include "fairvfl/models/config.hpp"
#include "fairvfl/models/encoder.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fairvfl::models {

struct BundleLayout {
  std::vector<std::vector<data::FieldSchema>> platform_schemas;  // one per insensitive platform
  std::vector<int> sensitive_classes;                            // one per sensitive feature
  int task_classes = 2;
};

/// Every trainable component of one federation.
struct ModelBundle {
  RepWidths widths;
  ArchConfig arch;
  std::vector<LocalEncoder> encoders;
  Aggregator aggregator;
  TaskHead task_head;
  std::vector<Mapper> mappers;
  std::vector<ContrastiveDiscriminator> contrastive;
  std::vector<BiasDiscriminator> bias;

  // Seeded construction; each component draws from its own init stream.
  static ModelBundle create(const BundleLayout& layout, const RepWidths& widths, const ArchConfig& arch,
                            std::uint64_t seed);

  nn::BlockList blocks();
  nn::ConstBlockList blocks() const;
  std::size_t insensitive_count() const noexcept { return encoders.size(); }
  std::size_t sensitive_count() const noexcept { return mappers.size(); }
};

// a_i = A_i(s); throws a config error when feature >= m.
nn::Tensor2D map_protected(const ModelBundle& bundle, const nn::Tensor2D& unified, std::size_t feature);

// Binary checkpoint: magic, RepWidths header, then named blocks with shapes
// and little-endian float64 values. Round trips are bitwise exact.
void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path);

// Loads into a bundle of identical structure; throws a checkpoint error on any
// width, name or shape mismatch.
void load_checkpoint(ModelBundle& bundle, const std::filesystem::path& path);

RepWidths read_checkpoint_widths(const std::filesystem::path& path);

// FNV-1a over every block's name, shape and values.
std::uint64_t bundle_digest(const ModelBundle& bundle);

}  // namespace fairvfl::models
