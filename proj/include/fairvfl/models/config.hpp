#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <vector>

namespace fairvfl::models {

// Width of local and unified representations plus one protected width per
// sensitive feature.
struct RepWidths {
  std::size_t unified = 400;
  std::vector<std::size_t> protected_widths{32, 64};

  void validate() const;
  nlohmann::json to_json() const;
  static RepWidths from_json(const nlohmann::json& j);
  bool operator==(const RepWidths&) const = default;
};

// Hidden sizes the method leaves open.
struct ArchConfig {
  std::size_t embedding_width = 32;
  std::size_t encoder_hidden = 256;
  std::size_t attention_heads = 4;
  std::size_t pooling_hidden = 200;
  std::size_t head_hidden = 128;
  std::size_t mapper_hidden = 128;
  std::size_t contrastive_hidden = 128;
  std::size_t bias_hidden = 64;
  double dropout = 0.2;

  void validate(const RepWidths& widths) const;
  nlohmann::json to_json() const;
  static ArchConfig from_json(const nlohmann::json& j);
  bool operator==(const ArchConfig&) const = default;
};

}  // namespace fairvfl::models
