#pragma once

#include "fairvfl/data/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace fairvfl::data {

/// Controlled biased-data generator.
///
/// Each sensitive feature i has a proxy categorical field `proxy_i` placed with
/// the insensitive fields; it copies the sensitive label with probability
/// `bias_strength` and is uniform otherwise. Task labels are a fixed rule over
/// the non-proxy fields, flipped with probability `label_noise`.
struct SyntheticSpec {
  std::size_t samples = 6000;
  std::size_t numeric_fields = 6;
  std::size_t categorical_fields = 3;
  std::size_t categorical_cardinality = 6;
  std::vector<int> sensitive_classes{2};
  double bias_strength = 0.9;  // rho
  double label_noise = 0.05;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

VerticalDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace fairvfl::data
