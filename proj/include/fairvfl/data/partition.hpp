#pragma once

#include "fairvfl/data/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fairvfl::data {

struct PartitionAssignment {
  std::size_t num_insensitive = 0;
  std::size_t num_sensitive = 0;
  std::map<std::string, std::size_t> field_to_platform;
  std::map<std::string, std::size_t> sensitive_to_platform;

  nlohmann::json to_json() const;
  static PartitionAssignment from_json(const nlohmann::json& j);
};

// Shuffles field names with the seed and deals them round-robin-contiguously
// into num_platforms groups of near-equal size; sensitive feature i goes to
// sensitive platform i.
PartitionAssignment default_assignment(const VerticalDataset& ds, std::size_t num_platforms, std::uint64_t seed);

/// Feature columns of one fairness-insensitive platform.
class InsensitiveShard {
 public:
  InsensitiveShard(std::size_t index, std::vector<std::uint64_t> ids, std::vector<FieldColumn> fields);

  std::size_t index() const noexcept { return index_; }
  const std::vector<FieldColumn>& fields() const noexcept { return fields_; }
  std::vector<FieldSchema> schema() const;
  bool contains(std::uint64_t id) const { return row_of_.contains(id); }

  // Throws a lookup error naming the platform on an unknown id.
  PlatformBatch batch(std::span<const std::uint64_t> ids) const;

 private:
  std::size_t index_;
  std::vector<std::uint64_t> ids_;
  std::vector<FieldColumn> fields_;
  std::unordered_map<std::uint64_t, std::size_t> row_of_;
};

/// One fairness-sensitive label column.
class SensitiveShard {
 public:
  SensitiveShard(std::size_t index, std::vector<std::uint64_t> ids, SensitiveColumn column);

  std::size_t index() const noexcept { return index_; }
  const SensitiveColumn& column() const noexcept { return column_; }
  std::vector<int> labels(std::span<const std::uint64_t> ids) const;

 private:
  std::size_t index_;
  std::vector<std::uint64_t> ids_;
  SensitiveColumn column_;
  std::unordered_map<std::uint64_t, std::size_t> row_of_;
};

/// Task labels held by the task platform.
class TaskShard {
 public:
  TaskShard(std::vector<std::uint64_t> ids, std::vector<int> labels, int num_classes);

  int num_classes() const noexcept { return num_classes_; }
  std::vector<int> labels(std::span<const std::uint64_t> ids) const;

 private:
  std::vector<std::uint64_t> ids_;
  std::vector<int> labels_;
  int num_classes_;
  std::unordered_map<std::uint64_t, std::size_t> row_of_;
};

struct Shards {
  TaskShard task;
  std::vector<InsensitiveShard> insensitive;
  std::vector<SensitiveShard> sensitive;
};

// Throws a config error for unassigned, unknown or doubly assigned fields.
Shards partition_vertical(const VerticalDataset& ds, const PartitionAssignment& pa);

// Platform -> field names, for audit and reproducibility.
nlohmann::json shard_manifest(const Shards& shards);

}  // namespace fairvfl::data
