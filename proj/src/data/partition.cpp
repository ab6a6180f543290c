#include "fairvfl/data/partition.hpp"

#include "fairvfl/error.hpp"
#include "fairvfl/rng.hpp"

#include <set>

namespace fairvfl::data {

nlohmann::json PartitionAssignment::to_json() const {
  return {{"num_insensitive", num_insensitive},
          {"num_sensitive", num_sensitive},
          {"fields", field_to_platform},
          {"sensitive", sensitive_to_platform}};
}

PartitionAssignment PartitionAssignment::from_json(const nlohmann::json& j) {
  PartitionAssignment pa;
  pa.num_insensitive = j.at("num_insensitive").get<std::size_t>();
  pa.num_sensitive = j.at("num_sensitive").get<std::size_t>();
  pa.field_to_platform = j.at("fields").get<std::map<std::string, std::size_t>>();
  pa.sensitive_to_platform = j.at("sensitive").get<std::map<std::string, std::size_t>>();
  return pa;
}

PartitionAssignment default_assignment(const VerticalDataset& ds, std::size_t num_platforms, std::uint64_t seed) {
  if (num_platforms == 0) throw Error(ErrorKind::Config, "at least one insensitive platform is required");
  if (ds.fields.size() < num_platforms) {
    throw Error(ErrorKind::Config, std::to_string(ds.fields.size()) + " fields cannot fill " +
                                       std::to_string(num_platforms) + " platforms");
  }
  auto names = ds.field_names();
  auto rng = Rng::stream(seed, "partition");
  rng.shuffle(names.begin(), names.end());

  PartitionAssignment pa;
  pa.num_insensitive = num_platforms;
  pa.num_sensitive = ds.sensitive.size();
  const std::size_t base = names.size() / num_platforms;
  const std::size_t extra = names.size() % num_platforms;
  std::size_t k = 0;
  for (std::size_t p = 0; p < num_platforms; ++p) {
    const std::size_t count = base + (p < extra ? 1 : 0);
    for (std::size_t c = 0; c < count; ++c) pa.field_to_platform[names[k++]] = p;
  }
  for (std::size_t i = 0; i < ds.sensitive.size(); ++i) pa.sensitive_to_platform[ds.sensitive[i].name] = i;
  return pa;
}

InsensitiveShard::InsensitiveShard(std::size_t index, std::vector<std::uint64_t> ids, std::vector<FieldColumn> fields)
    : index_(index), ids_(std::move(ids)), fields_(std::move(fields)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) row_of_.emplace(ids_[i], i);
}

std::vector<FieldSchema> InsensitiveShard::schema() const {
  std::vector<FieldSchema> out;
  for (const auto& f : fields_) out.push_back({f.name, f.kind, f.kind == FieldKind::Categorical ? f.cardinality() : 0});
  return out;
}

PlatformBatch InsensitiveShard::batch(std::span<const std::uint64_t> ids) const {
  nn::Index n_cat = 0, n_num = 0;
  for (const auto& f : fields_) (f.kind == FieldKind::Categorical ? n_cat : n_num)++;
  const auto rows = static_cast<nn::Index>(ids.size());
  PlatformBatch out;
  out.categorical.resize(rows, n_cat);
  out.numeric.resize(rows, n_num);
  for (nn::Index r = 0; r < rows; ++r) {
    auto it = row_of_.find(ids[static_cast<std::size_t>(r)]);
    if (it == row_of_.end()) {
      throw Error(ErrorKind::Lookup, "insensitive platform " + std::to_string(index_) + " holds no sample id " +
                                         std::to_string(ids[static_cast<std::size_t>(r)]));
    }
    nn::Index c = 0, v = 0;
    for (const auto& f : fields_) {
      if (f.kind == FieldKind::Categorical) {
        out.categorical(r, c++) = f.codes[it->second];
      } else {
        out.numeric(r, v++) = f.values[it->second];
      }
    }
  }
  return out;
}

SensitiveShard::SensitiveShard(std::size_t index, std::vector<std::uint64_t> ids, SensitiveColumn column)
    : index_(index), ids_(std::move(ids)), column_(std::move(column)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) row_of_.emplace(ids_[i], i);
}

std::vector<int> SensitiveShard::labels(std::span<const std::uint64_t> ids) const {
  std::vector<int> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    auto it = row_of_.find(id);
    if (it == row_of_.end()) {
      throw Error(ErrorKind::Lookup, "sensitive platform " + std::to_string(index_) + " (" + column_.name +
                                         ") holds no sample id " + std::to_string(id));
    }
    out.push_back(column_.labels[it->second]);
  }
  return out;
}

TaskShard::TaskShard(std::vector<std::uint64_t> ids, std::vector<int> labels, int num_classes)
    : ids_(std::move(ids)), labels_(std::move(labels)), num_classes_(num_classes) {
  for (std::size_t i = 0; i < ids_.size(); ++i) row_of_.emplace(ids_[i], i);
}

std::vector<int> TaskShard::labels(std::span<const std::uint64_t> ids) const {
  std::vector<int> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    auto it = row_of_.find(id);
    if (it == row_of_.end()) throw Error(ErrorKind::Lookup, "task platform holds no sample id " + std::to_string(id));
    out.push_back(labels_[it->second]);
  }
  return out;
}

Shards partition_vertical(const VerticalDataset& ds, const PartitionAssignment& pa) {
  if (pa.num_insensitive == 0) throw Error(ErrorKind::Config, "at least one insensitive platform is required");
  std::set<std::string> known;
  for (const auto& f : ds.fields) {
    known.insert(f.name);
    auto it = pa.field_to_platform.find(f.name);
    if (it == pa.field_to_platform.end()) throw Error(ErrorKind::Config, "field '" + f.name + "' is not assigned");
    if (it->second >= pa.num_insensitive) {
      throw Error(ErrorKind::Config, "field '" + f.name + "' assigned to missing platform " + std::to_string(it->second));
    }
  }
  for (const auto& [name, _] : pa.field_to_platform) {
    if (!known.contains(name)) throw Error(ErrorKind::Config, "assignment names unknown field '" + name + "'");
  }
  if (pa.sensitive_to_platform.size() != ds.sensitive.size() || pa.num_sensitive != ds.sensitive.size()) {
    throw Error(ErrorKind::Config, "every sensitive feature needs exactly one sensitive platform");
  }
  std::set<std::size_t> used_sensitive;
  for (const auto& s : ds.sensitive) {
    auto it = pa.sensitive_to_platform.find(s.name);
    if (it == pa.sensitive_to_platform.end()) throw Error(ErrorKind::Config, "sensitive feature '" + s.name + "' is not assigned");
    if (it->second >= pa.num_sensitive || !used_sensitive.insert(it->second).second) {
      throw Error(ErrorKind::Config, "sensitive platform " + std::to_string(it->second) + " doubly assigned or missing");
    }
  }

  std::vector<std::vector<FieldColumn>> per_platform(pa.num_insensitive);
  for (const auto& f : ds.fields) per_platform[pa.field_to_platform.at(f.name)].push_back(f);

  std::vector<InsensitiveShard> insensitive;
  for (std::size_t p = 0; p < pa.num_insensitive; ++p) {
    if (per_platform[p].empty()) throw Error(ErrorKind::Config, "insensitive platform " + std::to_string(p) + " has no fields");
    insensitive.emplace_back(p, ds.ids, std::move(per_platform[p]));
  }

  std::vector<SensitiveColumn> ordered(pa.num_sensitive);
  for (const auto& s : ds.sensitive) ordered[pa.sensitive_to_platform.at(s.name)] = s;
  std::vector<SensitiveShard> sensitive;
  for (std::size_t i = 0; i < ordered.size(); ++i) sensitive.emplace_back(i, ds.ids, std::move(ordered[i]));

  return Shards{TaskShard(ds.ids, ds.task_labels, ds.num_task_classes), std::move(insensitive), std::move(sensitive)};
}

nlohmann::json shard_manifest(const Shards& shards) {
  nlohmann::json j;
  j["task"] = {{"holds", {"task_label"}}, {"num_classes", shards.task.num_classes()}};
  for (const auto& s : shards.insensitive) {
    std::vector<std::string> names;
    for (const auto& f : s.fields()) names.push_back(f.name);
    j["insensitive"].push_back({{"platform", s.index()}, {"fields", names}});
  }
  for (const auto& s : shards.sensitive) {
    j["sensitive"].push_back({{"platform", s.index()}, {"label", s.column().name}, {"num_classes", s.column().num_classes}});
  }
  return j;
}

}  // namespace fairvfl::data
