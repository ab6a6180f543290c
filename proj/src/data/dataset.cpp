#include "fairvfl/data/dataset.hpp"

#include "fairvfl/error.hpp"

#include <unordered_set>

namespace fairvfl::data {

const char* to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

int Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const int code = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, code);
  return code;
}

int Vocabulary::lookup(const std::string& token, bool allow_unknown) const {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  if (allow_unknown) return kUnknownCode;
  throw Error(ErrorKind::Vocabulary, "unknown categorical value '" + token + "'");
}

std::vector<std::size_t> VerticalDataset::rows_in(Split split) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) rows.push_back(i);
  }
  return rows;
}

std::vector<std::uint64_t> VerticalDataset::ids_in(Split split) const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(ids[i]);
  }
  return out;
}

std::size_t VerticalDataset::field_index(const std::string& name) const {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].name == name) return i;
  }
  throw Error(ErrorKind::Lookup, "no input field named '" + name + "'");
}

const FieldColumn& VerticalDataset::field(const std::string& name) const { return fields[field_index(name)]; }

std::size_t VerticalDataset::sensitive_index(const std::string& name) const {
  for (std::size_t i = 0; i < sensitive.size(); ++i) {
    if (sensitive[i].name == name) return i;
  }
  throw Error(ErrorKind::Lookup, "no sensitive feature named '" + name + "'");
}

std::vector<std::string> VerticalDataset::field_names() const {
  std::vector<std::string> out;
  for (const auto& f : fields) out.push_back(f.name);
  return out;
}

std::vector<std::string> VerticalDataset::sensitive_names() const {
  std::vector<std::string> out;
  for (const auto& s : sensitive) out.push_back(s.name);
  return out;
}

void VerticalDataset::validate() const {
  const std::size_t n = ids.size();
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Data, msg); };
  if (task_labels.size() != n) fail("task label column length differs from id count");
  if (splits.size() != n) fail("split column length differs from id count");
  std::unordered_set<std::uint64_t> seen(ids.begin(), ids.end());
  if (seen.size() != n) fail("sample ids are not unique");
  for (const auto& f : fields) {
    if (f.size() != n) fail("field '" + f.name + "' has " + std::to_string(f.size()) + " rows, expected " +
                            std::to_string(n));
    if (f.kind == FieldKind::Categorical) {
      for (int c : f.codes) {
        if (c < 0 || static_cast<std::size_t>(c) >= f.cardinality()) fail("field '" + f.name + "' code out of range");
      }
    }
  }
  for (int y : task_labels) {
    if (y < 0 || y >= num_task_classes) fail("task label out of range");
  }
  for (const auto& s : sensitive) {
    if (s.labels.size() != n) fail("sensitive column '" + s.name + "' length differs from id count");
    for (int y : s.labels) {
      if (y < 0 || y >= s.num_classes) fail("sensitive label out of range in '" + s.name + "'");
    }
    for (const auto& f : fields) {
      if (f.name == s.name) fail("sensitive feature '" + s.name + "' also appears as an input field");
    }
  }
}

std::vector<std::size_t> class_histogram(const std::vector<int>& labels, int num_classes) {
  std::vector<std::size_t> hist(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error(ErrorKind::Label, "label " + std::to_string(y) + " out of range");
    ++hist[static_cast<std::size_t>(y)];
  }
  return hist;
}

}  // namespace fairvfl::data
